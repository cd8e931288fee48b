#include "cavchar/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <vector>

#include "cavchar/errors.hpp"

namespace cavchar::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct AxisScale {
    bool log = false;
    double lo = 0.0, hi = 1.0;  // in transformed units

    double place(double v, double px0, double px1) const {
        const double t = log ? std::log10(v) : v;
        return px0 + (t - lo) / (hi - lo) * (px1 - px0);
    }
};

std::vector<double> linear_ticks(double lo, double hi) {
    const double span = hi - lo;
    if (!(span > 0)) return {lo};
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= mult * mag) { step = mult * mag; break; }
    }
    std::vector<double> ticks;
    for (double v = std::ceil(lo / step) * step; v <= hi + 0.5 * step; v += step)
        ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return ticks;
}

std::vector<double> log_ticks(double lo_log, double hi_log) {
    std::vector<double> ticks;
    const int stride = std::max(1, static_cast<int>((hi_log - lo_log) / 8.0));
    for (int d = static_cast<int>(std::ceil(lo_log)); d <= static_cast<int>(std::floor(hi_log));
         d += stride)
        ticks.push_back(std::pow(10.0, d));
    if (ticks.empty()) ticks.push_back(std::pow(10.0, 0.5 * (lo_log + hi_log)));
    return ticks;
}

std::string tick_label(double v, bool log) {
    char buf[40];
    if (log) {
        std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(std::log10(v))));
    } else {
        std::snprintf(buf, sizeof buf, "%.4g", v);
    }
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_svg(const PlotSpec& spec) {
    require_domain(!spec.series.empty(), "render_svg: no series");

    // Gather plottable points and ranges.
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : spec.series) {
        require_domain(s.x.size() == s.y.size(), "render_svg: series length mismatch");
        for (Eigen::Index i = 0; i < s.x.size(); ++i) {
            const double x = s.x(i), y = s.y(i);
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (spec.log_x && x <= 0) continue;
            if (spec.log_y && y <= 0) continue;
            x_min = std::min(x_min, x); x_max = std::max(x_max, x);
            y_min = std::min(y_min, y); y_max = std::max(y_max, y);
        }
    }
    require_domain(x_min <= x_max, "render_svg: no plottable points");
    if (x_min == x_max) { x_min -= 0.5; x_max += 0.5; }
    if (y_min == y_max) { y_min -= 0.5 * std::abs(y_min) + 0.5; y_max += 0.5 * std::abs(y_max) + 0.5; }

    AxisScale xs{spec.log_x, 0, 1}, ys{spec.log_y, 0, 1};
    const auto pad = [](double lo, double hi, bool log) {
        double a = log ? std::log10(lo) : lo;
        double b = log ? std::log10(hi) : hi;
        const double margin = 0.04 * (b - a);
        return std::pair<double, double>(a - margin, b + margin);
    };
    std::tie(xs.lo, xs.hi) = pad(x_min, x_max, spec.log_x);
    std::tie(ys.lo, ys.hi) = pad(y_min, y_max, spec.log_y);

    const double left = 78, right = spec.width - 24, top = 46, bottom = spec.height - 58;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
        << spec.height << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << (spec.width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << escape(spec.title) << "</text>\n";

    // Grid and ticks.
    const std::vector<double> xticks =
        spec.log_x ? log_ticks(xs.lo, xs.hi) : linear_ticks(xs.lo, xs.hi);
    const std::vector<double> yticks =
        spec.log_y ? log_ticks(ys.lo, ys.hi) : linear_ticks(ys.lo, ys.hi);
    out << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    for (double v : xticks) {
        const double px = xs.place(v, left, right);
        if (px < left - 0.5 || px > right + 0.5) continue;
        out << "<line x1=\"" << num(px) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px)
            << "\" y2=\"" << num(bottom) << "\"/>\n";
    }
    for (double v : yticks) {
        const double py = bottom - (ys.place(v, 0, 1)) * (bottom - top);
        if (py < top - 0.5 || py > bottom + 0.5) continue;
        out << "<line x1=\"" << num(left) << "\" y1=\"" << num(py) << "\" x2=\"" << num(right)
            << "\" y2=\"" << num(py) << "\"/>\n";
    }
    out << "</g>\n";
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
    for (double v : xticks) {
        const double px = xs.place(v, left, right);
        if (px < left - 0.5 || px > right + 0.5) continue;
        out << "<text x=\"" << num(px) << "\" y=\"" << num(bottom + 16)
            << "\" text-anchor=\"middle\">" << tick_label(v, spec.log_x) << "</text>\n";
    }
    for (double v : yticks) {
        const double py = bottom - (ys.place(v, 0, 1)) * (bottom - top);
        if (py < top - 0.5 || py > bottom + 0.5) continue;
        out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py + 4)
            << "\" text-anchor=\"end\">" << tick_label(v, spec.log_y) << "</text>\n";
    }
    out << "</g>\n";

    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\""
        << num(right - left) << "\" height=\"" << num(bottom - top)
        << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    out << "<text x=\"" << num(0.5 * (left + right)) << "\" y=\"" << num(spec.height - 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape(spec.x_label) << "</text>\n";
    out << "<text x=\"20\" y=\"" << num(0.5 * (top + bottom))
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 20 " << num(0.5 * (top + bottom)) << ")\">"
        << escape(spec.y_label) << "</text>\n";

    for (std::size_t k = 0; k < spec.series.size(); ++k) {
        const Series& s = spec.series[k];
        const std::string color =
            s.color.empty() ? kPalette[k % (sizeof kPalette / sizeof *kPalette)] : s.color;
        std::vector<std::pair<double, double>> pts;
        for (Eigen::Index i = 0; i < s.x.size(); ++i) {
            const double x = s.x(i), y = s.y(i);
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (spec.log_x && x <= 0) continue;
            if (spec.log_y && y <= 0) continue;
            pts.emplace_back(xs.place(x, left, right),
                             bottom - ys.place(y, 0, 1) * (bottom - top));
        }
        if (s.scatter) {
            out << "<g fill=\"" << color << "\">\n";
            for (const auto& [px, py] : pts)
                out << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py) << "\" r=\"3\"/>\n";
            out << "</g>\n";
        } else {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
            for (const auto& [px, py] : pts) out << num(px) << ',' << num(py) << ' ';
            out << "\"/>\n";
        }
        // Legend entry.
        if (!s.label.empty()) {
            const double ly = top + 18 + 18 * static_cast<double>(k);
            out << "<rect x=\"" << num(right - 160) << "\" y=\"" << num(ly - 9)
                << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
            out << "<text x=\"" << num(right - 142) << "\" y=\"" << num(ly + 1)
                << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.label)
                << "</text>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace cavchar::svg
