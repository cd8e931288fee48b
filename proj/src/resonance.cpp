#include "cavchar/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cavchar::resonance {

namespace {

constexpr double kPi = EIGEN_PI;

void check_frequency_trace(const Eigen::ArrayXd& f, const Eigen::ArrayXcd& s,
                          Eigen::Index min_points) {
    require_domain(f.size() == s.size(), "FrequencyTrace: frequency/s11 length mismatch");
    require_domain(f.size() >= min_points,
                   "FrequencyTrace: need at least " + std::to_string(min_points) + " samples");
    require_domain(f.allFinite() && s.allFinite(), "FrequencyTrace: samples must be finite");
    for (Eigen::Index i = 1; i < f.size(); ++i)
        require_domain(f(i) > f(i - 1), "FrequencyTrace: frequencies must be strictly increasing");
}

Eigen::ArrayXd unwrap(const Eigen::ArrayXd& phase) {
    Eigen::ArrayXd out = phase;
    double shift = 0.0;
    for (Eigen::Index i = 1; i < phase.size(); ++i) {
        const double d = phase(i) - phase(i - 1);
        if (d > kPi) shift -= 2.0 * kPi;
        else if (d < -kPi) shift += 2.0 * kPi;
        out(i) = phase(i) + shift;
    }
    return out;
}

struct LineFit {
    double slope = 0.0, intercept = 0.0, sxx = 0.0;
};

LineFit fit_line(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
    LineFit r;
    const double xm = x.mean(), ym = y.mean();
    r.sxx = ((x - xm) * (x - xm)).sum();
    if (r.sxx > 0) r.slope = ((x - xm) * (y - ym)).sum() / r.sxx;
    r.intercept = ym - r.slope * xm;
    return r;
}

Eigen::ArrayXd moving_average(const Eigen::ArrayXd& v, Eigen::Index half) {
    if (half <= 0) return v;
    Eigen::ArrayXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
        const Eigen::Index hi = std::min<Eigen::Index>(v.size() - 1, i + half);
        out(i) = v.segment(lo, hi - lo + 1).mean();
    }
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
    return 0.5 * (hi + v[mid - 1]);
}

struct DipInfo {
    bool found = false;
    Eigen::Index index = 0;
    double f_dip = 0.0;
    double fwhm = 0.0;
    double depth = 0.0;
    double wing_mag = 0.0;
    int clusters = 1;
};

DipInfo detect_dip(const Eigen::ArrayXd& f, const Eigen::ArrayXcd& s) {
    const Eigen::Index n = f.size();
    const Eigen::Index wing_n = std::max<Eigen::Index>(n / 10, 3);
    const Eigen::ArrayXd mag = s.abs();

    std::vector<double> wing_vals;
    wing_vals.reserve(static_cast<std::size_t>(2 * wing_n));
    for (Eigen::Index i = 0; i < wing_n; ++i) {
        wing_vals.push_back(mag(i));
        wing_vals.push_back(mag(n - 1 - i));
    }
    DipInfo dip;
    dip.wing_mag = Eigen::Map<const Eigen::ArrayXd>(wing_vals.data(),
                                                    static_cast<Eigen::Index>(wing_vals.size()))
                       .mean();

    // Point noise from adjacent wing differences; a smooth resonance
    // shoulder under the wings then cancels instead of inflating the
    // estimate on short spans.
    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(2 * wing_n));
    for (Eigen::Index i = 1; i < wing_n; ++i) {
        diffs.push_back(std::abs(mag(i) - mag(i - 1)));
        diffs.push_back(std::abs(mag(n - i) - mag(n - 1 - i)));
    }
    const double noise = 1.4826 * median(diffs) / std::sqrt(2.0);

    // Strongly mismatched resonances can push |S11| above the wing level
    // instead of dipping, so detect on the absolute deviation.
    const Eigen::ArrayXd smooth = moving_average(mag, std::max<Eigen::Index>(n / 400, 1));
    const Eigen::ArrayXd dev = (smooth - dip.wing_mag).abs();
    dip.depth = dev.maxCoeff(&dip.index);
    dip.f_dip = f(dip.index);
    if (dip.depth < std::max(6.0 * noise, 1e-6 * std::max(dip.wing_mag, 1e-300))) return dip;
    dip.found = true;

    // Half-depth crossings around the dip, linearly interpolated.
    const double half = dip.depth / 2.0;
    double f_left = f(0), f_right = f(n - 1);
    for (Eigen::Index i = dip.index; i > 0; --i) {
        if (dev(i - 1) < half && dev(i) >= half) {
            const double t = (half - dev(i - 1)) / (dev(i) - dev(i - 1));
            f_left = f(i - 1) + t * (f(i) - f(i - 1));
            break;
        }
    }
    for (Eigen::Index i = dip.index; i < n - 1; ++i) {
        if (dev(i + 1) < half && dev(i) >= half) {
            const double t = (half - dev(i + 1)) / (dev(i) - dev(i + 1));
            f_right = f(i + 1) - t * (f(i + 1) - f(i));
            break;
        }
    }
    dip.fwhm = std::max(f_right - f_left, (f(n - 1) - f(0)) / static_cast<double>(n));

    // Count well-separated runs of deep points: a second run means a second
    // resonance in the span.
    int clusters = 0;
    int run = 0;
    double prev_f = f(0);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (dev(i) <= 0.6 * dip.depth) continue;
        if (run > 0 && f(i) - prev_f > 3.0 * dip.fwhm) {
            if (run >= 2) ++clusters;
            run = 0;
        }
        ++run;
        prev_f = f(i);
    }
    if (run >= 2) ++clusters;
    dip.clusters = std::max(clusters, 1);
    return dip;
}

struct PhaseFit {
    double theta0 = 0.0, q_loaded = 0.0, f_r = 0.0;
    fit::FitResult fit;
};

// Fits theta(f) = theta0 + 2 atan(2 Q_l (1 - f/f_r)) to the unwrapped angle
// of the circle-centered trajectory.
PhaseFit fit_phase(const Eigen::ArrayXd& f, const Eigen::ArrayXcd& z,
                   const std::complex<double>& center, double f_r0, double q0,
                   const fit::SolveOptions& options) {
    Eigen::ArrayXd theta(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) theta(i) = std::arg(z(i) - center);
    theta = unwrap(theta);

    const double f_lo = f(0), f_hi = f(f.size() - 1);
    Eigen::VectorXd initial(3), lower(3), upper(3);
    initial << theta.mean(), std::max(q0, 2.0), std::clamp(f_r0, f_lo, f_hi);
    lower << -std::numeric_limits<double>::infinity(), 1.0, f_lo;
    upper << std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
        f_hi;

    fit::FitProblem problem;
    problem.residual = [f, theta](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(f.size());
        for (Eigen::Index i = 0; i < f.size(); ++i)
            r(i) = p(0) + 2.0 * std::atan(2.0 * p(1) * (1.0 - f(i) / p(2))) - theta(i);
        return r;
    };
    problem.jacobian = [f](const Eigen::VectorXd& p) {
        Eigen::MatrixXd jac(f.size(), 3);
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const double x = 1.0 - f(i) / p(2);
            const double g = 2.0 * p(1) * x;
            const double s = 2.0 / (1.0 + g * g);
            jac(i, 0) = 1.0;
            jac(i, 1) = s * 2.0 * x;
            jac(i, 2) = s * 2.0 * p(1) * f(i) / (p(2) * p(2));
        }
        return jac;
    };
    problem.initial = initial;
    problem.lower = lower;
    problem.upper = upper;
    problem.max_iterations = options.max_iterations;
    problem.tolerance = options.tolerance;

    PhaseFit out;
    out.fit = fit::solve_least_squares(problem);
    out.theta0 = out.fit.parameters(0);
    out.q_loaded = out.fit.parameters(1);
    out.f_r = out.fit.parameters(2);
    return out;
}

std::complex<double> env_factor(double f, double delay_s, double amp, double phase) {
    return std::polar(amp, phase - 2.0 * kPi * f * delay_s);
}

} // namespace

void FrequencyTrace::validate(Eigen::Index min_points) const {
    check_frequency_trace(frequencies, s11, min_points);
}

void ResonanceParams::validate() const {
    require_domain(f_r > 0 && q_loaded > 0 && q_ext_mag > 0 && q_int > 0,
                   "ResonanceParams: f_r and quality factors must be > 0");
    require_domain(env_amp > 0, "ResonanceParams: env_amp must be > 0");
    const double lhs = 1.0 / q_loaded;
    const double rhs = 1.0 / q_int + std::cos(coupling_phase) / q_ext_mag;
    require_domain(std::abs(lhs - rhs) <= 1e-9 * std::abs(lhs),
                   "ResonanceParams: loaded-Q composition identity violated");
}

ResonanceParams resonance_from_q(double f_r, double q_int, double q_ext_mag,
                                 double coupling_phase, double env_delay_s, double env_amp,
                                 double env_phase) {
    require_domain(f_r > 0 && q_int > 0 && q_ext_mag > 0,
                   "resonance_from_q: f_r and quality factors must be > 0");
    require_domain(std::abs(coupling_phase) < kPi / 2,
                   "resonance_from_q: |coupling phase| must be < pi/2");
    ResonanceParams p;
    p.f_r = f_r;
    p.q_int = q_int;
    p.q_ext_mag = q_ext_mag;
    p.coupling_phase = coupling_phase;
    p.q_loaded = 1.0 / (1.0 / q_int + std::cos(coupling_phase) / q_ext_mag);
    p.env_delay_s = env_delay_s;
    p.env_amp = env_amp;
    p.env_phase = env_phase;
    return p;
}

std::complex<double> model_s11(const ResonanceParams& p, double f_hz) {
    const double x = f_hz / p.f_r - 1.0;
    const std::complex<double> dip =
        (2.0 * p.q_loaded / p.q_ext_mag) * std::polar(1.0, p.coupling_phase) /
        std::complex<double>(1.0, 2.0 * p.q_loaded * x);
    return env_factor(f_hz, p.env_delay_s, p.env_amp, p.env_phase) * (1.0 - dip);
}

Eigen::ArrayXcd model_s11(const ResonanceParams& p, const Eigen::ArrayXd& f_hz) {
    Eigen::ArrayXcd out(f_hz.size());
    for (Eigen::Index i = 0; i < f_hz.size(); ++i) out(i) = model_s11(p, f_hz(i));
    return out;
}

CouplingRegime classify_coupling(const ResonanceParams& p) {
    require_domain(p.q_int > 0 && p.q_ext_mag > 0, "classify_coupling: Q values must be > 0");
    const double ratio = p.q_ext_mag / p.q_int;
    CouplingLabel label = CouplingLabel::Critical;
    if (std::abs(ratio - 1.0) > 0.05)
        label = ratio < 1.0 ? CouplingLabel::Overcoupled : CouplingLabel::Undercoupled;
    return {label, ratio};
}

std::string to_string(CouplingLabel label) {
    switch (label) {
        case CouplingLabel::Undercoupled: return "undercoupled";
        case CouplingLabel::Critical: return "critical";
        case CouplingLabel::Overcoupled: return "overcoupled";
    }
    return "?";
}

Circle circle_fit(const Eigen::ArrayXcd& points) {
    const Eigen::Index n = points.size();
    require_domain(n >= 3, "circle_fit: need at least 3 points");
    require_domain(points.allFinite(), "circle_fit: points must be finite");

    // Taubin fit, Newton on the characteristic polynomial.
    const double mean_x = points.real().mean();
    const double mean_y = points.imag().mean();
    const Eigen::ArrayXd xs = points.real() - mean_x;
    const Eigen::ArrayXd ys = points.imag() - mean_y;
    const Eigen::ArrayXd zs = xs.square() + ys.square();

    const double nd = static_cast<double>(n);
    const double Mxx = xs.square().sum() / nd;
    const double Myy = ys.square().sum() / nd;
    const double Mxy = (xs * ys).sum() / nd;
    const double Mxz = (xs * zs).sum() / nd;
    const double Myz = (ys * zs).sum() / nd;
    const double Mzz = zs.square().sum() / nd;

    const double Mz = Mxx + Myy;
    const double cov_xy = Mxx * Myy - Mxy * Mxy;
    const double var_z = Mzz - Mz * Mz;

    require_domain(cov_xy > 1e-24 * Mz * Mz,
                   "circle_fit: points are collinear (or nearly so)");

    const double a3 = 4.0 * Mz;
    const double a2 = -3.0 * Mz * Mz - Mzz;
    const double a1 = var_z * Mz + 4.0 * cov_xy * Mz - Mxz * Mxz - Myz * Myz;
    const double a0 = Mxz * (Mxz * Myy - Myz * Mxy) + Myz * (Myz * Mxx - Mxz * Mxy) -
                      var_z * cov_xy;
    const double a22 = 2.0 * a2, a33 = 3.0 * a3;

    double eta = 0.0, poly = a0;
    for (int iter = 0; iter < 99; ++iter) {
        const double deriv = a1 + eta * (a22 + eta * a33);
        if (deriv == 0.0) break;
        const double eta_new = eta - poly / deriv;
        if (!std::isfinite(eta_new) || eta_new == eta) break;
        const double poly_new = a0 + eta_new * (a1 + eta_new * (a2 + eta_new * a3));
        if (std::abs(poly_new) >= std::abs(poly)) break;
        eta = eta_new;
        poly = poly_new;
    }

    const double det = eta * eta - eta * Mz + cov_xy;
    require_domain(std::abs(det) > 0, "circle_fit: degenerate configuration");
    const double xc = (Mxz * (Myy - eta) - Myz * Mxy) / det / 2.0;
    const double yc = (Myz * (Mxx - eta) - Mxz * Mxy) / det / 2.0;
    const double r2 = xc * xc + yc * yc + Mz - 2.0 * eta;
    require_domain(r2 > 0 && std::isfinite(r2), "circle_fit: degenerate configuration");

    return {std::complex<double>(xc + mean_x, yc + mean_y), std::sqrt(r2)};
}

namespace {

// RMS algebraic circle-fit residual of the delay-corrected trace, on a
// decimated point set.  Noise-free traces reach zero exactly at the true
// delay: any residual delay bends the trajectory off its circle.
double circle_residual(const Eigen::ArrayXd& f, const Eigen::ArrayXcd& s, double delay) {
    const Eigen::Index n = f.size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / 400);
    Eigen::ArrayXcd w((n + stride - 1) / stride);
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < n; i += stride)
        w(m++) = s(i) * std::polar(1.0, 2.0 * kPi * f(i) * delay);
    Circle c;
    try {
        c = circle_fit(w.head(m));
    } catch (const DomainError&) {
        return std::numeric_limits<double>::max();
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double d = std::abs(w(i) - c.center) - c.radius;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(m));
}

double golden_min(const std::function<double(double)>& fn, double a, double b, int iters) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = fn(c), fd = fn(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a);
            fc = fn(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a);
            fd = fn(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace

NormalizedTrace remove_environment(const FrequencyTrace& t) {
    t.validate();
    const Eigen::ArrayXd& f = t.frequencies;
    const Eigen::ArrayXcd& s = t.s11;
    const Eigen::Index n = f.size();
    const double span_hz = f(n - 1) - f(0);

    const DipInfo dip = detect_dip(f, s);

    EnvironmentEstimate env;
    env.resonance_found = dip.found;
    env.f_r_rough = dip.f_dip;
    env.fwhm_rough = dip.fwhm;

    double delay = 0.0, amp = 1.0, phase = 0.0;

    if (!dip.found) {
        // Pure environment: the unwrapped phase is a single line over the
        // whole (contiguous) span.
        Eigen::ArrayXd ph(n);
        for (Eigen::Index i = 0; i < n; ++i) ph(i) = std::arg(s(i));
        const LineFit lf = fit_line(f, unwrap(ph));
        delay = -lf.slope / (2.0 * kPi);
        std::complex<double> acc(0, 0);
        for (Eigen::Index i = 0; i < n; ++i)
            acc += s(i) * std::polar(1.0, 2.0 * kPi * f(i) * delay);
        acc /= static_cast<double>(n);
        amp = std::abs(acc);
        phase = std::arg(acc);
    } else {
        const double left = std::max(0.0, (dip.f_dip - f(0)) / dip.fwhm - 2.0);
        const double right = std::max(0.0, (f(n - 1) - dip.f_dip) / dip.fwhm - 2.0);
        env.wing_linewidths = left + right;
        env.insufficient_span =
            env.wing_linewidths < 2.0 || (f(n - 1) - f(0)) < 5.0 * dip.fwhm;

        // Initial delay from per-wing phase slopes (unwrapping never crosses
        // the resonance), refined by minimizing the circle residual.
        double acc = 0.0, wsum = 0.0;
        for (const bool left_side : {true, false}) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (std::abs(f(i) - dip.f_dip) <= 2.0 * dip.fwhm) continue;
                if ((f(i) < dip.f_dip) == left_side) idx.push_back(i);
            }
            if (idx.size() < 3) continue;
            Eigen::ArrayXd fx(static_cast<Eigen::Index>(idx.size()));
            Eigen::ArrayXd ph(static_cast<Eigen::Index>(idx.size()));
            for (std::size_t k = 0; k < idx.size(); ++k) {
                fx(static_cast<Eigen::Index>(k)) = f(idx[k]);
                ph(static_cast<Eigen::Index>(k)) = std::arg(s(idx[k]));
            }
            const LineFit lf = fit_line(fx, unwrap(ph));
            if (lf.sxx > 0) {
                acc += lf.slope * lf.sxx;
                wsum += lf.sxx;
            }
        }
        const double delay0 = wsum > 0 ? -acc / (wsum * 2.0 * kPi) : 0.0;

        // Keep the scanned twist below ~2 rad across the span: far beyond
        // that a wrapped trace collapses onto the |S| = const circle and
        // fakes a minimum.
        const double bracket = 0.35 / span_hz;
        delay = golden_min([&](double d) { return circle_residual(f, s, d); },
                           delay0 - bracket, delay0 + bracket, 90);
        if (circle_residual(f, s, delay) > circle_residual(f, s, delay0)) delay = delay0;

        // With the delay fixed, the corrected trace lies on a circle whose
        // off-resonant point IS the remaining environment factor.
        Eigen::ArrayXcd w(n);
        for (Eigen::Index i = 0; i < n; ++i)
            w(i) = s(i) * std::polar(1.0, 2.0 * kPi * f(i) * delay);
        const Circle c = circle_fit(w);
        fit::SolveOptions quick;
        quick.max_iterations = 80;
        quick.tolerance = 1e-14;
        const PhaseFit pf = fit_phase(f, w, c.center, dip.f_dip,
                                      dip.f_dip / std::max(dip.fwhm, 1e-300), quick);
        const std::complex<double> off_res =
            c.center - c.radius * std::polar(1.0, pf.theta0);
        amp = std::abs(off_res);
        phase = std::arg(off_res);
    }

    env.delay_s = delay;
    env.amplitude = amp;
    env.phase = phase;

    NormalizedTrace out;
    out.env = env;
    out.trace.frequencies = f;
    out.trace.drive_power_w = t.drive_power_w;
    out.trace.temperature_k = t.temperature_k;
    out.trace.s11.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out.trace.s11(i) = s(i) / env_factor(f(i), delay, amp, phase);
    return out;
}

ExtractionResult extract_resonance(const FrequencyTrace& t, const ExtractionOptions& options) {
    t.validate();
    NormalizedTrace nt = remove_environment(t);
    if (!nt.env.resonance_found)
        throw DomainError("extract_resonance: no resonance found in trace");

    {
        const DipInfo dip = detect_dip(t.frequencies, t.s11);
        if (dip.clusters > 1)
            throw DomainError("extract_resonance: multiple resonances in span");
    }

    const Eigen::ArrayXd& f = t.frequencies;
    const Eigen::Index n = f.size();

    const Circle circle = circle_fit(nt.trace.s11);
    PhaseFit pf = fit_phase(f, nt.trace.s11, circle.center, nt.env.f_r_rough,
                            nt.env.f_r_rough / std::max(nt.env.fwhm_rough, 1e-300),
                            options.solve);

    double q_loaded = pf.q_loaded;
    double f_r = pf.f_r;
    double diameter = 2.0 * circle.radius;
    double phi = std::arg(1.0 - circle.center);
    double delay = nt.env.delay_s, amp = nt.env.amplitude, phase = nt.env.phase;

    fit::FitResult fit_out = pf.fit;

    if (options.refine) {
        // Full complex least squares on the raw trace; parameters
        // (f_r, Q_l, diameter, phi, delay, amp, phase-at-band-center).  The
        // delay phase is referenced to the band center: against the absolute
        // intercept it would be degenerate to one part in f_c/span.
        const double f_c = 0.5 * (f(0) + f(n - 1));
        const double phase_c = std::remainder(phase - 2.0 * kPi * f_c * delay, 2.0 * kPi);

        Eigen::VectorXd initial(7), lower(7), upper(7);
        initial << f_r, q_loaded, std::clamp(diameter, 1e-8, 3.9),
            std::clamp(phi, -1.5, 1.5), delay, std::max(amp, 1e-12), phase_c;
        lower << f(0), 1.0, 1e-8, -kPi / 2, -std::numeric_limits<double>::infinity(), 1e-12,
            -std::numeric_limits<double>::infinity();
        upper << f(n - 1), std::numeric_limits<double>::infinity(), 4.0, kPi / 2,
            std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity();

        const Eigen::ArrayXcd& data = t.s11;
        fit::FitProblem problem;
        problem.residual = [&f, &data, n, f_c](const Eigen::VectorXd& p) {
            Eigen::VectorXd r(2 * n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::complex<double> res =
                    1.0 - p(2) * std::polar(1.0, p(3)) /
                              std::complex<double>(1.0, 2.0 * p(1) * (f(i) / p(0) - 1.0));
                const std::complex<double> model =
                    std::polar(p(5), p(6) - 2.0 * kPi * (f(i) - f_c) * p(4)) * res;
                r(2 * i) = model.real() - data(i).real();
                r(2 * i + 1) = model.imag() - data(i).imag();
            }
            return r;
        };
        problem.jacobian = [&f, n, f_c](const Eigen::VectorXd& p) {
            Eigen::MatrixXd jac(2 * n, 7);
            const std::complex<double> dip_scale = p(2) * std::polar(1.0, p(3));
            for (Eigen::Index i = 0; i < n; ++i) {
                const double x = f(i) / p(0) - 1.0;
                const std::complex<double> q(1.0, 2.0 * p(1) * x);
                const std::complex<double> inv_q = 1.0 / q;
                const std::complex<double> res = 1.0 - dip_scale * inv_q;
                const std::complex<double> env =
                    std::polar(p(5), p(6) - 2.0 * kPi * (f(i) - f_c) * p(4));
                const std::complex<double> model = env * res;

                // d res / d q = dip_scale / q^2, chained into each shape knob.
                const std::complex<double> dres_dq = dip_scale * inv_q * inv_q;
                const std::complex<double> cols[7] = {
                    env * dres_dq * std::complex<double>(0.0, -2.0 * p(1) * f(i) / (p(0) * p(0))),
                    env * dres_dq * std::complex<double>(0.0, 2.0 * x),
                    env * (-std::polar(1.0, p(3)) * inv_q),
                    env * (std::complex<double>(0.0, -1.0) * dip_scale * inv_q),
                    std::complex<double>(0.0, -2.0 * kPi * (f(i) - f_c)) * model,
                    model / p(5),
                    std::complex<double>(0.0, 1.0) * model,
                };
                for (int j = 0; j < 7; ++j) {
                    jac(2 * i, j) = cols[j].real();
                    jac(2 * i + 1, j) = cols[j].imag();
                }
            }
            return jac;
        };
        problem.initial = initial;
        problem.lower = lower;
        problem.upper = upper;
        problem.max_iterations = std::max(options.solve.max_iterations, 300);
        // Polish to the machine floor: near-critical coupling the internal
        // loss comes from a difference of almost-equal rates, so residual
        // slack in Q_l is amplified into Q_int.
        problem.tolerance = std::min(options.solve.tolerance, 1e-14);

        fit_out = fit::solve_least_squares(problem);
        const Eigen::VectorXd& p = fit_out.parameters;
        f_r = p(0);
        q_loaded = p(1);
        diameter = p(2);
        phi = p(3);
        delay = p(4);
        amp = p(5);
        phase = p(6) + 2.0 * kPi * f_c * delay;
    }

    const double q_ext = 2.0 * q_loaded / diameter;
    const double inv_q_int = 1.0 / q_loaded - std::cos(phi) / q_ext;
    if (!(inv_q_int > 0))
        throw FitError("extract_resonance: extracted non-physical internal loss "
                       "(1/Q_int <= 0); trace may be too noisy or mis-modelled");

    ExtractionResult out;
    out.params.f_r = f_r;
    out.params.q_loaded = q_loaded;
    out.params.q_ext_mag = q_ext;
    out.params.coupling_phase = phi;
    out.params.q_int = 1.0 / inv_q_int;
    out.params.env_delay_s = delay;
    out.params.env_amp = amp;
    out.params.env_phase = std::remainder(phase, 2.0 * kPi);
    out.params.validate();
    out.coupling = classify_coupling(out.params);
    out.fit = std::move(fit_out);
    out.env = nt.env;
    return out;
}

} // namespace cavchar::resonance
