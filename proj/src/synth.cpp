#include "cavchar/synth.hpp"

#include <cmath>
#include <fstream>

#include "cavchar/io.hpp"
#include "cavchar/special.hpp"

namespace cavchar::synth {

namespace {

using special::counter_normal;

double relative_noise(double value, double sigma_rel, std::uint64_t seed, std::uint64_t index) {
    if (sigma_rel <= 0) return value;
    return value * (1.0 + sigma_rel * counter_normal(seed, index, 0));
}

} // namespace

Eigen::ArrayXd Grid::make() const {
    require_domain(count > 0, "Grid: count must be > 0");
    require_domain(std::isfinite(min) && std::isfinite(max) && min < max,
                   "Grid: need finite min < max");
    if (log) require_domain(min > 0, "Grid: log axis needs min > 0");
    Eigen::ArrayXd out(count);
    if (count == 1) {
        out(0) = min;
        return out;
    }
    if (log) {
        const double l0 = std::log10(min), l1 = std::log10(max);
        for (int i = 0; i < count; ++i)
            out(i) = std::pow(10.0, l0 + (l1 - l0) * i / double(count - 1));
    } else {
        for (int i = 0; i < count; ++i) out(i) = min + (max - min) * i / double(count - 1);
    }
    return out;
}

models::XYData tls_power_points(const loss::TlsPowerParams<double>& truth, double f_r_hz,
                                double temperature_k, const Grid& n_bar, double sigma_rel,
                                std::uint64_t seed) {
    truth.validate();
    models::XYData data;
    data.x = n_bar.make();
    data.y.resize(data.x.size());
    for (Eigen::Index i = 0; i < data.x.size(); ++i) {
        const loss::ModeParams<double> mode{f_r_hz, temperature_k, data.x(i)};
        const double q = 1.0 / loss::eval_tls_power(truth, mode);
        data.y(i) = relative_noise(q, sigma_rel, seed, static_cast<std::uint64_t>(i));
    }
    return data;
}

models::XYData tls_temp_points(const loss::TlsTempParams<double>& truth, double f_r_hz,
                               const Grid& temperature, double sigma_rel, std::uint64_t seed) {
    truth.validate();
    models::XYData data;
    data.x = temperature.make();
    data.y.resize(data.x.size());
    for (Eigen::Index i = 0; i < data.x.size(); ++i) {
        const loss::ModeParams<double> mode{f_r_hz, data.x(i), 0.0};
        const double q = 1.0 / loss::eval_tls_temp(truth, mode);
        data.y(i) = relative_noise(q, sigma_rel, seed, static_cast<std::uint64_t>(i));
    }
    return data;
}

models::XYData freq_shift_points(double f_tls_loss, double f_r_hz, const Grid& temperature,
                                 double sigma_rel, std::uint64_t seed) {
    models::XYData data;
    data.x = temperature.make();
    data.y.resize(data.x.size());
    for (Eigen::Index i = 0; i < data.x.size(); ++i) {
        const loss::ModeParams<double> mode{f_r_hz, data.x(i), 0.0};
        data.y(i) = loss::eval_freq_shift(f_tls_loss, mode);
    }
    if (sigma_rel > 0) {
        const double scale = data.y.abs().maxCoeff();
        for (Eigen::Index i = 0; i < data.y.size(); ++i)
            data.y(i) += sigma_rel * scale * counter_normal(seed, static_cast<std::uint64_t>(i), 0);
    }
    return data;
}

ringdown::TimeTrace ringdown_trace(double tau_tot_s, double e0, double offset, const Grid& time,
                                   double sigma_rel, std::uint64_t seed,
                                   ringdown::TimeTrace::Kind kind) {
    require_domain(tau_tot_s > 0 && e0 > 0, "ringdown_trace: tau and e0 must be > 0");
    ringdown::TimeTrace trace;
    trace.kind = kind;
    trace.times = time.make();
    trace.values.resize(trace.times.size());
    for (Eigen::Index i = 0; i < trace.times.size(); ++i) {
        double energy = e0 * std::exp(-trace.times(i) / tau_tot_s) + offset;
        energy = relative_noise(energy, sigma_rel, seed, static_cast<std::uint64_t>(i));
        energy = std::max(energy, 0.0);
        trace.values(i) = kind == ringdown::TimeTrace::Kind::Power ? energy : std::sqrt(energy);
    }
    return trace;
}

resonance::FrequencyTrace s11_trace(const resonance::ResonanceParams& truth,
                                    double span_linewidths, int count, double snr_db,
                                    std::uint64_t seed) {
    truth.validate();
    require_domain(span_linewidths > 0 && count >= 16, "s11_trace: invalid span or count");
    const double fwhm = truth.f_r / truth.q_loaded;
    Grid grid{truth.f_r - 0.5 * span_linewidths * fwhm, truth.f_r + 0.5 * span_linewidths * fwhm,
              count, false};

    resonance::FrequencyTrace trace;
    trace.frequencies = grid.make();
    trace.s11 = resonance::model_s11(truth, trace.frequencies);
    if (std::isfinite(snr_db)) {
        const double sigma = truth.env_amp * std::pow(10.0, -snr_db / 20.0);
        for (Eigen::Index i = 0; i < trace.s11.size(); ++i)
            trace.s11(i) += std::complex<double>(
                sigma * counter_normal(seed, static_cast<std::uint64_t>(i), 0),
                sigma * counter_normal(seed, static_cast<std::uint64_t>(i), 1));
    }
    return trace;
}

xps::Spectrum xps_spectrum(const std::vector<xps::DoubletComponent>& truth,
                           double background_intercept, double background_slope,
                           const Grid& energy, double sigma_rel, std::uint64_t seed) {
    xps::Spectrum s;
    s.binding_energy_ev = energy.make();
    const double e_center = 0.5 * (energy.min + energy.max);
    s.counts = Eigen::ArrayXd::Zero(s.binding_energy_ev.size());
    for (Eigen::Index i = 0; i < s.binding_energy_ev.size(); ++i) {
        double v = background_intercept + background_slope * (s.binding_energy_ev(i) - e_center);
        for (const auto& c : truth) v += xps::model_doublet(c, s.binding_energy_ev(i));
        v = relative_noise(v, sigma_rel, seed, static_cast<std::uint64_t>(i));
        s.counts(i) = std::max(v, 0.0);
    }
    return s;
}

nlohmann::ordered_json load_synth_spec(const std::filesystem::path& spec_path) {
    std::ifstream in(spec_path);
    if (!in) throw ParseError("cannot open '" + spec_path.string() + "'");
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(spec_path.string() + ": " + e.what());
    }
}

namespace {

double get_num(const nlohmann::ordered_json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw ParseError("synth spec: missing numeric field '" + key + "'");
    return j.at(key).get<double>();
}

double get_num_or(const nlohmann::ordered_json& j, const std::string& key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

Grid get_grid(const nlohmann::ordered_json& spec) {
    if (!spec.contains("axis")) throw ParseError("synth spec: missing 'axis'");
    const auto& axis = spec.at("axis");
    Grid grid;
    grid.min = get_num(axis, "min");
    grid.max = get_num(axis, "max");
    grid.count = static_cast<int>(get_num(axis, "count"));
    grid.log = axis.value("kind", "linear") == std::string("log");
    return grid;
}

} // namespace

SynthOutput generate_synthetic(const nlohmann::ordered_json& spec,
                               const std::filesystem::path& out_dir) {
    if (!spec.contains("model") || !spec.at("model").is_string())
        throw ParseError("synth spec: missing 'model'");
    const models::ModelId model = models::model_id_from_string(spec.at("model").get<std::string>());
    const std::uint64_t seed = spec.value("seed", std::uint64_t{0});
    const auto noise = spec.value("noise", nlohmann::ordered_json::object());
    const double sigma_rel = noise.value("sigma_rel", 0.0);
    const double snr_db = noise.value("snr_db", std::numeric_limits<double>::infinity());
    const auto truth = spec.value("truth", nlohmann::ordered_json::object());
    const auto ctx = spec.value("context", nlohmann::ordered_json::object());

    std::filesystem::create_directories(out_dir);

    SynthOutput out;
    out.truth_path = out_dir / "truth.json";

    nlohmann::ordered_json sidecar;
    sidecar["model"] = models::to_string(model);
    sidecar["seed"] = seed;
    sidecar["truth"] = truth;
    sidecar["context"] = ctx;
    sidecar["noise"] = noise;

    switch (model) {
        case models::ModelId::TlsPower: {
            const loss::TlsPowerParams<double> p{get_num(truth, "f_tls_loss"), get_num(truth, "n_c"),
                                                 get_num(truth, "beta"), get_num(truth, "q_res")};
            const double f_r = get_num(ctx, "f_r_hz");
            const double t = get_num(ctx, "temperature_k");
            const auto data = tls_power_points(p, f_r, t, get_grid(spec), sigma_rel, seed);
            out.data_path = out_dir / "data.csv";
            io::write_csv_xy(out.data_path, io::CsvSchema::QnPoints, data,
                             {{"f_r_hz", f_r}, {"temperature_k", t}, {"seed", double(seed)}});
            break;
        }
        case models::ModelId::TlsTemp: {
            const loss::TlsTempParams<double> p{get_num(truth, "f_tls_loss"),
                                                get_num(truth, "q_int0")};
            const double f_r = get_num(ctx, "f_r_hz");
            const auto data = tls_temp_points(p, f_r, get_grid(spec), sigma_rel, seed);
            out.data_path = out_dir / "data.csv";
            io::write_csv_xy(out.data_path, io::CsvSchema::QtPoints, data,
                             {{"f_r_hz", f_r}, {"seed", double(seed)}});
            break;
        }
        case models::ModelId::FreqShift: {
            const double f_r = get_num(ctx, "f_r_hz");
            const auto data = freq_shift_points(get_num(truth, "f_tls_loss"), f_r, get_grid(spec),
                                                sigma_rel, seed);
            out.data_path = out_dir / "data.csv";
            io::write_csv_xy(out.data_path, io::CsvSchema::FtPoints, data,
                             {{"f_r_hz", f_r}, {"seed", double(seed)}});
            break;
        }
        case models::ModelId::Ringdown: {
            const auto kind = ctx.value("kind", "power") == std::string("amplitude")
                                  ? ringdown::TimeTrace::Kind::Amplitude
                                  : ringdown::TimeTrace::Kind::Power;
            const auto trace = ringdown_trace(get_num(truth, "tau_tot_s"), get_num(truth, "e0"),
                                              get_num_or(truth, "offset", 0.0), get_grid(spec),
                                              sigma_rel, seed, kind);
            out.data_path = out_dir / "data.csv";
            io::write_csv_time_trace(out.data_path, trace, {{"seed", double(seed)}});
            break;
        }
        case models::ModelId::S11: {
            const auto p = resonance::resonance_from_q(
                get_num(truth, "f_r_hz"), get_num(truth, "q_int"), get_num(truth, "q_ext"),
                get_num_or(truth, "coupling_phase", 0.0), get_num_or(truth, "env_delay_s", 0.0),
                get_num_or(truth, "env_amp", 1.0), get_num_or(truth, "env_phase", 0.0));
            const auto& axis = spec.at("axis");
            const auto trace = s11_trace(p, get_num_or(axis, "span_linewidths", 40.0),
                                         static_cast<int>(get_num_or(axis, "count", 2001)),
                                         snr_db, seed);
            out.data_path = out_dir / "data.s1p";
            io::write_touchstone(out.data_path, trace);
            sidecar["truth"]["q_loaded"] = p.q_loaded;
            break;
        }
    }

    std::ofstream truth_out(out.truth_path, std::ios::binary);
    truth_out << sidecar.dump(2) << '\n';
    return out;
}

} // namespace cavchar::synth
