// cavchar: batch characterization toolkit for high-Q superconducting cavities.
//
// Subcommands cover S11 circle-fit extraction, TLS power/temperature fits,
// frequency-shift fits, ring-down lifetime budgets, photon-number
// calibration, XPS Nb 3d deconvolution, etch-depth estimation, synthetic
// dataset generation, campaign reports and SVG plots.
//
// Exit codes: 0 success, 2 parse/validation error, 3 fit non-convergence,
// 4 domain error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cavchar/campaign.hpp"
#include "cavchar/config.hpp"
#include "cavchar/io.hpp"
#include "cavchar/loss_models.hpp"
#include "cavchar/models.hpp"
#include "cavchar/report.hpp"
#include "cavchar/resonance.hpp"
#include "cavchar/ringdown.hpp"
#include "cavchar/svg.hpp"
#include "cavchar/synth.hpp"
#include "cavchar/xps.hpp"

namespace {

using cavchar::DomainError;
using cavchar::FitError;
using cavchar::ParseError;
using ordered_json = nlohmann::ordered_json;

struct OutputOptions {
    std::string out_path;
    std::string format = "text";
};

void add_output_flags(CLI::App* cmd, OutputOptions& opts) {
    cmd->add_option("--out", opts.out_path, "write output to this path instead of stdout");
    cmd->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"text", "json", "json-like-structured", "csv"}));
}

void emit(const OutputOptions& opts, const std::string& payload) {
    if (opts.out_path.empty()) {
        std::cout << payload;
        if (!payload.empty() && payload.back() != '\n') std::cout << '\n';
    } else {
        std::ofstream out(opts.out_path, std::ios::binary);
        if (!out) throw ParseError("cannot write '" + opts.out_path + "'");
        out << payload;
        if (!payload.empty() && payload.back() != '\n') out << '\n';
    }
}

bool wants_json(const OutputOptions& opts) {
    return opts.format == "json" || opts.format == "json-like-structured";
}

ordered_json fit_block(const cavchar::fit::FitResult& fit) {
    ordered_json j;
    j["converged"] = fit.converged;
    j["status"] = fit.status == cavchar::fit::FitStatus::Converged ? "converged"
                  : fit.status == cavchar::fit::FitStatus::Stalled ? "stalled"
                                                                   : "max-iterations";
    j["iterations"] = fit.iterations;
    j["reduced_chi_square"] = fit.reduced_chi_square;
    j["residual_norm_history"] = fit.residual_norm_history;
    if (!fit.message.empty()) j["message"] = fit.message;
    return j;
}

ordered_json array_block(const Eigen::ArrayXd& v) {
    ordered_json j = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

Eigen::ArrayXd array_from(const ordered_json& j) {
    Eigen::ArrayXd v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index i = 0;
    for (const auto& x : j) v(i++) = x.get<double>();
    return v;
}

std::string params_csv(const ordered_json& params) {
    std::string out = "parameter,value\n";
    for (const auto& [key, value] : params.items()) {
        std::string v = value.dump();
        if (v.find_first_of(",\"") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : v) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            quoted += '"';
            v = std::move(quoted);
        }
        out += key + "," + v + "\n";
    }
    return out;
}

std::string params_text(const std::string& title, const ordered_json& params,
                        const cavchar::fit::FitResult* fit) {
    std::string out = title + "\n";
    for (const auto& [key, value] : params.items())
        out += "  " + key + " = " + value.dump() + "\n";
    if (fit != nullptr) {
        out += std::string("  converged = ") + (fit->converged ? "yes" : "no") + " (" +
               std::to_string(fit->iterations) + " iterations, reduced chi^2 = " +
               cavchar::io::format_double(fit->reduced_chi_square) + ")\n";
    }
    return out;
}

void emit_result(const OutputOptions& opts, const std::string& title, const ordered_json& doc,
                 const cavchar::fit::FitResult* fit) {
    if (wants_json(opts)) {
        emit(opts, doc.dump(2) + "\n");
    } else if (opts.format == "csv") {
        emit(opts, params_csv(doc.at("params")));
    } else {
        emit(opts, params_text(title, doc.at("params"), fit));
    }
}

int exit_code_for_fit(const cavchar::fit::FitResult& fit) {
    return fit.converged ? 0 : FitError::exit_code;
}

// ---------------------------------------------------------------------------
// subcommand payloads

struct CommonFitFlags {
    double tolerance = 1e-10;
    int max_iter = 200;

    cavchar::fit::SolveOptions solve() const { return {max_iter, tolerance}; }
};

void add_solver_flags(CLI::App* cmd, CommonFitFlags& flags) {
    cmd->add_option("--tolerance", flags.tolerance, "relative cost-decrease tolerance");
    cmd->add_option("--max-iter", flags.max_iter, "maximum solver iterations");
}

cavchar::models::XYData expect_xy(const cavchar::io::ParsedCsv& parsed) {
    if (const auto* xy = std::get_if<cavchar::models::XYData>(&parsed.data)) return *xy;
    throw ParseError("input file does not hold point data");
}

double metadata_or_flag(const cavchar::io::ParsedCsv& parsed, const std::string& key,
                        double flag_value, const char* what) {
    if (flag_value > 0) return flag_value;
    if (const auto it = parsed.metadata.find(key); it != parsed.metadata.end()) return it->second;
    throw ParseError(std::string("missing ") + what + ": pass the flag or add '# " + key +
                     " = ...' to the csv");
}

int run_fit_s11(const std::string& path, bool refine, const CommonFitFlags& flags,
                const OutputOptions& out) {
    cavchar::resonance::FrequencyTrace trace;
    if (std::filesystem::path(path).extension() == ".s1p") {
        trace = cavchar::io::parse_touchstone(path);
    } else {
        const auto parsed = cavchar::io::parse_csv_trace(path);
        const auto* t = std::get_if<cavchar::resonance::FrequencyTrace>(&parsed.data);
        if (t == nullptr) throw ParseError(path + ": expected a frequency trace");
        trace = *t;
    }

    cavchar::resonance::ExtractionOptions options;
    options.refine = refine;
    options.solve = flags.solve();
    const auto result = cavchar::resonance::extract_resonance(trace, options);

    ordered_json doc;
    doc["kind"] = "s11_fit";
    ordered_json params;
    params["f_r_hz"] = result.params.f_r;
    params["q_loaded"] = result.params.q_loaded;
    params["q_int"] = result.params.q_int;
    params["q_ext_mag"] = result.params.q_ext_mag;
    params["coupling_phase_rad"] = result.params.coupling_phase;
    params["coupling"] = cavchar::resonance::to_string(result.coupling.label);
    params["coupling_ratio"] = result.coupling.ratio;
    params["env_delay_s"] = result.params.env_delay_s;
    params["env_amp"] = result.params.env_amp;
    params["env_phase_rad"] = result.params.env_phase;
    params["insufficient_span"] = result.env.insufficient_span;
    doc["params"] = params;
    doc["fit"] = fit_block(result.fit);
    doc["data"] = {{"x_label", "frequency_hz"},
                   {"y_label", "|S11|"},
                   {"x", array_block(trace.frequencies)},
                   {"y", array_block(trace.s11.abs())}};
    doc["curve"] = {{"x", array_block(trace.frequencies)},
                    {"y", array_block(cavchar::resonance::model_s11(result.params,
                                                                    trace.frequencies)
                                          .abs())}};
    emit_result(out, "S11 resonance extraction", doc, &result.fit);
    return exit_code_for_fit(result.fit);
}

int run_fit_tls_power(const std::string& path, double fr_flag, double temp_flag,
                      const CommonFitFlags& flags, const OutputOptions& out) {
    const auto parsed = cavchar::io::parse_csv_trace(path, cavchar::io::CsvSchema::QnPoints);
    const auto data = expect_xy(parsed);
    const double f_r = metadata_or_flag(parsed, "f_r_hz", fr_flag, "resonance frequency");
    const double t = metadata_or_flag(parsed, "temperature_k", temp_flag, "temperature");

    const auto result = cavchar::models::fit_tls_power(data, f_r, t, flags.solve());

    ordered_json doc;
    doc["kind"] = "tls_power_fit";
    ordered_json params;
    params["f_tls_loss"] = result.params.f_tls_loss;
    params["n_c"] = result.params.n_c;
    params["beta"] = result.params.beta;
    params["q_res"] = result.params.q_res;
    params["f_r_hz"] = f_r;
    params["temperature_k"] = t;
    params["q_single_photon"] =
        1.0 / cavchar::loss::eval_tls_power(result.params, {f_r, t, 1.0});
    doc["params"] = params;
    doc["fit"] = fit_block(result.fit);
    doc["data"] = {{"x_label", "n_bar"}, {"y_label", "q_int"},
                   {"x", array_block(data.x)}, {"y", array_block(data.y)}};
    cavchar::synth::Grid grid{std::max(data.x.minCoeff(), 1e-3), data.x.maxCoeff(), 200, true};
    Eigen::ArrayXd cx = grid.make(), cy(cx.size());
    for (Eigen::Index i = 0; i < cx.size(); ++i)
        cy(i) = 1.0 / cavchar::loss::eval_tls_power(result.params, {f_r, t, cx(i)});
    doc["curve"] = {{"x", array_block(cx)}, {"y", array_block(cy)}};
    emit_result(out, "power-dependent TLS fit", doc, &result.fit);
    return exit_code_for_fit(result.fit);
}

int run_fit_tls_temp(const std::string& path, double fr_flag, const CommonFitFlags& flags,
                     const OutputOptions& out) {
    const auto parsed = cavchar::io::parse_csv_trace(path, cavchar::io::CsvSchema::QtPoints);
    const auto data = expect_xy(parsed);
    const double f_r = metadata_or_flag(parsed, "f_r_hz", fr_flag, "resonance frequency");

    const auto result = cavchar::models::fit_tls_temp(data, f_r, flags.solve());

    ordered_json doc;
    doc["kind"] = "tls_temp_fit";
    ordered_json params;
    params["f_tls_loss"] = result.params.f_tls_loss;
    params["q_int0"] = result.params.q_int0;
    params["f_r_hz"] = f_r;
    doc["params"] = params;
    doc["fit"] = fit_block(result.fit);
    doc["data"] = {{"x_label", "temperature_k"}, {"y_label", "q_int"},
                   {"x", array_block(data.x)}, {"y", array_block(data.y)}};
    cavchar::synth::Grid grid{data.x.minCoeff(), data.x.maxCoeff(), 200, true};
    Eigen::ArrayXd cx = grid.make(), cy(cx.size());
    for (Eigen::Index i = 0; i < cx.size(); ++i)
        cy(i) = 1.0 / cavchar::loss::eval_tls_temp(result.params, {f_r, cx(i), 0.0});
    doc["curve"] = {{"x", array_block(cx)}, {"y", array_block(cy)}};
    emit_result(out, "temperature-dependent TLS fit", doc, &result.fit);
    return exit_code_for_fit(result.fit);
}

int run_fit_fshift(const std::string& path, double fr_flag, const CommonFitFlags& flags,
                   const OutputOptions& out) {
    const auto parsed = cavchar::io::parse_csv_trace(path, cavchar::io::CsvSchema::FtPoints);
    const auto data = expect_xy(parsed);
    const double f_r = metadata_or_flag(parsed, "f_r_hz", fr_flag, "resonance frequency");

    const auto result = cavchar::models::fit_freq_shift(data, f_r, flags.solve());
    const double t_min = cavchar::models::freq_shift_minimum_temperature(
        f_r, std::max(data.x.minCoeff(), 1e-3), data.x.maxCoeff());

    ordered_json doc;
    doc["kind"] = "freq_shift_fit";
    ordered_json params;
    params["f_tls_loss"] = result.f_tls_loss;
    params["f_r_hz"] = f_r;
    params["shift_minimum_temperature_k"] = t_min;
    doc["params"] = params;
    doc["fit"] = fit_block(result.fit);
    doc["data"] = {{"x_label", "temperature_k"}, {"y_label", "dff"},
                   {"x", array_block(data.x)}, {"y", array_block(data.y)}};
    cavchar::synth::Grid grid{data.x.minCoeff(), data.x.maxCoeff(), 200, true};
    Eigen::ArrayXd cx = grid.make(), cy(cx.size());
    for (Eigen::Index i = 0; i < cx.size(); ++i)
        cy(i) = cavchar::loss::eval_freq_shift(result.f_tls_loss, {f_r, cx(i), 0.0});
    doc["curve"] = {{"x", array_block(cx)}, {"y", array_block(cy)}};
    emit_result(out, "TLS frequency-shift fit", doc, &result.fit);
    return exit_code_for_fit(result.fit);
}

int run_fit_ringdown(const std::string& path, double q_ext, double f_r, bool no_offset,
                     const CommonFitFlags& flags, const OutputOptions& out) {
    const auto parsed = cavchar::io::parse_csv_trace(path, cavchar::io::CsvSchema::TimeAmplitude);
    const auto* trace = std::get_if<cavchar::ringdown::TimeTrace>(&parsed.data);
    if (trace == nullptr) throw ParseError(path + ": expected a time trace");

    const auto result = cavchar::ringdown::fit_ringdown(*trace, flags.solve(), !no_offset);
    const auto budget = cavchar::ringdown::build_lifetime_budget(result.tau_tot, q_ext, f_r);

    ordered_json doc;
    doc["kind"] = "ringdown_fit";
    ordered_json params;
    params["tau_tot_s"] = budget.tau_tot;
    params["tau_ext_s"] = budget.tau_ext;
    params["tau_int_s"] = budget.tau_int;
    params["q_tot"] = budget.q_tot;
    params["q_ext"] = budget.q_ext;
    params["q_int"] = budget.q_int;
    params["f_r_hz"] = budget.f_r;
    params["e0"] = result.e0;
    params["offset"] = result.offset;
    doc["params"] = params;
    doc["fit"] = fit_block(result.fit);
    const Eigen::ArrayXd energy = trace->kind == cavchar::ringdown::TimeTrace::Kind::Amplitude
                                      ? trace->values.square().eval()
                                      : trace->values;
    doc["data"] = {{"x_label", "time_s"}, {"y_label", "energy"},
                   {"x", array_block(trace->times)}, {"y", array_block(energy)}};
    Eigen::ArrayXd cy(trace->times.size());
    for (Eigen::Index i = 0; i < trace->times.size(); ++i)
        cy(i) = result.e0 * std::exp(-trace->times(i) / result.tau_tot) + result.offset;
    doc["curve"] = {{"x", array_block(trace->times)}, {"y", array_block(cy)}};
    emit_result(out, "ring-down lifetime budget", doc, &result.fit);
    return exit_code_for_fit(result.fit);
}

int run_photon_cal(double p_in, double n_bar, double f_r, double q_int, double q_ext,
                   double q_loaded, const OutputOptions& out) {
    const auto& cfg = cavchar::config::Config::load();
    if (q_loaded <= 0) {
        if (q_int <= 0 || q_ext <= 0)
            throw ParseError("photon-cal: pass --qloaded, or both --qint and --qext");
        q_loaded = 1.0 / (1.0 / q_int + 1.0 / q_ext);
    }
    if (q_ext <= 0) throw ParseError("photon-cal: --qext is required");

    cavchar::ringdown::PhotonCalibration cal;
    cal.f_r_hz = f_r;
    cal.q_loaded = q_loaded;
    cal.q_ext = q_ext;
    cal.systematic_factor = cfg.photon_systematic_factor;

    ordered_json doc;
    doc["kind"] = "photon_calibration";
    ordered_json params;
    params["f_r_hz"] = f_r;
    params["q_loaded"] = q_loaded;
    params["q_ext"] = q_ext;
    params["formula"] = "n_bar = 4 Q_l^2 P_in / (hbar w_r^2 Q_ext), on-resonance reflection";
    params["systematic_factor"] = cal.systematic_factor;
    if (p_in >= 0) {
        cal.p_in_w = p_in;
        params["p_in_w"] = p_in;
        params["n_bar"] = cavchar::ringdown::photon_number(cal);
    } else if (n_bar >= 0) {
        // Invert for the drive power that sustains n_bar photons.
        cal.p_in_w = 1.0;
        const double n_per_watt = cavchar::ringdown::photon_number(cal);
        params["n_bar"] = n_bar;
        params["p_in_w"] = n_bar / n_per_watt;
    } else {
        throw ParseError("photon-cal: pass --pin or --nbar");
    }
    doc["params"] = params;
    emit_result(out, "photon-number calibration", doc, nullptr);
    return 0;
}

int run_xps_fit(const std::string& path, std::vector<std::string> species_names,
                const std::string& background, const CommonFitFlags& flags,
                const OutputOptions& out) {
    const auto parsed = cavchar::io::parse_csv_trace(path, cavchar::io::CsvSchema::Xps);
    const auto* spectrum = std::get_if<cavchar::xps::Spectrum>(&parsed.data);
    if (spectrum == nullptr) throw ParseError(path + ": expected an xps spectrum");

    if (species_names.empty())
        species_names = {"Nb2O5", "NbO2", "NbO", "NbOx", "Nb-metal"};
    std::vector<cavchar::xps::NbSpecies> species;
    species.reserve(species_names.size());
    for (const auto& name : species_names)
        species.push_back(cavchar::xps::species_from_string(name));

    cavchar::xps::XpsFitOptions options;
    options.references = cavchar::config::Config::load().xps;
    options.background = background == "shirley" ? cavchar::xps::BackgroundKind::Shirley
                                                 : cavchar::xps::BackgroundKind::Linear;
    options.solve = flags.solve();

    const auto result = cavchar::xps::fit_nb3d(*spectrum, species, options);
    const auto comp = cavchar::xps::composition(result.components);

    ordered_json doc;
    doc["kind"] = "xps_fit";
    ordered_json params;
    params["alignment_shift_ev"] = result.alignment_shift_ev;
    params["background_intercept"] = result.background_intercept;
    params["background_slope_per_ev"] = result.background_slope;
    ordered_json comps = ordered_json::array();
    for (const auto& c : result.components) {
        ordered_json cj;
        cj["species"] = cavchar::xps::to_string(c.species);
        cj["position_5_2_ev"] = c.position_5_2;
        cj["splitting_ev"] = c.splitting;
        cj["area_total"] = c.area_total;
        cj["width_ev"] = c.width;
        cj["mixing"] = c.mixing;
        cj["asymmetry"] = c.asymmetry;
        comps.push_back(cj);
    }
    params["components"] = comps;
    ordered_json fracs;
    for (const auto& entry : comp.entries)
        fracs[cavchar::xps::to_string(entry.species)] = entry.fraction_pct;
    params["composition_pct"] = fracs;
    doc["params"] = params;
    doc["fit"] = fit_block(result.fit);
    doc["data"] = {{"x_label", "binding_energy_ev"}, {"y_label", "counts"},
                   {"x", array_block(spectrum->binding_energy_ev)},
                   {"y", array_block(spectrum->counts)}};
    Eigen::ArrayXd cy = result.background;
    for (const auto& c : result.components) {
        cavchar::xps::DoubletComponent shifted = c;
        shifted.position_5_2 -= result.alignment_shift_ev;  // back to the data axis
        cy += cavchar::xps::model_doublet(shifted, spectrum->binding_energy_ev);
    }
    doc["curve"] = {{"x", array_block(spectrum->binding_energy_ev)}, {"y", array_block(cy)}};
    doc["background"] = {{"x", array_block(spectrum->binding_energy_ev)},
                         {"y", array_block(result.background)}};
    emit_result(out, "Nb 3d deconvolution", doc, &result.fit);
    return exit_code_for_fit(result.fit);
}

int run_etch_depth(double dw_g, double area_cm2, double density_g_cm3,
                   const OutputOptions& out) {
    const auto& cfg = cavchar::config::Config::load();
    const double density = density_g_cm3 > 0 ? density_g_cm3 * 1000.0 : cfg.niobium_density_kg_m3;
    const double depth =
        cavchar::campaign::removal_depth_m(dw_g * 1e-3, area_cm2 * 1e-4, density);

    ordered_json doc;
    doc["kind"] = "etch_depth";
    ordered_json params;
    params["weight_loss_g"] = dw_g;
    params["surface_area_cm2"] = area_cm2;
    params["density_kg_m3"] = density;
    params["removal_depth_um"] = depth * 1e6;
    doc["params"] = params;
    emit_result(out, "uniform-etch removal depth", doc, nullptr);
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& out_dir, long long seed_override,
              const OutputOptions& out) {
    auto spec = cavchar::synth::load_synth_spec(spec_path);
    if (seed_override >= 0) spec["seed"] = static_cast<std::uint64_t>(seed_override);
    const auto result = cavchar::synth::generate_synthetic(
        spec, out_dir.empty() ? std::filesystem::path("synth-out") : std::filesystem::path(out_dir));

    ordered_json doc;
    doc["kind"] = "synth";
    doc["params"] = {{"data_path", result.data_path.string()},
                     {"truth_path", result.truth_path.string()}};
    emit_result(out, "synthetic dataset", doc, nullptr);
    return 0;
}

int run_report(const std::string& campaign_path, double g_ohm, const OutputOptions& out) {
    const auto record = cavchar::campaign::load_campaign(campaign_path);
    const double g = g_ohm > 0 ? g_ohm : cavchar::config::Config::load().g_factor_ohm;
    const auto report = cavchar::report::build_report(record, {g});

    if (wants_json(out)) {
        emit(out, cavchar::report::render_json(report).dump(2) + "\n");
    } else if (out.format == "csv") {
        emit(out, cavchar::report::render_csv(report));
    } else {
        emit(out, cavchar::report::render_text(report));
    }
    return 0;
}

int run_plot(const std::string& result_path, const OutputOptions& out) {
    std::ifstream in(result_path);
    if (!in) throw ParseError("cannot open '" + result_path + "'");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(result_path + ": " + std::string(e.what()));
    }
    if (!doc.contains("kind") || !doc.contains("data"))
        throw ParseError(result_path + ": not a cavchar result document");
    const std::string kind = doc.at("kind").get<std::string>();

    cavchar::svg::PlotSpec plot;
    plot.title = kind;
    plot.x_label = doc.at("data").value("x_label", std::string("x"));
    plot.y_label = doc.at("data").value("y_label", std::string("y"));
    plot.log_x = kind == "tls_power_fit" || kind == "tls_temp_fit" || kind == "freq_shift_fit";
    plot.log_y = kind == "tls_power_fit" || kind == "tls_temp_fit" || kind == "ringdown_fit";

    cavchar::svg::Series data_series;
    data_series.x = array_from(doc.at("data").at("x"));
    data_series.y = array_from(doc.at("data").at("y"));
    data_series.scatter = true;
    data_series.label = "data";
    plot.series.push_back(std::move(data_series));
    if (doc.contains("curve")) {
        cavchar::svg::Series curve;
        curve.x = array_from(doc.at("curve").at("x"));
        curve.y = array_from(doc.at("curve").at("y"));
        curve.label = "fit";
        plot.series.push_back(std::move(curve));
    }
    if (doc.contains("background")) {
        cavchar::svg::Series bg;
        bg.x = array_from(doc.at("background").at("x"));
        bg.y = array_from(doc.at("background").at("y"));
        bg.label = "background";
        plot.series.push_back(std::move(bg));
    }

    OutputOptions svg_out = out;
    if (svg_out.out_path.empty())
        svg_out.out_path = std::filesystem::path(result_path).stem().string() + ".svg";
    emit(svg_out, cavchar::svg::render_svg(plot));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"characterization toolkit for high-Q superconducting microwave cavities"};
    app.require_subcommand(1);

    OutputOptions out;
    CommonFitFlags flags;

    // fit-s11
    std::string s11_path;
    bool s11_refine = false;
    auto* c_s11 = app.add_subcommand("fit-s11", "extract f_r / Q_int / Q_ext from an S11 trace");
    c_s11->add_option("trace", s11_path, "Touchstone .s1p or freq-complex/magphase csv")
        ->required();
    c_s11->add_flag("--refine", s11_refine, "final full complex least-squares refine");
    add_solver_flags(c_s11, flags);
    add_output_flags(c_s11, out);

    // fit-tls-power
    std::string qn_path;
    double fr_flag = 0.0, temp_flag = 0.0;
    auto* c_power = app.add_subcommand("fit-tls-power", "fit Q_int vs photon number");
    c_power->add_option("csv", qn_path, "qn-points csv")->required();
    c_power->add_option("--fr", fr_flag, "resonance frequency [Hz]");
    c_power->add_option("--temperature", temp_flag, "base temperature [K]");
    add_solver_flags(c_power, flags);
    add_output_flags(c_power, out);

    // fit-tls-temp
    std::string qt_path;
    auto* c_temp = app.add_subcommand("fit-tls-temp", "fit Q_int vs temperature");
    c_temp->add_option("csv", qt_path, "qt-points csv")->required();
    c_temp->add_option("--fr", fr_flag, "resonance frequency [Hz]");
    add_solver_flags(c_temp, flags);
    add_output_flags(c_temp, out);

    // fit-fshift
    std::string ft_path;
    auto* c_fshift = app.add_subcommand("fit-fshift", "fit the TLS frequency shift vs temperature");
    c_fshift->add_option("csv", ft_path, "ft-points csv")->required();
    c_fshift->add_option("--fr", fr_flag, "resonance frequency [Hz]");
    add_solver_flags(c_fshift, flags);
    add_output_flags(c_fshift, out);

    // fit-ringdown
    std::string rd_path;
    double rd_qext = 0.0, rd_fr = 0.0;
    bool rd_no_offset = false;
    auto* c_rd = app.add_subcommand("fit-ringdown", "fit tau_tot and build the lifetime budget");
    c_rd->add_option("csv", rd_path, "time-amplitude csv")->required();
    c_rd->add_option("--qext", rd_qext, "external quality factor")->required();
    c_rd->add_option("--fr", rd_fr, "resonance frequency [Hz]")->required();
    c_rd->add_flag("--no-offset", rd_no_offset, "pin the noise-floor offset to zero");
    add_solver_flags(c_rd, flags);
    add_output_flags(c_rd, out);

    // photon-cal
    double pc_pin = -1.0, pc_nbar = -1.0, pc_fr = 0.0, pc_qint = 0.0, pc_qext = 0.0,
           pc_qloaded = 0.0;
    auto* c_pc = app.add_subcommand("photon-cal", "steady-state photon-number calibration");
    c_pc->add_option("--pin", pc_pin, "drive power at the cavity plane [W]");
    c_pc->add_option("--nbar", pc_nbar, "target photon number (inverts for P_in)");
    c_pc->add_option("--fr", pc_fr, "resonance frequency [Hz]")->required();
    c_pc->add_option("--qint", pc_qint, "internal quality factor");
    c_pc->add_option("--qext", pc_qext, "external quality factor");
    c_pc->add_option("--qloaded", pc_qloaded, "loaded quality factor (overrides --qint)");
    add_output_flags(c_pc, out);

    // xps-fit
    std::string xps_path, xps_background = "linear";
    std::vector<std::string> xps_species;
    auto* c_xps = app.add_subcommand("xps-fit", "constrained Nb 3d doublet deconvolution");
    c_xps->add_option("csv", xps_path, "xps csv (binding_energy_ev,counts)")->required();
    c_xps->add_option("--species", xps_species, "species subset (default: all five)");
    c_xps->add_option("--background", xps_background, "background model")
        ->check(CLI::IsMember({"linear", "shirley"}));
    add_solver_flags(c_xps, flags);
    add_output_flags(c_xps, out);

    // etch-depth
    double ed_dw = 0.0, ed_area = 0.0, ed_density = 0.0;
    auto* c_etch = app.add_subcommand("etch-depth", "removal depth from weight loss");
    c_etch->add_option("--dw", ed_dw, "weight loss [g]")->required();
    c_etch->add_option("--area", ed_area, "surface area [cm^2]")->required();
    c_etch->add_option("--density", ed_density, "material density [g/cm^3]");
    add_output_flags(c_etch, out);

    // synth
    std::string synth_spec, synth_out;
    long long synth_seed = -1;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset with truth sidecar");
    c_synth->add_option("spec", synth_spec, "synth spec json")->required();
    c_synth->add_option("--out", synth_out, "output directory (default synth-out)");
    c_synth->add_option("--seed", synth_seed, "override the spec seed");
    c_synth->add_option("--format", out.format, "output format")
        ->check(CLI::IsMember({"text", "json", "json-like-structured", "csv"}));

    // report
    std::string report_path;
    double report_g = 0.0;
    auto* c_report = app.add_subcommand("report", "regenerate the per-cooldown summary table");
    c_report->add_option("campaign", report_path, "campaign json document")->required();
    c_report->add_option("--g-factor", report_g, "geometric factor G [ohm]");
    add_output_flags(c_report, out);

    // plot
    std::string plot_path;
    auto* c_plot = app.add_subcommand("plot", "render a fit result document as SVG");
    c_plot->add_option("result", plot_path, "result json from a fit subcommand")->required();
    add_output_flags(c_plot, out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : ParseError::exit_code;
    }

    try {
        if (c_s11->parsed()) return run_fit_s11(s11_path, s11_refine, flags, out);
        if (c_power->parsed()) return run_fit_tls_power(qn_path, fr_flag, temp_flag, flags, out);
        if (c_temp->parsed()) return run_fit_tls_temp(qt_path, fr_flag, flags, out);
        if (c_fshift->parsed()) return run_fit_fshift(ft_path, fr_flag, flags, out);
        if (c_rd->parsed())
            return run_fit_ringdown(rd_path, rd_qext, rd_fr, rd_no_offset, flags, out);
        if (c_pc->parsed())
            return run_photon_cal(pc_pin, pc_nbar, pc_fr, pc_qint, pc_qext, pc_qloaded, out);
        if (c_xps->parsed()) return run_xps_fit(xps_path, xps_species, xps_background, flags, out);
        if (c_etch->parsed()) return run_etch_depth(ed_dw, ed_area, ed_density, out);
        if (c_synth->parsed()) return run_synth(synth_spec, synth_out, synth_seed, out);
        if (c_report->parsed()) return run_report(report_path, report_g, out);
        if (c_plot->parsed()) return run_plot(plot_path, out);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ParseError::exit_code;
    } catch (const FitError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return FitError::exit_code;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return DomainError::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
