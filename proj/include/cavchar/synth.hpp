#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "cavchar/models.hpp"
#include "cavchar/resonance.hpp"
#include "cavchar/ringdown.hpp"
#include "cavchar/xps.hpp"

// Deterministic synthetic datasets with truth sidecars: the oracle side of
// every round-trip test.  Noise is keyed by (seed, point index), so equal
// seeds are byte-reproducible and subsets keep their point values.
namespace cavchar::synth {

struct Grid {
    double min = 0.0;
    double max = 0.0;
    int count = 0;
    bool log = false;

    Eigen::ArrayXd make() const;
};

models::XYData tls_power_points(const loss::TlsPowerParams<double>& truth, double f_r_hz,
                                double temperature_k, const Grid& n_bar, double sigma_rel,
                                std::uint64_t seed);

models::XYData tls_temp_points(const loss::TlsTempParams<double>& truth, double f_r_hz,
                               const Grid& temperature, double sigma_rel, std::uint64_t seed);

// Additive noise scaled to the largest |delta f / f| on the grid; the shift
// crosses zero, so relative noise is ill-defined pointwise.
models::XYData freq_shift_points(double f_tls_loss, double f_r_hz, const Grid& temperature,
                                 double sigma_rel, std::uint64_t seed);

ringdown::TimeTrace ringdown_trace(double tau_tot_s, double e0, double offset, const Grid& time,
                                   double sigma_rel, std::uint64_t seed,
                                   ringdown::TimeTrace::Kind kind);

// Complex additive noise with sigma = env_amp * 10^(-snr_db/20) per
// quadrature; snr_db = +inf gives the noise-free trace.
resonance::FrequencyTrace s11_trace(const resonance::ResonanceParams& truth,
                                    double span_linewidths, int count, double snr_db,
                                    std::uint64_t seed);

xps::Spectrum xps_spectrum(const std::vector<xps::DoubletComponent>& truth,
                           double background_intercept, double background_slope,
                           const Grid& energy, double sigma_rel, std::uint64_t seed);

// File-driven generation: a JSON spec names the model, truth parameters,
// axis, noise, and seed; outputs land in `out_dir` as data.csv (data.s1p for
// s11) plus truth.json.
struct SynthOutput {
    std::filesystem::path data_path;
    std::filesystem::path truth_path;
};

nlohmann::ordered_json load_synth_spec(const std::filesystem::path& spec_path);
SynthOutput generate_synthetic(const nlohmann::ordered_json& spec,
                               const std::filesystem::path& out_dir);

} // namespace cavchar::synth
