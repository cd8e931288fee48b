#pragma once

#include <complex>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "cavchar/fit.hpp"

// Single-port reflection resonance extraction: environment removal, algebraic
// circle fit, phase-vs-frequency fit, impedance-mismatch geometry, optional
// full complex refine.
namespace cavchar::resonance {

struct FrequencyTrace {
    Eigen::ArrayXd frequencies;  // Hz, strictly increasing
    Eigen::ArrayXcd s11;
    std::optional<double> drive_power_w;
    std::optional<double> temperature_k;

    void validate(Eigen::Index min_points = 16) const;
};

struct ResonanceParams {
    double f_r = 0.0;            // Hz
    double q_loaded = 0.0;
    double q_ext_mag = 0.0;      // |Q_ext|
    double coupling_phase = 0.0; // impedance-mismatch angle, rad
    double q_int = 0.0;
    double env_delay_s = 0.0;
    double env_amp = 1.0;
    double env_phase = 0.0;

    void validate() const;  // checks 1/Q_l = 1/Q_int + cos(phi)/|Q_ext| and Q > 0
};

// Builds a consistent parameter set from the internal/external description.
ResonanceParams resonance_from_q(double f_r, double q_int, double q_ext_mag,
                                 double coupling_phase = 0.0, double env_delay_s = 0.0,
                                 double env_amp = 1.0, double env_phase = 0.0);

std::complex<double> model_s11(const ResonanceParams& p, double f_hz);
Eigen::ArrayXcd model_s11(const ResonanceParams& p, const Eigen::ArrayXd& f_hz);

enum class CouplingLabel { Undercoupled, Critical, Overcoupled };

struct CouplingRegime {
    CouplingLabel label;
    double ratio;  // Q_ext / Q_int
};

// < 1 overcoupled, within 5 % critical, > 1 undercoupled.
CouplingRegime classify_coupling(const ResonanceParams& p);
std::string to_string(CouplingLabel label);

struct EnvironmentEstimate {
    double delay_s = 0.0;
    double amplitude = 1.0;
    double phase = 0.0;
    bool resonance_found = false;
    double f_r_rough = 0.0;      // Hz, dip position when found
    double fwhm_rough = 0.0;     // Hz
    bool insufficient_span = false;  // wings jointly cover < 2 linewidths
    double wing_linewidths = 0.0;
};

struct NormalizedTrace {
    FrequencyTrace trace;  // environment divided out; off-resonant S11 -> 1+0i
    EnvironmentEstimate env;
};

NormalizedTrace remove_environment(const FrequencyTrace& t);

struct Circle {
    std::complex<double> center;
    double radius;
};

// Taubin algebraic circle fit; exact on noise-free circles.
Circle circle_fit(const Eigen::ArrayXcd& points);

struct ExtractionOptions {
    bool refine = true;  // final full complex least squares on the raw trace
    fit::SolveOptions solve;
};

struct ExtractionResult {
    ResonanceParams params;
    CouplingRegime coupling;
    fit::FitResult fit;  // refine fit when enabled, else the phase fit
    EnvironmentEstimate env;
};

ExtractionResult extract_resonance(const FrequencyTrace& t, const ExtractionOptions& options = {});

} // namespace cavchar::resonance
