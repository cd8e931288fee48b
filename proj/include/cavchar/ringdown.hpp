#pragma once

#include <optional>

#include <Eigen/Core>

#include "cavchar/fit.hpp"

namespace cavchar::ringdown {

struct TimeTrace {
    enum class Kind { Amplitude, Power };

    Eigen::ArrayXd times;   // s, strictly increasing
    Eigen::ArrayXd values;  // demodulated magnitude or power
    Kind kind = Kind::Amplitude;
    std::optional<double> chain_gain_db;

    void validate() const;
};

struct RingdownFit {
    double tau_tot = 0.0;   // s
    double e0 = 0.0;        // initial energy amplitude
    double offset = 0.0;    // detector noise floor
    fit::FitResult fit;     // parameters = (e0, tau_tot, offset)
};

// Fits E(t) = E0 exp(-t/tau) + offset on the energy scale; amplitude traces
// are squared first.  The offset can be pinned to zero.
RingdownFit fit_ringdown(const TimeTrace& trace, const fit::SolveOptions& options = {},
                         bool fit_offset = true);

struct LifetimeBudget {
    double tau_tot = 0.0, tau_ext = 0.0, tau_int = 0.0;  // s
    double q_tot = 0.0, q_ext = 0.0, q_int = 0.0;
    double f_r = 0.0;  // Hz
};

LifetimeBudget build_lifetime_budget(double tau_tot_s, double q_ext, double f_r_hz);

struct PhotonCalibration {
    double p_in_w = 0.0;   // drive power at the cavity reference plane
    double f_r_hz = 0.0;
    double q_loaded = 0.0;
    double q_ext = 0.0;
    // The absolute chain gain is rarely known better than this; carried as a
    // declared multiplicative systematic on n_bar.
    double systematic_factor = 2.0;
};

// Steady-state on-resonance reflection drive:
//   n_bar = 4 Q_l^2 P_in / (hbar w_r^2 Q_ext),  w_r = 2 pi f_r.
double photon_number(const PhotonCalibration& cal);

} // namespace cavchar::ringdown
