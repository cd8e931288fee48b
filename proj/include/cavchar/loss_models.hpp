#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Core>

#include "cavchar/constants.hpp"
#include "cavchar/errors.hpp"
#include "cavchar/special.hpp"

// Closed-form loss models for TLS-limited superconducting cavities and the
// Q / R_s / tau conversions around them.  Everything here is a pure function
// of value inputs; evaluators are templated on the scalar so tests can
// instantiate them in extended precision.
namespace cavchar::loss {

template <typename Scalar = double>
struct TlsPowerParams {
    Scalar f_tls_loss;  // F * delta0_TLS, dimensionless
    Scalar n_c;         // critical photon number
    Scalar beta;        // saturation exponent, in (0, 2]
    Scalar q_res;       // residual quality factor

    void validate() const {
        require_domain(f_tls_loss >= Scalar(0), "TlsPowerParams: f_tls_loss must be >= 0");
        require_domain(n_c > Scalar(0), "TlsPowerParams: n_c must be > 0");
        require_domain(beta > Scalar(0) && beta <= Scalar(2),
                       "TlsPowerParams: beta must be in (0, 2]");
        require_domain(q_res > Scalar(0), "TlsPowerParams: q_res must be > 0");
    }
};

template <typename Scalar = double>
struct TlsTempParams {
    Scalar f_tls_loss;
    Scalar q_int0;  // temperature-independent residual quality factor

    void validate() const {
        require_domain(f_tls_loss >= Scalar(0), "TlsTempParams: f_tls_loss must be >= 0");
        require_domain(q_int0 > Scalar(0), "TlsTempParams: q_int0 must be > 0");
    }
};

template <typename Scalar = double>
struct ModeParams {
    Scalar f_r;          // Hz
    Scalar temperature;  // K
    Scalar n_bar = Scalar(0);

    void validate() const {
        require_domain(f_r > Scalar(0), "ModeParams: f_r must be > 0");
        require_domain(temperature > Scalar(0), "ModeParams: temperature must be > 0");
        require_domain(n_bar >= Scalar(0), "ModeParams: n_bar must be >= 0");
    }
};

struct ParticipationInputs {
    double s_e;    // surface electric participation ratio, 1/m
    double t_ox;   // oxide thickness, m
    double eps_r;  // oxide relative permittivity

    void validate() const {
        require_domain(s_e > 0 && t_ox > 0 && eps_r > 0,
                       "ParticipationInputs: all fields must be > 0");
    }
};

struct GeometricFactor {
    double ohms;

    void validate() const { require_domain(ohms > 0, "GeometricFactor: G must be > 0"); }
};

// tanh(h f / 2 k T), clamped to 1 once the argument exceeds 20 (the error
// there is below 1e-17 and the clamp avoids exp overflow at micro-kelvin T).
template <typename Scalar>
Scalar thermal_tanh(Scalar f_r, Scalar temperature) {
    const Scalar arg = Scalar(constants::planck_h) * f_r /
                       (Scalar(2) * Scalar(constants::boltzmann_k) * temperature);
    if (arg > Scalar(20)) return Scalar(1);
    return std::tanh(arg);
}

// 1 / Q_int(n_bar): power-dependent TLS loss plus residual loss.
template <typename Scalar>
Scalar eval_tls_power(const TlsPowerParams<Scalar>& p, const ModeParams<Scalar>& m) {
    p.validate();
    m.validate();
    const Scalar t = thermal_tanh(m.f_r, m.temperature);
    const Scalar ratio = std::pow(m.n_bar / p.n_c, p.beta);
    const Scalar s = std::sqrt(Scalar(1) + ratio);
    return p.f_tls_loss * t / s + Scalar(1) / p.q_res;
}

// Partials of eval_tls_power with respect to (f_tls_loss, n_c, beta, q_res).
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> tls_power_partials(const TlsPowerParams<Scalar>& p,
                                               const ModeParams<Scalar>& m) {
    p.validate();
    m.validate();
    const Scalar t = thermal_tanh(m.f_r, m.temperature);
    const Scalar ratio = std::pow(m.n_bar / p.n_c, p.beta);
    const Scalar s = std::sqrt(Scalar(1) + ratio);
    const Scalar s3 = s * s * s;

    Eigen::Matrix<Scalar, 4, 1> d;
    d(0) = t / s;
    d(1) = p.f_tls_loss * t * p.beta * ratio / (Scalar(2) * s3 * p.n_c);
    // d ratio / d beta = ratio * ln(n_bar / n_c); the n_bar -> 0 limit is 0.
    d(2) = m.n_bar > Scalar(0)
               ? -p.f_tls_loss * t * ratio * std::log(m.n_bar / p.n_c) / (Scalar(2) * s3)
               : Scalar(0);
    d(3) = -Scalar(1) / (p.q_res * p.q_res);
    return d;
}

// 1 / Q_int(T): temperature-dependent TLS loss plus residual loss.
template <typename Scalar>
Scalar eval_tls_temp(const TlsTempParams<Scalar>& p, const ModeParams<Scalar>& m) {
    p.validate();
    m.validate();
    return p.f_tls_loss * thermal_tanh(m.f_r, m.temperature) + Scalar(1) / p.q_int0;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> tls_temp_partials(const TlsTempParams<Scalar>& p,
                                              const ModeParams<Scalar>& m) {
    p.validate();
    m.validate();
    Eigen::Matrix<Scalar, 2, 1> d;
    d(0) = thermal_tanh(m.f_r, m.temperature);
    d(1) = -Scalar(1) / (p.q_int0 * p.q_int0);
    return d;
}

// The digamma bracket of the TLS frequency-shift law:
//   Re psi(1/2 - i xi / 2 pi) - log(xi / 2 pi),   xi = h f / k T.
template <typename Scalar>
Scalar freq_shift_bracket(const ModeParams<Scalar>& m) {
    m.validate();
    const Scalar xi = Scalar(constants::planck_h) * m.f_r /
                      (Scalar(constants::boltzmann_k) * m.temperature);
    const Scalar y = xi / (Scalar(2) * Scalar(EIGEN_PI));
    const std::complex<Scalar> z(Scalar(0.5), -y);
    return special::digamma(z).real() - std::log(y);
}

// delta f / f_r; linear in f_tls_loss.
template <typename Scalar>
Scalar eval_freq_shift(Scalar f_tls_loss, const ModeParams<Scalar>& m) {
    require_domain(f_tls_loss >= Scalar(0), "eval_freq_shift: f_tls_loss must be >= 0");
    return f_tls_loss / Scalar(EIGEN_PI) * freq_shift_bracket(m);
}

template <typename Scalar>
Scalar freq_shift_partial(const ModeParams<Scalar>& m) {
    return freq_shift_bracket(m) / Scalar(EIGEN_PI);
}

// F = t_ox * S_e / eps_r.  t_ox = 0 is allowed and gives F = 0.
inline double participation_factor(const ParticipationInputs& in) {
    require_domain(in.s_e > 0 && in.eps_r > 0 && in.t_ox >= 0,
                   "participation_factor: s_e, eps_r must be > 0 and t_ox >= 0");
    return in.t_ox * in.s_e / in.eps_r;
}

inline double q_to_surface_resistance(double q_int, const GeometricFactor& g) {
    g.validate();
    require_domain(q_int > 0, "q_to_surface_resistance: Q must be > 0");
    return g.ohms / q_int;
}

inline double surface_resistance_to_q(double r_s, const GeometricFactor& g) {
    g.validate();
    require_domain(r_s > 0, "surface_resistance_to_q: R_s must be > 0");
    return g.ohms / r_s;
}

inline double q_to_tau(double q, double f_r) {
    require_domain(q > 0, "q_to_tau: Q must be > 0");
    require_domain(f_r > 0, "q_to_tau: f_r must be > 0");
    return q / (2.0 * EIGEN_PI * f_r);
}

inline double tau_to_q(double tau, double f_r) {
    require_domain(tau > 0, "tau_to_q: tau must be > 0");
    require_domain(f_r > 0, "tau_to_q: f_r must be > 0");
    return 2.0 * EIGEN_PI * f_r * tau;
}

// tau_int from 1/tau_tot = 1/tau_int + 1/tau_ext.  tau_ext = +inf is a valid
// no-external-loss input and returns tau_tot.
inline double tau_int_from_total(double tau_tot, double tau_ext) {
    require_domain(tau_tot > 0, "tau_int_from_total: tau_tot must be > 0");
    require_domain(tau_ext > tau_tot,
                   "tau_int_from_total: tau_ext must exceed tau_tot (total decay cannot be "
                   "slower than the external channel alone)");
    if (std::isinf(tau_ext)) return tau_tot;
    return 1.0 / (1.0 / tau_tot - 1.0 / tau_ext);
}

inline double tau_total_from_parts(double tau_int, double tau_ext) {
    require_domain(tau_int > 0 && tau_ext > 0, "tau_total_from_parts: lifetimes must be > 0");
    return 1.0 / (1.0 / tau_int + 1.0 / tau_ext);
}

} // namespace cavchar::loss
