#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cavchar/fit.hpp"
#include "cavchar/loss_models.hpp"

// Named-model fit drivers: each wires a loss-model expression into a
// FitProblem with the documented bounds and deterministic initial-guess
// heuristics.  Q-vs-n and Q-vs-T fits run on log(Q) residuals since the data
// spans decades.
namespace cavchar::models {

struct XYData {
    Eigen::ArrayXd x;
    Eigen::ArrayXd y;
    Eigen::ArrayXd sigma;  // optional per-point sigma of y; empty = unweighted
};

enum class ModelId { TlsPower, TlsTemp, FreqShift, Ringdown, S11 };

ModelId model_id_from_string(const std::string& name);
std::string to_string(ModelId id);

struct ModelContext {
    double f_r_hz = 0.0;
    double temperature_k = 0.0;
    bool values_are_power = false;  // ringdown only
};

struct TlsPowerFit {
    loss::TlsPowerParams<double> params;
    fit::FitResult fit;
};

struct TlsTempFit {
    loss::TlsTempParams<double> params;
    fit::FitResult fit;
};

struct FreqShiftFit {
    double f_tls_loss = 0.0;
    fit::FitResult fit;
};

// data: x = average photon number, y = Q_int measured at fixed (f_r, T).
TlsPowerFit fit_tls_power(const XYData& data, double f_r_hz, double temperature_k,
                          const fit::SolveOptions& options = {});

// data: x = temperature (K), y = Q_int at fixed f_r.
TlsTempFit fit_tls_temp(const XYData& data, double f_r_hz, const fit::SolveOptions& options = {});

// data: x = temperature (K), y = delta f / f_r at fixed f_r.
FreqShiftFit fit_freq_shift(const XYData& data, double f_r_hz,
                            const fit::SolveOptions& options = {});

struct NamedModelFit {
    ModelId model;
    std::vector<std::string> parameter_names;
    Eigen::VectorXd parameters;
    fit::FitResult fit;
};

// Generic dispatch over the curve models (tls_power, tls_temp, freq_shift,
// ringdown).  S11 extraction needs a complex trace; see resonance.hpp.
NamedModelFit fit_named_model(ModelId id, const XYData& data, const ModelContext& ctx,
                              const fit::SolveOptions& options = {});

// Locate the single minimum of the frequency-shift curve in T by golden
// section on (t_low, t_high).
double freq_shift_minimum_temperature(double f_r_hz, double t_low_k = 0.01,
                                      double t_high_k = 1.0);

} // namespace cavchar::models
