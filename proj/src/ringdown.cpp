#include "cavchar/ringdown.hpp"

#include <cmath>

#include "cavchar/constants.hpp"
#include "cavchar/loss_models.hpp"

namespace cavchar::ringdown {

void TimeTrace::validate() const {
    require_domain(times.size() == values.size() && times.size() >= 10,
                   "TimeTrace: need at least 10 samples");
    require_domain(times.allFinite() && values.allFinite(), "TimeTrace: samples must be finite");
    for (Eigen::Index i = 1; i < times.size(); ++i)
        require_domain(times(i) > times(i - 1), "TimeTrace: time axis must be strictly increasing");
    if (kind == Kind::Amplitude)
        require_domain((values >= 0).all(), "TimeTrace: amplitudes must be >= 0");
}

RingdownFit fit_ringdown(const TimeTrace& trace, const fit::SolveOptions& options,
                         bool fit_offset) {
    trace.validate();

    const Eigen::Index m = trace.times.size();
    const Eigen::ArrayXd energy =
        trace.kind == TimeTrace::Kind::Amplitude ? trace.values.square().eval() : trace.values;

    const Eigen::Index decile = std::max<Eigen::Index>(m / 10, 1);
    const double head = energy.head(decile).mean();
    const double tail = energy.tail(decile).mean();
    require_domain(tail < head, "fit_ringdown: trace does not decay");

    // Seeds: noise floor from the tail, time constant from a log-linear
    // regression over the clearly-decaying part.
    const Eigen::Index tail_n = std::max<Eigen::Index>(m / 20, 2);
    double offset0 = fit_offset ? energy.tail(tail_n).mean() : 0.0;
    const double span = head - offset0;
    if (!(span > 0)) offset0 = 0.0;

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    Eigen::Index n_reg = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double v = energy(i) - offset0;
        if (v > 0.05 * std::max(head - offset0, 0.0)) {
            const double lx = trace.times(i), ly = std::log(v);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
            ++n_reg;
        }
    }
    double tau0 = trace.times(m - 1) - trace.times(0);
    double e0_init = std::max(head - offset0, 1e-300);
    if (n_reg >= 2) {
        const double denom = n_reg * sxx - sx * sx;
        if (denom > 0) {
            const double slope = (n_reg * sxy - sx * sy) / denom;
            if (slope < 0) tau0 = -1.0 / slope;
            const double intercept = (sy - slope * sx) / n_reg;
            e0_init = std::exp(intercept + slope * trace.times(0));
        }
    }

    const int np = fit_offset ? 3 : 2;
    Eigen::VectorXd initial(np), lower(np), upper(np);
    initial(0) = e0_init;
    initial(1) = tau0;
    lower(0) = 1e-300; upper(0) = std::numeric_limits<double>::infinity();
    lower(1) = 1e-300; upper(1) = std::numeric_limits<double>::infinity();
    if (fit_offset) {
        initial(2) = offset0;
        lower(2) = -std::numeric_limits<double>::infinity();
        upper(2) = std::numeric_limits<double>::infinity();
    }

    const double t0 = trace.times(0);
    fit::FitProblem problem;
    problem.residual = [&trace, energy, t0, fit_offset](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(trace.times.size());
        const double c = fit_offset ? p(2) : 0.0;
        for (Eigen::Index i = 0; i < trace.times.size(); ++i)
            r(i) = p(0) * std::exp(-(trace.times(i) - t0) / p(1)) + c - energy(i);
        return r;
    };
    problem.jacobian = [&trace, t0, fit_offset, np](const Eigen::VectorXd& p) {
        Eigen::MatrixXd jac(trace.times.size(), np);
        for (Eigen::Index i = 0; i < trace.times.size(); ++i) {
            const double dt = trace.times(i) - t0;
            const double e = std::exp(-dt / p(1));
            jac(i, 0) = e;
            jac(i, 1) = p(0) * e * dt / (p(1) * p(1));
            if (fit_offset) jac(i, 2) = 1.0;
        }
        return jac;
    };
    problem.initial = initial;
    problem.lower = lower;
    problem.upper = upper;
    problem.max_iterations = options.max_iterations;
    problem.tolerance = options.tolerance;

    RingdownFit out;
    out.fit = fit::solve_least_squares(problem);
    // Rebase E0 to t = 0 (the fit anchors the exponential at the first sample).
    const double tau = out.fit.parameters(1);
    out.e0 = out.fit.parameters(0) * std::exp(t0 / tau);
    out.tau_tot = tau;
    out.offset = fit_offset ? out.fit.parameters(2) : 0.0;
    return out;
}

LifetimeBudget build_lifetime_budget(double tau_tot_s, double q_ext, double f_r_hz) {
    require_domain(tau_tot_s > 0 && q_ext > 0 && f_r_hz > 0,
                   "build_lifetime_budget: inputs must be > 0");
    LifetimeBudget b;
    b.f_r = f_r_hz;
    b.tau_tot = tau_tot_s;
    b.q_ext = q_ext;
    b.tau_ext = loss::q_to_tau(q_ext, f_r_hz);
    b.tau_int = loss::tau_int_from_total(tau_tot_s, b.tau_ext);
    b.q_tot = loss::tau_to_q(tau_tot_s, f_r_hz);
    b.q_int = loss::tau_to_q(b.tau_int, f_r_hz);
    return b;
}

double photon_number(const PhotonCalibration& cal) {
    require_domain(cal.p_in_w >= 0, "photon_number: drive power must be >= 0");
    require_domain(cal.f_r_hz > 0 && cal.q_loaded > 0 && cal.q_ext > 0,
                   "photon_number: f_r and quality factors must be > 0");
    const double omega = 2.0 * EIGEN_PI * cal.f_r_hz;
    return 4.0 * cal.q_loaded * cal.q_loaded * cal.p_in_w /
           (constants::hbar * omega * omega * cal.q_ext);
}

} // namespace cavchar::ringdown
