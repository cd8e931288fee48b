#include "cavchar/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cavchar/ringdown.hpp"

namespace cavchar::models {

namespace {

void validate_xy(const XYData& data, Eigen::Index min_points, bool positive_y,
                 const char* what) {
    require_domain(data.x.size() == data.y.size() && data.x.size() >= min_points,
                   std::string(what) + ": need matching x/y with at least " +
                       std::to_string(min_points) + " points");
    require_domain(data.x.allFinite() && data.y.allFinite(),
                   std::string(what) + ": data must be finite");
    if (positive_y)
        require_domain((data.y > 0).all(), std::string(what) + ": y values must be > 0");
    if (data.sigma.size() > 0)
        require_domain(data.sigma.size() == data.y.size() && (data.sigma > 0).all(),
                       std::string(what) + ": sigma must be positive and match y");
}

Eigen::Index distinct_count(const Eigen::ArrayXd& x) {
    std::set<double> vals(x.data(), x.data() + x.size());
    return static_cast<Eigen::Index>(vals.size());
}

Eigen::VectorXd log_q_weights(const XYData& data) {
    if (data.sigma.size() == 0) return {};
    // sigma on Q maps to sigma/Q on log Q.
    return (data.y / data.sigma).matrix();
}

} // namespace

ModelId model_id_from_string(const std::string& name) {
    if (name == "tls_power") return ModelId::TlsPower;
    if (name == "tls_temp") return ModelId::TlsTemp;
    if (name == "freq_shift") return ModelId::FreqShift;
    if (name == "ringdown") return ModelId::Ringdown;
    if (name == "s11") return ModelId::S11;
    throw ParseError("unknown model-id '" + name + "'");
}

std::string to_string(ModelId id) {
    switch (id) {
        case ModelId::TlsPower: return "tls_power";
        case ModelId::TlsTemp: return "tls_temp";
        case ModelId::FreqShift: return "freq_shift";
        case ModelId::Ringdown: return "ringdown";
        case ModelId::S11: return "s11";
    }
    return "?";
}

TlsPowerFit fit_tls_power(const XYData& data, double f_r_hz, double temperature_k,
                          const fit::SolveOptions& options) {
    validate_xy(data, 4, true, "fit_tls_power");
    require_domain((data.x >= 0).all(), "fit_tls_power: n_bar must be >= 0");
    require_domain(f_r_hz > 0 && temperature_k > 0,
                   "fit_tls_power: f_r and temperature must be > 0");
    require_domain(distinct_count(data.x) >= 2,
                   "fit_tls_power: degenerate data (all n_bar values identical)");

    Eigen::Index i_lo = 0, i_hi = 0;
    data.x.minCoeff(&i_lo);
    data.x.maxCoeff(&i_hi);
    const double inv_q_lo = 1.0 / data.y(i_lo);
    const double inv_q_hi = 1.0 / data.y(i_hi);

    double log_sum = 0.0;
    Eigen::Index log_n = 0;
    for (Eigen::Index i = 0; i < data.x.size(); ++i)
        if (data.x(i) > 0) { log_sum += std::log(data.x(i)); ++log_n; }

    Eigen::VectorXd initial(4), lower(4), upper(4);
    lower << 1e-16, 1e-6, 1e-3, 1.0;
    upper << 1e-2, 1e16, 2.0, 1e16;
    initial << std::max(inv_q_lo - inv_q_hi, 0.1 * inv_q_lo),
        log_n > 0 ? std::exp(log_sum / static_cast<double>(log_n)) : 1.0,
        0.5,
        data.y(i_hi);
    initial = initial.cwiseMax(lower).cwiseMin(upper);

    const loss::ModeParams<double> mode_of = {f_r_hz, temperature_k, 0.0};

    fit::FitProblem problem;
    problem.residual = [data, mode_of](const Eigen::VectorXd& p) {
        const loss::TlsPowerParams<double> tls{p(0), p(1), p(2), p(3)};
        Eigen::VectorXd r(data.x.size());
        for (Eigen::Index i = 0; i < data.x.size(); ++i) {
            loss::ModeParams<double> m = mode_of;
            m.n_bar = data.x(i);
            r(i) = -std::log(loss::eval_tls_power(tls, m)) - std::log(data.y(i));
        }
        return r;
    };
    problem.jacobian = [data, mode_of](const Eigen::VectorXd& p) {
        const loss::TlsPowerParams<double> tls{p(0), p(1), p(2), p(3)};
        Eigen::MatrixXd jac(data.x.size(), 4);
        for (Eigen::Index i = 0; i < data.x.size(); ++i) {
            loss::ModeParams<double> m = mode_of;
            m.n_bar = data.x(i);
            const double l = loss::eval_tls_power(tls, m);
            jac.row(i) = (-1.0 / l) * loss::tls_power_partials(tls, m).transpose();
        }
        return jac;
    };
    problem.initial = initial;
    problem.lower = lower;
    problem.upper = upper;
    problem.weights = log_q_weights(data);
    problem.max_iterations = options.max_iterations;
    problem.tolerance = options.tolerance;

    TlsPowerFit out;
    out.fit = fit::solve_least_squares(problem);
    out.params = {out.fit.parameters(0), out.fit.parameters(1), out.fit.parameters(2),
                  out.fit.parameters(3)};
    return out;
}

TlsTempFit fit_tls_temp(const XYData& data, double f_r_hz, const fit::SolveOptions& options) {
    validate_xy(data, 2, true, "fit_tls_temp");
    require_domain((data.x > 0).all(), "fit_tls_temp: temperatures must be > 0");
    require_domain(f_r_hz > 0, "fit_tls_temp: f_r must be > 0");
    require_domain(distinct_count(data.x) >= 2,
                   "fit_tls_temp: degenerate data (all temperatures identical)");

    // Linear regression of 1/Q on tanh(hf/2kT) gives the starting point; the
    // model is linear in (f_tls_loss, 1/q_int0).
    const Eigen::Index m = data.x.size();
    Eigen::ArrayXd t(m);
    for (Eigen::Index i = 0; i < m; ++i)
        t(i) = loss::thermal_tanh(f_r_hz, data.x(i));
    const Eigen::ArrayXd inv_q = 1.0 / data.y;
    const double t_mean = t.mean(), y_mean = inv_q.mean();
    const double denom = ((t - t_mean) * (t - t_mean)).sum();
    const double slope = denom > 0 ? ((t - t_mean) * (inv_q - y_mean)).sum() / denom : 0.0;
    const double intercept = y_mean - slope * t_mean;

    Eigen::VectorXd initial(2), lower(2), upper(2);
    lower << 1e-16, 1.0;
    upper << 1e-2, 1e16;
    initial << std::max(slope, 1e-14),
        intercept > 0 ? 1.0 / intercept : 10.0 * data.y.maxCoeff();
    initial = initial.cwiseMax(lower).cwiseMin(upper);

    fit::FitProblem problem;
    problem.residual = [data, f_r_hz](const Eigen::VectorXd& p) {
        const loss::TlsTempParams<double> tls{p(0), p(1)};
        Eigen::VectorXd r(data.x.size());
        for (Eigen::Index i = 0; i < data.x.size(); ++i) {
            const loss::ModeParams<double> mode{f_r_hz, data.x(i), 0.0};
            r(i) = -std::log(loss::eval_tls_temp(tls, mode)) - std::log(data.y(i));
        }
        return r;
    };
    problem.jacobian = [data, f_r_hz](const Eigen::VectorXd& p) {
        const loss::TlsTempParams<double> tls{p(0), p(1)};
        Eigen::MatrixXd jac(data.x.size(), 2);
        for (Eigen::Index i = 0; i < data.x.size(); ++i) {
            const loss::ModeParams<double> mode{f_r_hz, data.x(i), 0.0};
            const double l = loss::eval_tls_temp(tls, mode);
            jac.row(i) = (-1.0 / l) * loss::tls_temp_partials(tls, mode).transpose();
        }
        return jac;
    };
    problem.initial = initial;
    problem.lower = lower;
    problem.upper = upper;
    problem.weights = log_q_weights(data);
    problem.max_iterations = options.max_iterations;
    problem.tolerance = options.tolerance;

    TlsTempFit out;
    out.fit = fit::solve_least_squares(problem);
    out.params = {out.fit.parameters(0), out.fit.parameters(1)};
    return out;
}

FreqShiftFit fit_freq_shift(const XYData& data, double f_r_hz, const fit::SolveOptions& options) {
    validate_xy(data, 2, false, "fit_freq_shift");
    require_domain((data.x > 0).all(), "fit_freq_shift: temperatures must be > 0");
    require_domain(f_r_hz > 0, "fit_freq_shift: f_r must be > 0");

    const Eigen::Index m = data.x.size();
    Eigen::ArrayXd basis(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const loss::ModeParams<double> mode{f_r_hz, data.x(i), 0.0};
        basis(i) = loss::freq_shift_partial(mode);
    }
    const double bb = (basis * basis).sum();
    const double init = bb > 0 ? (basis * data.y).sum() / bb : 1e-10;

    Eigen::VectorXd initial(1), lower(1), upper(1);
    lower << 1e-18;
    upper << 1e-2;
    initial << std::clamp(init, 1e-18, 1e-2);

    fit::FitProblem problem;
    problem.residual = [data, basis](const Eigen::VectorXd& p) {
        return ((p(0) * basis) - data.y).matrix().eval();
    };
    problem.jacobian = [basis](const Eigen::VectorXd&) {
        return Eigen::MatrixXd(basis.matrix());
    };
    problem.initial = initial;
    problem.lower = lower;
    problem.upper = upper;
    if (data.sigma.size() > 0) problem.weights = (1.0 / data.sigma).matrix();
    problem.max_iterations = options.max_iterations;
    problem.tolerance = options.tolerance;

    FreqShiftFit out;
    out.fit = fit::solve_least_squares(problem);
    out.f_tls_loss = out.fit.parameters(0);
    return out;
}

NamedModelFit fit_named_model(ModelId id, const XYData& data, const ModelContext& ctx,
                              const fit::SolveOptions& options) {
    NamedModelFit out;
    out.model = id;
    switch (id) {
        case ModelId::TlsPower: {
            auto r = fit_tls_power(data, ctx.f_r_hz, ctx.temperature_k, options);
            out.parameter_names = {"f_tls_loss", "n_c", "beta", "q_res"};
            out.parameters = r.fit.parameters;
            out.fit = std::move(r.fit);
            return out;
        }
        case ModelId::TlsTemp: {
            auto r = fit_tls_temp(data, ctx.f_r_hz, options);
            out.parameter_names = {"f_tls_loss", "q_int0"};
            out.parameters = r.fit.parameters;
            out.fit = std::move(r.fit);
            return out;
        }
        case ModelId::FreqShift: {
            auto r = fit_freq_shift(data, ctx.f_r_hz, options);
            out.parameter_names = {"f_tls_loss"};
            out.parameters = r.fit.parameters;
            out.fit = std::move(r.fit);
            return out;
        }
        case ModelId::Ringdown: {
            ringdown::TimeTrace trace;
            trace.times = data.x;
            trace.values = data.y;
            trace.kind = ctx.values_are_power ? ringdown::TimeTrace::Kind::Power
                                              : ringdown::TimeTrace::Kind::Amplitude;
            auto r = ringdown::fit_ringdown(trace, options);
            out.parameter_names = {"e0", "tau_tot", "offset"};
            out.parameters = r.fit.parameters;
            out.fit = std::move(r.fit);
            return out;
        }
        case ModelId::S11:
            throw DomainError("fit_named_model: s11 requires a complex frequency trace; "
                              "use resonance::extract_resonance");
    }
    throw ParseError("unknown model-id");
}

double freq_shift_minimum_temperature(double f_r_hz, double t_low_k, double t_high_k) {
    require_domain(f_r_hz > 0 && t_low_k > 0 && t_high_k > t_low_k,
                   "freq_shift_minimum_temperature: invalid search interval");
    const auto value = [f_r_hz](double t) {
        return loss::freq_shift_bracket(loss::ModeParams<double>{f_r_hz, t, 0.0});
    };
    // Golden section on log T; the curve has a single interior minimum.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(t_low_k), b = std::log(t_high_k);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = value(std::exp(c)), fd = value(std::exp(d));
    for (int i = 0; i < 200 && (b - a) > 1e-12; ++i) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a);
            fc = value(std::exp(c));
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a);
            fd = value(std::exp(d));
        }
    }
    return std::exp(0.5 * (a + b));
}

} // namespace cavchar::models
