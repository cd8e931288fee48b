#include "cavchar/fit.hpp"

#include <cfloat>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace cavchar::fit {

namespace {

constexpr double kLambdaInit = 1e-3;
constexpr double kLambdaMax = 1e14;
constexpr double kLambdaMin = 1e-15;

enum class BoundKind { Free, LowerOnly, UpperOnly, TwoSided };

// Smooth bijection between the feasible box and R^n.
struct Transform {
    std::vector<BoundKind> kind;
    Eigen::VectorXd lo, hi;

    Transform(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper)
        : lo(lower), hi(upper) {
        kind.resize(static_cast<std::size_t>(lower.size()));
        for (Eigen::Index i = 0; i < lower.size(); ++i) {
            const bool l = std::isfinite(lower(i));
            const bool u = std::isfinite(upper(i));
            kind[static_cast<std::size_t>(i)] =
                l ? (u ? BoundKind::TwoSided : BoundKind::LowerOnly)
                  : (u ? BoundKind::UpperOnly : BoundKind::Free);
        }
    }

    double to_internal(double p, Eigen::Index i) const {
        switch (kind[static_cast<std::size_t>(i)]) {
            case BoundKind::Free: return p;
            case BoundKind::LowerOnly: return std::log(p - lo(i));
            case BoundKind::UpperOnly: return std::log(hi(i) - p);
            case BoundKind::TwoSided: {
                const double s = (p - lo(i)) / (hi(i) - lo(i));
                return std::log(s / (1.0 - s));
            }
        }
        return p;
    }

    double to_external(double u, Eigen::Index i) const {
        switch (kind[static_cast<std::size_t>(i)]) {
            case BoundKind::Free: return u;
            case BoundKind::LowerOnly: return lo(i) + std::exp(u);
            case BoundKind::UpperOnly: return hi(i) - std::exp(u);
            case BoundKind::TwoSided: {
                const double s = 1.0 / (1.0 + std::exp(-u));
                return lo(i) + (hi(i) - lo(i)) * s;
            }
        }
        return u;
    }

    // d external / d internal, evaluated at internal coordinate u.
    double slope(double u, Eigen::Index i) const {
        switch (kind[static_cast<std::size_t>(i)]) {
            case BoundKind::Free: return 1.0;
            case BoundKind::LowerOnly: return std::exp(u);
            case BoundKind::UpperOnly: return -std::exp(u);
            case BoundKind::TwoSided: {
                const double s = 1.0 / (1.0 + std::exp(-u));
                return (hi(i) - lo(i)) * s * (1.0 - s);
            }
        }
        return 1.0;
    }

    Eigen::VectorXd to_internal(const Eigen::VectorXd& p) const {
        Eigen::VectorXd u(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) u(i) = to_internal(p(i), i);
        return u;
    }

    Eigen::VectorXd to_external(const Eigen::VectorXd& u) const {
        Eigen::VectorXd p(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) p(i) = to_external(u(i), i);
        return p;
    }

    Eigen::VectorXd slopes(const Eigen::VectorXd& u) const {
        Eigen::VectorXd d(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) d(i) = slope(u(i), i);
        return d;
    }
};

// Pull a boundary-touching start strictly inside the box so the transform
// stays finite.  Interior points must pass through untouched, whatever the
// box size.
Eigen::VectorXd nudge_inside(const Eigen::VectorXd& p0, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi) {
    Eigen::VectorXd p = p0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const bool l = std::isfinite(lo(i));
        const bool u = std::isfinite(hi(i));
        const double gap = (l && u) ? hi(i) - lo(i) : 0.0;
        if (l && p(i) <= lo(i))
            p(i) = lo(i) + std::max({1e-300, 1e-12 * gap, 1e-12 * std::abs(lo(i))});
        if (u && p(i) >= hi(i))
            p(i) = hi(i) - std::max({1e-300, 1e-12 * gap, 1e-12 * std::abs(hi(i))});
    }
    return p;
}

} // namespace

Eigen::MatrixXd numerical_jacobian(const ResidualFn& residual, const Eigen::VectorXd& params,
                                   const StepPolicy& policy) {
    const Eigen::Index n = params.size();
    Eigen::MatrixXd jac;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = policy.relative * std::max(std::abs(params(j)), policy.floor);
        Eigen::VectorXd plus = params, minus = params;
        plus(j) += h;
        minus(j) -= h;
        const Eigen::VectorXd rp = residual(plus);
        const Eigen::VectorXd rm = residual(minus);
        if (jac.size() == 0) jac.resize(rp.size(), n);
        jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return jac;
}

FitResult solve_least_squares(const FitProblem& problem) {
    const Eigen::Index n = problem.initial.size();
    require_domain(n > 0, "solve_least_squares: empty parameter vector");
    require_domain(problem.lower.size() == n && problem.upper.size() == n,
                   "solve_least_squares: bound vectors must match parameter dimension");
    for (Eigen::Index i = 0; i < n; ++i) {
        require_domain(problem.lower(i) <= problem.initial(i) &&
                           problem.initial(i) <= problem.upper(i),
                       "solve_least_squares: initial parameters violate bounds");
    }
    require_domain((problem.weights.size() == 0 || (problem.weights.array() >= 0).all()),
                   "solve_least_squares: weights must be non-negative");

    const Transform tf(problem.lower, problem.upper);
    Eigen::VectorXd u = tf.to_internal(nudge_inside(problem.initial, problem.lower, problem.upper));

    const auto weighted_residual = [&](const Eigen::VectorXd& uu) -> Eigen::VectorXd {
        Eigen::VectorXd r = problem.residual(tf.to_external(uu));
        if (problem.weights.size() > 0) {
            require_domain(problem.weights.size() == r.size(),
                           "solve_least_squares: weight vector length mismatch");
            r.array() *= problem.weights.array();
        }
        return r;
    };

    // Weighted Jacobian in internal coordinates.
    const auto weighted_jacobian = [&](const Eigen::VectorXd& uu) -> Eigen::MatrixXd {
        Eigen::MatrixXd jac;
        if (problem.jacobian) {
            jac = problem.jacobian(tf.to_external(uu));
            jac *= tf.slopes(uu).asDiagonal();
        } else {
            jac = numerical_jacobian([&](const Eigen::VectorXd& v) { return problem.residual(tf.to_external(v)); },
                                     uu, StepPolicy{1e-7, 1.0});
        }
        if (problem.weights.size() > 0) jac.array().colwise() *= problem.weights.array();
        return jac;
    };

    FitResult result;
    Eigen::VectorXd rw = weighted_residual(u);
    require_domain(rw.size() >= n,
                   "solve_least_squares: residual dimension must be >= parameter dimension");
    require_domain(rw.allFinite(), "solve_least_squares: residual not finite at initial point");

    double cost = rw.squaredNorm();
    result.residual_norm_history.push_back(std::sqrt(cost));

    const int max_iter = problem.max_iterations > 0 ? problem.max_iterations : 200;
    const double tol = problem.tolerance > 0 ? problem.tolerance : 1e-10;

    double lambda = kLambdaInit;
    bool converged = cost == 0.0;
    FitStatus status = converged ? FitStatus::Converged : FitStatus::MaxIterations;
    int iter = 0;

    while (!converged && iter < max_iter) {
        ++iter;
        const Eigen::MatrixXd jac = weighted_jacobian(u);
        const Eigen::MatrixXd normal = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * rw;
        const Eigen::VectorXd diag = normal.diagonal().cwiseMax(1e-300);

        bool accepted = false;
        double predicted = 0.0;
        while (lambda <= kLambdaMax) {
            Eigen::MatrixXd damped = normal;
            damped.diagonal() += lambda * diag;
            const Eigen::VectorXd step = damped.ldlt().solve(-grad);
            predicted = -grad.dot(step);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd u_try = u + step;
            Eigen::VectorXd rw_try = weighted_residual(u_try);
            const double cost_try = rw_try.allFinite() ? rw_try.squaredNorm()
                                                       : std::numeric_limits<double>::infinity();
            if (cost_try < cost) {
                const double rel_dec = (cost - cost_try) / std::max(cost, DBL_MIN);
                u = u_try;
                rw.swap(rw_try);
                cost = cost_try;
                result.residual_norm_history.push_back(std::sqrt(cost));
                lambda = std::max(lambda * 0.1, kLambdaMin);
                accepted = true;
                if (rel_dec < tol || cost == 0.0) {
                    converged = true;
                    status = FitStatus::Converged;
                }
                break;
            }
            lambda *= 10.0;
        }

        if (!accepted) {
            // Damping exhausted.  If the linearization predicts no further
            // decrease we are at a minimum; otherwise signal the stall.
            if (predicted <= tol * std::max(cost, DBL_MIN)) {
                converged = true;
                status = FitStatus::Converged;
            } else {
                status = FitStatus::Stalled;
                result.message = "damping could not restore descent (singular Jacobian?)";
            }
            break;
        }
        if (converged) status = FitStatus::Converged;
    }

    if (!converged && status != FitStatus::Stalled) {
        status = FitStatus::MaxIterations;
        result.message = "no convergence within max_iterations; best point returned";
    }

    result.parameters = tf.to_external(u);
    result.iterations = iter;
    result.converged = converged;
    result.status = status;

    // Covariance from the weighted Jacobian with respect to the external
    // parameters: (J^T J)^-1, pseudo-inverted when rank deficient.
    Eigen::MatrixXd jac_ext;
    if (problem.jacobian) {
        jac_ext = problem.jacobian(result.parameters);
        if (problem.weights.size() > 0) jac_ext.array().colwise() *= problem.weights.array();
    } else {
        const Eigen::VectorXd slopes = tf.slopes(u);
        jac_ext = weighted_jacobian(u);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double s = slopes(j);
            jac_ext.col(j) /= (std::abs(s) > 1e-300 ? s : 1e-300);
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac_ext, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cutoff = svd.singularValues()(0) * 1e-13;
    Eigen::VectorXd inv_sv = svd.singularValues();
    for (Eigen::Index i = 0; i < inv_sv.size(); ++i) {
        const double s = svd.singularValues()(i);
        inv_sv(i) = s > cutoff ? 1.0 / (s * s) : 0.0;
    }
    result.covariance = svd.matrixV() * inv_sv.asDiagonal() * svd.matrixV().transpose();
    result.covariance = 0.5 * (result.covariance + result.covariance.transpose()).eval();

    const Eigen::Index m = rw.size();
    result.reduced_chi_square =
        m > n ? cost / static_cast<double>(m - n) : std::numeric_limits<double>::quiet_NaN();
    return result;
}

} // namespace cavchar::fit
