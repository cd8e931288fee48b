#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cavchar/errors.hpp"

// Bounded, weighted nonlinear least squares: damped Gauss-Newton with
// Marquardt scaling.  Bounds are enforced by smooth parameter transforms
// (log for one-sided, logistic for two-sided), so iterates never leave the
// feasible box and positivity constraints hold exactly.
namespace cavchar::fit {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct SolveOptions {
    int max_iterations = 200;
    double tolerance = 1e-10;  // relative cost decrease
};

struct FitProblem {
    ResidualFn residual;
    JacobianFn jacobian;      // optional analytic d(residual)/d(params); numeric otherwise
    Eigen::VectorXd initial;
    Eigen::VectorXd lower;    // -inf entries for unbounded
    Eigen::VectorXd upper;    // +inf entries for unbounded
    Eigen::VectorXd weights;  // 1/sigma per residual entry; empty = unweighted
    int max_iterations = 200;
    double tolerance = 1e-10;
};

enum class FitStatus { Converged, MaxIterations, Stalled };

struct FitResult {
    Eigen::VectorXd parameters;
    Eigen::MatrixXd covariance;       // from the weighted Jacobian at the solution
    double reduced_chi_square = 0.0;  // weighted cost / (m - n)
    int iterations = 0;
    bool converged = false;
    FitStatus status = FitStatus::MaxIterations;
    std::vector<double> residual_norm_history;  // weighted ||r|| per accepted step
    std::string message;
};

FitResult solve_least_squares(const FitProblem& problem);

struct StepPolicy {
    double relative = 1e-6;    // step = relative * max(|p|, floor)
    double floor = 1e-9;
};

// Central-difference Jacobian of `residual` at `params`.
Eigen::MatrixXd numerical_jacobian(const ResidualFn& residual, const Eigen::VectorXd& params,
                                   const StepPolicy& policy = {});

} // namespace cavchar::fit
