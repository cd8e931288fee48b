#pragma once

// Test-only oracles, kept independent of the implementation paths they check:
// central finite differences, dense-grid minimization, trapezoid/adaptive
// quadrature, and the closed-form weighted-least-squares solution.

#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace oracles {

// Central difference d f / d x with a relative step.
inline double central_difference(const std::function<double(double)>& f, double x,
                                 double rel_step = 1e-6) {
    const double h = rel_step * std::max(std::abs(x), 1e-30);
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Argmin of f over a dense grid; returns the grid value.
inline double grid_argmin(const std::function<double(double)>& f, double lo, double hi, int n,
                          bool log_axis = true, double* step_out = nullptr) {
    double best_x = lo;
    double best_v = f(lo);
    const double a = log_axis ? std::log(lo) : lo;
    const double b = log_axis ? std::log(hi) : hi;
    for (int i = 0; i < n; ++i) {
        const double t = a + (b - a) * i / double(n - 1);
        const double x = log_axis ? std::exp(t) : t;
        const double v = f(x);
        if (v < best_v) {
            best_v = v;
            best_x = x;
        }
    }
    if (step_out != nullptr) *step_out = (b - a) / double(n - 1);
    return best_x;
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double fm, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, fm, flm, eps / 2.0, depth - 1) +
           simpson(f, m, b, fm, fb, frm, eps / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-10) {
    const double m = 0.5 * (a + b);
    return simpson(f, a, b, f(a), f(b), f(m), eps, 40);
}

// Closed-form weighted least squares: beta = (X^T W X)^-1 X^T W y with
// W = diag(w^2), and its parameter covariance (X^T W X)^-1 for w = 1/sigma.
struct WlsSolution {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
};

inline WlsSolution weighted_least_squares(const Eigen::MatrixXd& design,
                                          const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    const Eigen::MatrixXd xw = w.asDiagonal() * design;
    const Eigen::VectorXd yw = w.asDiagonal() * y;
    const Eigen::MatrixXd gram = xw.transpose() * xw;
    WlsSolution out;
    out.covariance = gram.inverse();
    out.beta = out.covariance * (xw.transpose() * yw);
    return out;
}

} // namespace oracles
