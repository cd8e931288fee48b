#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace cavchar::special {

// Digamma for Re z >= 1/2: recurrence-shift into |z| >= 12, then the
// asymptotic series psi(z) ~ ln z - 1/(2z) - sum B_2n / (2n z^2n).
// No reflection branch; callers on the TLS frequency-shift path only ever
// need z = 1/2 - i y.  Relative accuracy is ~1e-15 over that domain.
template <typename Scalar>
std::complex<Scalar> digamma(std::complex<Scalar> z) {
    using C = std::complex<Scalar>;
    // B_2n / 2n for 2n = 2, 4, ..., 14
    static constexpr Scalar coeff[7] = {
        Scalar(1.0L / 12.0L),      Scalar(-1.0L / 120.0L),
        Scalar(1.0L / 252.0L),     Scalar(-1.0L / 240.0L),
        Scalar(1.0L / 132.0L),     Scalar(-691.0L / 32760.0L),
        Scalar(1.0L / 12.0L)};

    C acc(0, 0);
    while (std::abs(z) < Scalar(12)) {
        acc -= Scalar(1) / z;
        z += Scalar(1);
    }
    const C inv = Scalar(1) / z;
    const C inv2 = inv * inv;
    C series(0, 0);
    C p = inv2;
    for (const Scalar c : coeff) {
        series += c * p;
        p *= inv2;
    }
    return acc + std::log(z) - Scalar(0.5) * inv - series;
}

// Acklam's rational approximation to the standard normal quantile,
// |relative error| < 1.2e-9 -- ample for synthetic-noise generation and
// fully deterministic for a given libm.
inline double inverse_normal_cdf(double p) {
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// splitmix64 finalizer; the basis of the counter-keyed noise stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Uniform in (0, 1), keyed by (seed, index, stream).  Subsetting a dataset
// keeps point values because each index hashes independently.
inline double counter_uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0) {
    const std::uint64_t key = splitmix64(seed ^ splitmix64(index * 0x9E3779B97F4A7C15ull + stream));
    const std::uint64_t bits = splitmix64(key);
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double counter_normal(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0) {
    return inverse_normal_cdf(counter_uniform(seed, index, stream));
}

} // namespace cavchar::special
