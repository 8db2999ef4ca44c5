/// @file bessel.hpp
/// @brief Bessel functions of the first kind J_n for real argument.
///
/// Power series for |x| <= 12, Hankel asymptotics for J0/J1 beyond, and
/// forward recurrence for higher orders (stable while n < |x|).
#pragma once

#include <cmath>
#include <numbers>

#include "nkflex/error.hpp"

namespace nkflex {

namespace detail {

inline double bessel_series(int n, double x) {
    const double hx = 0.5 * x;
    double term = 1.0;
    for (int k = 1; k <= n; ++k) term *= hx / k;
    double sum = term;
    const double q = -hx * hx;
    for (int k = 1; k < 300; ++k) {
        term *= q / (static_cast<double>(k) * (k + n));
        sum += term;
        if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

// Hankel asymptotic expansion, accurate to ~1e-15 for x > 12.
inline double bessel_asymptotic(int n, double x) {
    const double mu = 4.0 * n * n;
    double p = 1.0, q = 0.0, term = 1.0;
    const double z8 = 8.0 * x;
    for (int k = 1; k < 30; ++k) {
        const double f = (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * z8);
        if (std::abs(f) >= 1.0) break;  // the series is asymptotic: stop at its smallest term
        term *= f;
        if (k % 2 == 1)
            q += (k % 4 == 1 ? 1.0 : -1.0) * term;
        else
            p += (k % 4 == 2 ? -1.0 : 1.0) * term;
        if (std::abs(term) < 1e-17) break;
    }
    const double chi = x - (0.5 * n + 0.25) * std::numbers::pi;
    return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace detail

inline double bessel_j(int n, double x) {
    if (n < 0) return (n % 2 == 0 ? 1.0 : -1.0) * bessel_j(-n, x);
    if (x < 0.0) return (n % 2 == 0 ? 1.0 : -1.0) * bessel_j(n, -x);
    if (x <= 12.0) return detail::bessel_series(n, x);
    if (n <= 1) return detail::bessel_asymptotic(n, x);
    if (n < x) {
        double jm = detail::bessel_asymptotic(0, x), j = detail::bessel_asymptotic(1, x);
        for (int k = 1; k < n; ++k) {
            const double jp = 2.0 * k / x * j - jm;
            jm = j;
            j = jp;
        }
        return j;
    }
    return detail::bessel_series(n, x);
}

inline double bessel_j0(double x) { return bessel_j(0, x); }
inline double bessel_j1(double x) { return bessel_j(1, x); }

/// First positive zero of J0; J0 decreases strictly on [0, j0_first_zero].
inline constexpr double j0_first_zero = 2.404825557695773;

/// Solve J0(a) = y for a in [0, j0_first_zero) by bisection, y in (0, 1].
inline double inverse_j0(double y) {
    if (!(y > 0.0 && y <= 1.0)) throw PreconditionError("J0 inversion target outside (0, 1]: no bracketed root");
    if (y == 1.0) return 0.0;
    double lo = 0.0, hi = j0_first_zero;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (bessel_j0(mid) > y)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace nkflex
