/// @file stencil.hpp
/// @brief Finite-difference derivatives of sampled fields.
///
/// Interior nodes use 4th-order centered stencils.  On clamped charts the two
/// nodes next to the edge fall back to 2nd-order centered differences and the
/// edge nodes themselves to one-sided 2nd-order formulas.  Periodic charts use
/// the 4th-order stencil everywhere (jumps are honoured by Field::sample).
#pragma once

#include "nkflex/field.hpp"

namespace nkflex {

namespace detail {

template <class T>
T first_difference(const Field<T>& f, int i, int j, int axis) {
    const GridChart& c = f.chart;
    const int n = axis == 0 ? c.nx : c.ny;
    const int k = axis == 0 ? i : j;
    const double h = axis == 0 ? c.hx() : c.hy();
    auto at = [&](int off) { return axis == 0 ? f.sample(i + off, j) : f.sample(i, j + off); };

    if (c.periodic() || (k >= 2 && k <= n - 3))
        return (at(-2) - at(-1) * 8.0 + at(1) * 8.0 - at(2)) * (1.0 / (12.0 * h));
    if (k == 1 || k == n - 2) return (at(1) - at(-1)) * (1.0 / (2.0 * h));
    if (k == 0) return (at(0) * -3.0 + at(1) * 4.0 - at(2)) * (1.0 / (2.0 * h));
    return (at(0) * 3.0 - at(-1) * 4.0 + at(-2)) * (1.0 / (2.0 * h));
}

template <class T>
T second_difference(const Field<T>& f, int i, int j, int axis) {
    const GridChart& c = f.chart;
    const int n = axis == 0 ? c.nx : c.ny;
    const int k = axis == 0 ? i : j;
    const double h = axis == 0 ? c.hx() : c.hy();
    auto at = [&](int off) { return axis == 0 ? f.sample(i + off, j) : f.sample(i, j + off); };

    if (c.periodic() || (k >= 2 && k <= n - 3))
        return (-at(-2) + at(-1) * 16.0 - at(0) * 30.0 + at(1) * 16.0 - at(2)) * (1.0 / (12.0 * h * h));
    if (k == 1 || k == n - 2) return (at(-1) - at(0) * 2.0 + at(1)) * (1.0 / (h * h));
    if (k == 0) return (at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)) * (1.0 / (h * h));
    return (at(0) * 2.0 - at(-1) * 5.0 + at(-2) * 4.0 - at(-3)) * (1.0 / (h * h));
}

}  // namespace detail

/// Partial derivative along `axis` (0 = x1, 1 = x2).
template <class T>
Field<T> diff(const Field<T>& f, int axis) {
    f.chart.validate(8);
    Field<T> out(f.chart);
    for (int j = 0; j < f.chart.ny; ++j)
        for (int i = 0; i < f.chart.nx; ++i) out(i, j) = detail::first_difference(f, i, j, axis);
    return out;
}

/// Second partial derivative d^2 f / (dx_a dx_b).
template <class T>
Field<T> diff2(const Field<T>& f, int a, int b) {
    f.chart.validate(8);
    if (a != b) return diff(diff(f, a), b);
    Field<T> out(f.chart);
    for (int j = 0; j < f.chart.ny; ++j)
        for (int i = 0; i < f.chart.nx; ++i) out(i, j) = detail::second_difference(f, i, j, a);
    return out;
}

inline Field<Vec2> gradient(const ScalarField& f) {
    const auto d1 = diff(f, 0);
    const auto d2 = diff(f, 1);
    return zip(d1, d2, [](double a, double b) { return Vec2{a, b}; });
}

/// Pointwise Euclidean norm of the full gradient, sqrt(|d1 f|^2 + |d2 f|^2).
template <class T>
ScalarField gradient_magnitude(const Field<T>& f) {
    const auto d1 = diff(f, 0);
    const auto d2 = diff(f, 1);
    return zip(d1, d2, [](const T& a, const T& b) { return std::hypot(magnitude(a), magnitude(b)); });
}

/// Pointwise norm of the Hessian, sqrt(sum_ab |d_ab f|^2).
template <class T>
ScalarField hessian_magnitude(const Field<T>& f) {
    const auto f11 = diff2(f, 0, 0);
    const auto f22 = diff2(f, 1, 1);
    const auto f12 = diff2(f, 0, 1);
    ScalarField out(f.chart);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double a = magnitude(f11[k]), b = magnitude(f22[k]), c = magnitude(f12[k]);
        out[k] = std::sqrt(a * a + b * b + 2.0 * c * c);
    }
    return out;
}

}  // namespace nkflex
