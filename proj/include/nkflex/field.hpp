/// @file field.hpp
/// @brief Sampled fields on a GridChart.
///
/// A field on a periodic chart may be quasi-periodic: crossing the x seam adds
/// `jump_x` to the value (likewise for y).  This is how maps such as
/// u(x) = (x1, x2, 0) + periodic, or a coordinate Phi(x) = x1 + periodic, live
/// on the torus without special cases.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "nkflex/grid.hpp"
#include "nkflex/types.hpp"

namespace nkflex {

/// Real components of a sample type, for I/O and per-component transforms.
template <class T>
struct Components;

template <>
struct Components<double> {
    static constexpr int count = 1;
    static std::array<double, 1> get(double v) { return {v}; }
    static double set(const double* c) { return c[0]; }
};
template <>
struct Components<Vec2> {
    static constexpr int count = 2;
    static std::array<double, 2> get(const Vec2& v) { return {v.x, v.y}; }
    static Vec2 set(const double* c) { return {c[0], c[1]}; }
};
template <>
struct Components<Vec3> {
    static constexpr int count = 3;
    static std::array<double, 3> get(const Vec3& v) { return {v.x, v.y, v.z}; }
    static Vec3 set(const double* c) { return {c[0], c[1], c[2]}; }
};
template <>
struct Components<Complex> {
    static constexpr int count = 2;
    static std::array<double, 2> get(const Complex& v) { return {v.real(), v.imag()}; }
    static Complex set(const double* c) { return {c[0], c[1]}; }
};
template <>
struct Components<Sym2> {
    static constexpr int count = 3;
    static std::array<double, 3> get(const Sym2& v) { return {v.xx, v.xy, v.yy}; }
    static Sym2 set(const double* c) { return {c[0], c[1], c[2]}; }
};

template <class T>
struct Field {
    GridChart chart;
    std::vector<T> values;
    T jump_x{};
    T jump_y{};

    Field() = default;
    explicit Field(const GridChart& c, T fill = T{}) : chart(c), values(c.size(), fill) {}

    template <class F>
    static Field generate(const GridChart& c, F&& f) {
        Field out(c);
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i) out(i, j) = f(c.x(i), c.y(j));
        return out;
    }

    T& operator()(int i, int j) { return values[chart.index(i, j)]; }
    const T& operator()(int i, int j) const { return values[chart.index(i, j)]; }
    T& operator[](std::size_t k) { return values[k]; }
    const T& operator[](std::size_t k) const { return values[k]; }
    std::size_t size() const { return values.size(); }

    /// Value at any integer node index.  Periodic charts wrap (adding jumps);
    /// clamped charts require the index to be inside.
    T sample(int i, int j) const {
        if (!chart.periodic()) return (*this)(i, j);
        const int kx = floor_div(i, chart.nx);
        const int ky = floor_div(j, chart.ny);
        T v = (*this)(i - kx * chart.nx, j - ky * chart.ny);
        if (kx != 0) v += jump_x * static_cast<double>(kx);
        if (ky != 0) v += jump_y * static_cast<double>(ky);
        return v;
    }

    bool has_jumps() const { return magnitude(jump_x) != 0.0 || magnitude(jump_y) != 0.0; }

    Field& operator+=(const Field& o) {
        require_same_chart(chart, o.chart, "field +=");
        for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
        jump_x += o.jump_x;
        jump_y += o.jump_y;
        return *this;
    }
    Field& operator-=(const Field& o) {
        require_same_chart(chart, o.chart, "field -=");
        for (std::size_t k = 0; k < values.size(); ++k) values[k] -= o.values[k];
        jump_x -= o.jump_x;
        jump_y -= o.jump_y;
        return *this;
    }
    Field& operator*=(double s) {
        for (auto& v : values) v *= s;
        jump_x *= s;
        jump_y *= s;
        return *this;
    }

private:
    static int floor_div(int a, int n) { return a >= 0 ? a / n : -((-a + n - 1) / n); }
};

template <class T>
Field<T> operator+(Field<T> a, const Field<T>& b) { return a += b; }
template <class T>
Field<T> operator-(Field<T> a, const Field<T>& b) { return a -= b; }
template <class T>
Field<T> operator*(Field<T> a, double s) { return a *= s; }
template <class T>
Field<T> operator*(double s, Field<T> a) { return a *= s; }

using ScalarField = Field<double>;
using MetricField = Field<Sym2>;
using ImmersionField = Field<Vec3>;
using VectorField = Field<Vec2>;

/// Node-wise transform.  The result carries no jumps: callers that map a
/// quasi-periodic field must set them explicitly.
template <class T, class F>
auto map(const Field<T>& f, F&& fn) {
    using R = std::decay_t<decltype(fn(f.values[0]))>;
    Field<R> out(f.chart);
    for (std::size_t k = 0; k < f.size(); ++k) out.values[k] = fn(f.values[k]);
    return out;
}

template <class A, class B, class F>
auto zip(const Field<A>& a, const Field<B>& b, F&& fn) {
    require_same_chart(a.chart, b.chart, "zip");
    using R = std::decay_t<decltype(fn(a.values[0], b.values[0]))>;
    Field<R> out(a.chart);
    for (std::size_t k = 0; k < a.size(); ++k) out.values[k] = fn(a.values[k], b.values[k]);
    return out;
}

/// Value of a field at a node after removing the linear part implied by its
/// jumps, i.e. the genuinely periodic component.
template <class T>
T periodic_part(const Field<T>& f, int i, int j) {
    T v = f(i, j);
    if (!f.chart.periodic()) return v;
    const double sx = (f.chart.x(i) - f.chart.x0) / f.chart.lx;
    const double sy = (f.chart.y(j) - f.chart.y0) / f.chart.ly;
    v -= f.jump_x * sx;
    v -= f.jump_y * sy;
    return v;
}

template <class T>
double sup_norm(const Field<T>& f) {
    double m = 0.0;
    for (const auto& v : f.values) m = std::max(m, magnitude(v));
    return m;
}

template <class T>
bool all_finite(const Field<T>& f) {
    for (const auto& v : f.values)
        if (!std::isfinite(magnitude(v))) return false;
    return true;
}

/// The flat chart map x -> (x1, x2, 0), scaled.  On a torus it is quasi-periodic.
inline ImmersionField flat_map(const GridChart& c, double scale = 1.0) {
    auto u = ImmersionField::generate(c, [&](double x, double y) { return Vec3{scale * x, scale * y, 0.0}; });
    if (c.periodic()) {
        u.jump_x = Vec3{scale * c.lx, 0.0, 0.0};
        u.jump_y = Vec3{0.0, scale * c.ly, 0.0};
    }
    return u;
}

inline MetricField constant_metric(const GridChart& c, const Sym2& g) { return MetricField(c, g); }

}  // namespace nkflex
