/// @file types.hpp
/// @brief Small fixed-size value types used as field samples.
///
/// Every sample type supports +, -, scalar * and a `magnitude()` so that the
/// generic field machinery (mollification, differencing, norms) can treat
/// scalars, points in R^3 and symmetric 2x2 tensors alike.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

namespace nkflex {

using Complex = std::complex<double>;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    constexpr double operator[](int a) const { return a == 0 ? x : y; }
};

constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double magnitude(const Vec2& a) { return std::hypot(a.x, a.y); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double magnitude(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Symmetric 2x2 matrix stored by its three independent entries.
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    static constexpr Sym2 identity(double s = 1.0) { return {s, 0.0, s}; }
    /// a (x) a
    static constexpr Sym2 outer(const Vec2& a) { return {a.x * a.x, a.x * a.y, a.y * a.y}; }
    /// sym(a (x) b) = (a b^T + b a^T) / 2
    static constexpr Sym2 sym_outer(const Vec2& a, const Vec2& b) {
        return {a.x * b.x, 0.5 * (a.x * b.y + a.y * b.x), a.y * b.y};
    }

    constexpr Sym2& operator+=(const Sym2& o) { xx += o.xx; xy += o.xy; yy += o.yy; return *this; }
    constexpr Sym2& operator-=(const Sym2& o) { xx -= o.xx; xy -= o.xy; yy -= o.yy; return *this; }
    constexpr Sym2& operator*=(double s) { xx *= s; xy *= s; yy *= s; return *this; }

    constexpr double trace() const { return xx + yy; }
    constexpr double det() const { return xx * yy - xy * xy; }
    constexpr double quad(const Vec2& v) const { return xx * v.x * v.x + 2.0 * xy * v.x * v.y + yy * v.y * v.y; }
    constexpr Vec2 apply(const Vec2& v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
    constexpr Sym2 inverse() const {
        const double d = det();
        return {yy / d, -xy / d, xx / d};
    }

    /// Eigenvalues in ascending order.
    std::array<double, 2> eigenvalues() const {
        const double m = 0.5 * (xx + yy);
        const double r = std::hypot(0.5 * (xx - yy), xy);
        return {m - r, m + r};
    }
    double min_eigenvalue() const { return eigenvalues()[0]; }
    double max_eigenvalue() const { return eigenvalues()[1]; }
};

constexpr Sym2 operator+(Sym2 a, const Sym2& b) { return a += b; }
constexpr Sym2 operator-(Sym2 a, const Sym2& b) { return a -= b; }
constexpr Sym2 operator-(const Sym2& a) { return {-a.xx, -a.xy, -a.yy}; }
constexpr Sym2 operator*(Sym2 a, double s) { return a *= s; }
constexpr Sym2 operator*(double s, Sym2 a) { return a *= s; }

/// Operator norm sup_{|v|=1} |v^T A v|, the pointwise tensor norm used throughout.
inline double magnitude(const Sym2& a) {
    const auto ev = a.eigenvalues();
    return std::max(std::abs(ev[0]), std::abs(ev[1]));
}

inline double magnitude(double a) { return std::abs(a); }
inline double magnitude(const Complex& a) { return std::abs(a); }

/// Positive square root of an SPD matrix.
inline Sym2 sqrt_spd(const Sym2& a) {
    const double s = std::sqrt(a.det());
    const double t = std::sqrt(a.trace() + 2.0 * s);
    return {(a.xx + s) / t, a.xy / t, (a.yy + s) / t};
}

/// Extreme eigenvalues of the pencil (h, g): the spectrum of g^{-1/2} h g^{-1/2}.
inline std::array<double, 2> relative_eigenvalues(const Sym2& h, const Sym2& g) {
    const Sym2 gi = sqrt_spd(g).inverse();
    // gi * h * gi, gi symmetric
    const double a = gi.xx * h.xx + gi.xy * h.xy;
    const double b = gi.xx * h.xy + gi.xy * h.yy;
    const double c = gi.xy * h.xx + gi.yy * h.xy;
    const double d = gi.xy * h.xy + gi.yy * h.yy;
    const Sym2 m{a * gi.xx + b * gi.xy, a * gi.xy + b * gi.yy, c * gi.xy + d * gi.yy};
    return m.eigenvalues();
}

/// Jacobian of a map into R^3: the two partial derivative columns.
struct Jacobian {
    Vec3 d1;
    Vec3 d2;

    Sym2 gram() const { return {dot(d1, d1), dot(d1, d2), dot(d2, d2)}; }
    Vec3 apply(const Vec2& v) const { return d1 * v.x + d2 * v.y; }
};

}  // namespace nkflex
