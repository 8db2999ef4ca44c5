/// @file mollify.hpp
/// @brief Convolution with a compactly supported polynomial bump.
///
/// The kernel is the separable product k(x1)k(x2) with k(s) = (1 - (s/a)^2)^2
/// on |s| < a and a = l/sqrt(2), so its support sits inside the ball of
/// radius l.  Weights are normalized discretely to unit mass; near a clamped
/// edge the truncated weights are renormalized.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <fftw3.h>

#include "nkflex/field.hpp"

namespace nkflex {

/// Discrete 1-D weights w_{-m..m} (returned as w[0..2m]) for half-width a in
/// units of the spacing h.  Unnormalized.
inline std::vector<double> bump_weights(double a_over_h) {
    const int m = static_cast<int>(std::ceil(a_over_h)) - 1;
    std::vector<double> w(2 * m + 1);
    for (int k = -m; k <= m; ++k) {
        const double s = k / a_over_h;
        const double t = 1.0 - s * s;
        w[k + m] = t > 0.0 ? t * t : 0.0;
    }
    return w;
}

/// Treatment of clamped edges.  `renormalize` rescales the truncated kernel to
/// unit mass (constants preserved); `reflect_odd` extends f by point
/// reflection about the edge value, which preserves affine fields exactly.
enum class EdgeMode { renormalize, reflect_odd };

namespace detail {

template <class T>
T odd_extension(const Field<T>& f, int i, int j, int axis, int o) {
    const int n = axis == 0 ? f.chart.nx : f.chart.ny;
    const int k = (axis == 0 ? i : j) + o;
    auto at = [&](int kk) { return axis == 0 ? f(kk, j) : f(i, kk); };
    if (k < 0) return at(0) * 2.0 - at(std::min(-k, n - 1));
    if (k > n - 1) return at(n - 1) * 2.0 - at(std::max(2 * (n - 1) - k, 0));
    return at(k);
}

template <class T>
Field<T> convolve_axis(const Field<T>& f, const std::vector<double>& w, int axis, EdgeMode edge = EdgeMode::renormalize) {
    const GridChart& c = f.chart;
    const int m = static_cast<int>(w.size() / 2);
    double mass = 0.0;
    for (double x : w) mass += x;
    Field<T> out(c);
    out.jump_x = f.jump_x;
    out.jump_y = f.jump_y;
    const int n = axis == 0 ? c.nx : c.ny;
    for (int j = 0; j < c.ny; ++j)
        for (int i = 0; i < c.nx; ++i) {
            const int k = axis == 0 ? i : j;
            T acc{};
            if (c.periodic()) {
                for (int o = -m; o <= m; ++o) acc += (axis == 0 ? f.sample(i + o, j) : f.sample(i, j + o)) * w[o + m];
                out(i, j) = acc * (1.0 / mass);
            } else if (edge == EdgeMode::reflect_odd) {
                for (int o = -m; o <= m; ++o) acc += odd_extension(f, i, j, axis, o) * w[o + m];
                out(i, j) = acc * (1.0 / mass);
            } else {
                double local = 0.0;
                const int lo = std::max(-m, -k), hi = std::min(m, n - 1 - k);
                for (int o = lo; o <= hi; ++o) {
                    acc += (axis == 0 ? f(i + o, j) : f(i, j + o)) * w[o + m];
                    local += w[o + m];
                }
                out(i, j) = acc * (1.0 / local);
            }
        }
    return out;
}

// Same result as convolve_axis (periodic or odd-reflected lines) computed by
// FFT-based linear convolution of each extended grid line; used for wide kernels.
template <class T>
Field<T> convolve_axis_fft(const Field<T>& f, const std::vector<double>& w, int axis) {
    using C = Components<T>;
    const GridChart& c = f.chart;
    const int m = static_cast<int>(w.size() / 2);
    const int n = axis == 0 ? c.nx : c.ny;
    const int lines = axis == 0 ? c.ny : c.nx;
    double mass = 0.0;
    for (double x : w) mass += x;
    const bool periodic = c.periodic();
    const int ext = n + 2 * m;  // extended line, indices -m .. n-1+m
    const int P = ext + 2 * m;  // room for a linear (not circular) convolution
    const int PC = P / 2 + 1;

    double* in = fftw_alloc_real(P);
    fftw_complex* spec = fftw_alloc_complex(PC);
    fftw_complex* kspec = fftw_alloc_complex(PC);
    fftw_plan fwd = fftw_plan_dft_r2c_1d(P, in, spec, FFTW_ESTIMATE);
    fftw_plan bwd = fftw_plan_dft_c2r_1d(P, spec, in, FFTW_ESTIMATE);

    // kernel centred at index 0 (circularly)
    std::fill(in, in + P, 0.0);
    for (int o = -m; o <= m; ++o) in[(o + P) % P] = w[o + m] / mass;
    fftw_execute(fwd);
    for (int q = 0; q < PC; ++q) {
        kspec[q][0] = spec[q][0];
        kspec[q][1] = spec[q][1];
    }

    Field<T> out(c);
    out.jump_x = f.jump_x;
    out.jump_y = f.jump_y;
    std::vector<std::array<double, C::count>> line(ext);
    for (int L = 0; L < lines; ++L) {
        for (int e = 0; e < ext; ++e) {
            const int k = e - m;
            T v;
            if (periodic)
                v = axis == 0 ? f.sample(k, L) : f.sample(L, k);
            else
                v = axis == 0 ? odd_extension(f, 0, L, 0, k) : odd_extension(f, L, 0, 1, k);
            line[e] = C::get(v);
        }
        // windows without any nonzero input give exact zeros, as in the direct sum
        std::vector<int> nonzero(ext + 1, 0);
        for (int e = 0; e < ext; ++e) {
            bool nz = false;
            for (double x : line[e]) nz |= x != 0.0;
            nonzero[e + 1] = nonzero[e] + (nz ? 1 : 0);
        }
        std::array<std::vector<double>, C::count> res;
        for (int comp = 0; comp < C::count; ++comp) {
            std::fill(in, in + P, 0.0);
            for (int e = 0; e < ext; ++e) in[e] = line[e][comp];
            fftw_execute(fwd);
            for (int q = 0; q < PC; ++q) {
                const double a = spec[q][0], b = spec[q][1], x = kspec[q][0], y = kspec[q][1];
                spec[q][0] = (a * x - b * y) / P;
                spec[q][1] = (a * y + b * x) / P;
            }
            fftw_execute(bwd);
            res[comp].assign(in + m, in + m + n);
            for (int k = 0; k < n; ++k)
                if (nonzero[k + 2 * m + 1] == nonzero[k]) res[comp][k] = 0.0;
        }
        for (int k = 0; k < n; ++k) {
            double tmp[C::count];
            for (int comp = 0; comp < C::count; ++comp) tmp[comp] = res[comp][k];
            (axis == 0 ? out(k, L) : out(L, k)) = C::set(tmp);
        }
    }
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(in);
    fftw_free(spec);
    fftw_free(kspec);
    return out;
}

/// Kernels wider than this (in nodes) go through the FFT path.
inline constexpr int fft_kernel_threshold = 24;

template <class T>
Field<T> convolve(const Field<T>& f, const std::vector<double>& w, int axis, EdgeMode edge) {
    const bool fast = static_cast<int>(w.size() / 2) > fft_kernel_threshold &&
                      (f.chart.periodic() || edge == EdgeMode::reflect_odd);
    return fast ? convolve_axis_fft(f, w, axis) : convolve_axis(f, w, axis, edge);
}

}  // namespace detail

/// f * phi_l.  Rejects kernels that the grid cannot resolve (l < 2h).
template <class T>
Field<T> mollify(const Field<T>& f, double l, EdgeMode edge = EdgeMode::renormalize) {
    const GridChart& c = f.chart;
    c.validate(8);
    if (!(l >= 2.0 * c.h() * (1.0 - 1e-12)))
        throw PreconditionError("mollification length " + std::to_string(l) + " under-resolved (needs >= 2 x spacing " +
                                std::to_string(c.h()) + ")");
    const double a = l / std::sqrt(2.0);
    const auto wx = bump_weights(a / c.hx());
    const auto wy = bump_weights(a / c.hy());
    if (c.periodic() && (static_cast<int>(wx.size()) > c.nx || static_cast<int>(wy.size()) > c.ny))
        throw PreconditionError("mollification length exceeds the torus period");
    return detail::convolve(detail::convolve(f, wx, 0, edge), wy, 1, edge);
}

}  // namespace nkflex
