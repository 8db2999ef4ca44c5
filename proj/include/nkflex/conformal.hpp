/// @file conformal.hpp
/// @brief Conformal coordinates for a 2-D metric via the Beltrami equation.
///
/// For an SPD field H we look for Phi = Phi1 + i Phi2 and theta > 0 with
///   H = theta^2 (grad Phi1 (x) grad Phi1 + grad Phi2 (x) grad Phi2),
/// which holds exactly when d_zbar Phi = mu d_z Phi.  On a torus of period L we
/// write Phi = z + beta zbar + w with w periodic and solve for f = d_zbar w by
/// the contraction f <- P0[mu (1 + B f)], B the Beurling multiplier
/// conj(kappa)/kappa.  Clamped charts are embedded into a padded torus on
/// which mu is tapered to zero.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "nkflex/fft.hpp"
#include "nkflex/field.hpp"

namespace nkflex {

/// Raised when the factorization converged but misses the residual tolerance.
class ConformalResidualError : public ConvergenceError {
public:
    ConformalResidualError(const std::string& what, MetricField residual)
        : ConvergenceError(what), residual(std::move(residual)) {}
    MetricField residual;
};

struct BeltramiCoefficient {
    Field<Complex> mu;
    double sup_abs = 0.0;
    /// max over nodes of |mu|^2 - (1 - 4 det H / (tr H)^2); never positive
    /// beyond rounding.
    double bound_excess = 0.0;
};

inline Complex beltrami_at(const Sym2& H) {
    return Complex(H.xx - H.yy, 2.0 * H.xy) / (H.xx + H.yy + 2.0 * std::sqrt(H.det()));
}

inline BeltramiCoefficient beltrami_coefficient(const MetricField& H) {
    BeltramiCoefficient r{Field<Complex>(H.chart), 0.0, -1.0};
    for (int j = 0; j < H.chart.ny; ++j)
        for (int i = 0; i < H.chart.nx; ++i) {
            const Sym2& h = H(i, j);
            if (!(h.xx > 0.0) || !(h.det() > 0.0))
                throw PreconditionError("metric not SPD at node (" + std::to_string(i) + ", " + std::to_string(j) + ")");
            const Complex mu = beltrami_at(h);
            r.mu(i, j) = mu;
            r.sup_abs = std::max(r.sup_abs, std::abs(mu));
            const double tr = h.trace();
            r.bound_excess = std::max(r.bound_excess, std::norm(mu) - (1.0 - 4.0 * h.det() / (tr * tr)));
        }
    return r;
}

struct ConformalOptions {
    double tolerance = 1e-12;      ///< sup-norm change that stops the iteration
    int max_iterations = 200;
    double residual_tolerance = 1e-6;
    double margin_fraction = 0.1;  ///< padding of clamped charts, per side
};

struct ConformalFactorization {
    ScalarField phi1, phi2;   ///< quasi-periodic on a torus (see jumps)
    VectorField grad1, grad2; ///< spectral gradients of phi1, phi2
    ScalarField theta;        ///< conformal factor
    Field<Complex> mu;
    MetricField residual;     ///< H - theta^2 (grad phi1 (x) grad phi1 + grad phi2 (x) grad phi2)
    double residual_sup = 0.0;
    double min_det = 0.0;     ///< min det D Phi
    double min_theta = 0.0;
    double sup_mu = 0.0;
    Complex beta;             ///< Phi = z + beta zbar + periodic
    int iterations = 0;
    double contraction = 0.0; ///< last ratio of successive corrections
};

namespace detail {

struct TorusSolution {
    std::vector<Complex> phi, phi_z, phi_zbar;
    Complex beta;
    int iterations = 0;
    double contraction = 0.0;
};

// Solve on an n x n-sample torus with periods (lx, ly); z measured from (x0, y0).
inline TorusSolution solve_torus(const std::vector<Complex>& mu, int nx, int ny, double lx, double ly, double x0,
                                 double y0, const ConformalOptions& opt) {
    const std::size_t N = mu.size();
    Fft2 fft(nx, ny);
    std::vector<Complex> mult(N), inv_dzbar(N);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double k1 = 2.0 * std::numbers::pi * Fft2::frequency(i, nx) / lx;
            const double k2 = 2.0 * std::numbers::pi * Fft2::frequency(j, ny) / ly;
            const Complex kappa(k1, k2);
            const std::size_t k = std::size_t(j) * nx + i;
            if (k == 0) {
                mult[k] = 0.0;
                inv_dzbar[k] = 0.0;
            } else {
                mult[k] = std::conj(kappa) / kappa;
                inv_dzbar[k] = 1.0 / (Complex(0.0, 0.5) * kappa);  // d_zbar <-> i kappa / 2
            }
        }

    std::vector<Complex> f(N, 0.0), bf(N, 0.0), g(N), work(N);
    TorusSolution s;
    double prev = 0.0;
    bool converged = false;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Complex mean = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            g[k] = mu[k] * (1.0 + bf[k]);
            mean += g[k];
        }
        mean /= static_cast<double>(N);
        double change = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const Complex next = g[k] - mean;
            change = std::max(change, std::abs(next - f[k]));
            f[k] = next;
        }
        s.beta = mean;
        work = f;
        fft.forward(work);
        for (std::size_t k = 0; k < N; ++k) work[k] *= mult[k];
        fft.inverse(work);
        bf = work;
        s.iterations = it;
        if (prev > 0.0) s.contraction = change / prev;
        prev = change;
        if (change < opt.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("Beltrami contraction stalled after " + std::to_string(opt.max_iterations) +
                               " iterations; measured contraction factor " + std::to_string(s.contraction));

    // w from its d_zbar derivative
    work = f;
    fft.forward(work);
    for (std::size_t k = 0; k < N; ++k) work[k] *= inv_dzbar[k];
    fft.inverse(work);
    s.phi.resize(N);
    s.phi_z.resize(N);
    s.phi_zbar.resize(N);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const std::size_t k = std::size_t(j) * nx + i;
            const Complex z(x0 + i * lx / nx, y0 + j * ly / ny);
            s.phi[k] = z + s.beta * std::conj(z) + work[k];
            s.phi_z[k] = 1.0 + bf[k];
            s.phi_zbar[k] = s.beta + f[k];
        }
    return s;
}

inline double taper(double d) {
    // 1 at d = 0, 0 at d >= 1, C^1 cosine profile
    if (d <= 0.0) return 1.0;
    if (d >= 1.0) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * d);
    return c * c;
}

}  // namespace detail

inline ConformalFactorization solve_conformal(const MetricField& H, const ConformalOptions& opt = {}) {
    const GridChart& c = H.chart;
    c.validate(8);
    const auto bc = beltrami_coefficient(H);
    ConformalFactorization out;
    out.mu = bc.mu;
    out.sup_mu = bc.sup_abs;

    detail::TorusSolution sol;
    int pad_x = 0, pad_y = 0, NX = c.nx, NY = c.ny;
    if (c.periodic()) {
        sol = detail::solve_torus(bc.mu.values, c.nx, c.ny, c.lx, c.ly, c.x0, c.y0, opt);
    } else {
        pad_x = std::max(2, static_cast<int>(std::ceil(opt.margin_fraction * c.nx)));
        pad_y = std::max(2, static_cast<int>(std::ceil(opt.margin_fraction * c.ny)));
        NX = c.nx + 2 * pad_x;
        NY = c.ny + 2 * pad_y;
        std::vector<Complex> mu(std::size_t(NX) * NY);
        for (int J = 0; J < NY; ++J)
            for (int I = 0; I < NX; ++I) {
                const int i = I - pad_x, j = J - pad_y;
                const int ci = std::clamp(i, 0, c.nx - 1), cj = std::clamp(j, 0, c.ny - 1);
                const double dx = static_cast<double>(i - ci) / pad_x, dy = static_cast<double>(j - cj) / pad_y;
                mu[std::size_t(J) * NX + I] = bc.mu(ci, cj) * detail::taper(std::hypot(dx, dy));
            }
        sol = detail::solve_torus(mu, NX, NY, NX * c.hx(), NY * c.hy(), c.x0 - pad_x * c.hx(), c.y0 - pad_y * c.hy(), opt);
    }
    out.beta = sol.beta;
    out.iterations = sol.iterations;
    out.contraction = sol.contraction;

    out.phi1 = ScalarField(c);
    out.phi2 = ScalarField(c);
    out.grad1 = VectorField(c);
    out.grad2 = VectorField(c);
    out.theta = ScalarField(c);
    out.residual = MetricField(c);
    out.min_det = std::numeric_limits<double>::infinity();
    out.min_theta = std::numeric_limits<double>::infinity();
    for (int j = 0; j < c.ny; ++j)
        for (int i = 0; i < c.nx; ++i) {
            const std::size_t K = std::size_t(j + pad_y) * NX + (i + pad_x);
            const Complex pz = sol.phi_z[K], pzb = sol.phi_zbar[K];
            const Complex dx = pz + pzb, dy = Complex(0.0, 1.0) * (pz - pzb);
            const Vec2 g1{dx.real(), dy.real()}, g2{dx.imag(), dy.imag()};
            const double det = std::norm(pz) - std::norm(pzb);
            const double theta2 = std::sqrt(H(i, j).det()) / det;
            out.phi1(i, j) = sol.phi[K].real();
            out.phi2(i, j) = sol.phi[K].imag();
            out.grad1(i, j) = g1;
            out.grad2(i, j) = g2;
            out.theta(i, j) = theta2 > 0.0 ? std::sqrt(theta2) : 0.0;
            out.residual(i, j) = H(i, j) - (Sym2::outer(g1) + Sym2::outer(g2)) * theta2;
            out.residual_sup = std::max(out.residual_sup, magnitude(out.residual(i, j)));
            out.min_det = std::min(out.min_det, det);
            out.min_theta = std::min(out.min_theta, out.theta(i, j));
        }
    if (c.periodic()) {
        const Complex b = sol.beta;
        out.phi1.jump_x = c.lx * (1.0 + b.real());
        out.phi2.jump_x = c.lx * b.imag();
        out.phi1.jump_y = c.ly * b.imag();
        out.phi2.jump_y = c.ly * (1.0 - b.real());
    }
    if (!(out.min_det > 0.0)) throw ConvergenceError("conformal map is not orientation preserving (det D Phi <= 0)");
    if (out.residual_sup > opt.residual_tolerance)
        throw ConformalResidualError("isothermal residual " + std::to_string(out.residual_sup) + " above tolerance " +
                                         std::to_string(opt.residual_tolerance),
                                     out.residual);
    return out;
}

}  // namespace nkflex
