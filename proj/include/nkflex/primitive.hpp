/// @file primitive.hpp
/// @brief Primitive metrics a^2 grad(Phi) (x) grad(Phi) and the two routes
/// that produce them: a finite frame, or conformal coordinates.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nkflex/conformal.hpp"
#include "nkflex/frame.hpp"

namespace nkflex {

struct PrimitiveTerm {
    ScalarField amplitude;  ///< a >= 0
    ScalarField phase;      ///< Phi; quasi-periodic on a torus
    VectorField gradient;   ///< grad Phi

    Sym2 metric_at(std::size_t k) const { return Sym2::outer(gradient[k]) * (amplitude[k] * amplitude[k]); }
};

/// Sum of the primitive metrics carried by a list of terms.
inline MetricField primitive_sum(const GridChart& c, const std::vector<PrimitiveTerm>& terms) {
    MetricField out(c);
    for (const auto& t : terms)
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += t.metric_at(k);
    return out;
}

/// Linear coordinate Phi(x) = d . x, quasi-periodic on a torus.
inline PrimitiveTerm linear_term(const ScalarField& amplitude, const Vec2& d) {
    const GridChart& c = amplitude.chart;
    PrimitiveTerm t{amplitude, ScalarField::generate(c, [&](double x, double y) { return d.x * x + d.y * y; }),
                    VectorField(c, d)};
    if (c.periodic()) {
        t.phase.jump_x = d.x * c.lx;
        t.phase.jump_y = d.y * c.ly;
    }
    return t;
}

/// Frame route: D = sum_i L_i(D) xi_i (x) xi_i with Phi_i = xi_i . x.
/// Every coefficient must be non-negative at every node.
inline std::vector<PrimitiveTerm> frame_terms(const PrimitiveFrame& frame, const MetricField& D) {
    if (frame.n != 2) throw PreconditionError("grid decomposition needs a 2-D frame");
    std::vector<ScalarField> amp(3, ScalarField(D.chart));
    for (std::size_t k = 0; k < D.size(); ++k) {
        const auto c = frame.coefficients(D[k]);
        for (int i = 0; i < 3; ++i) {
            if (c[i] < 0.0)
                throw PreconditionError("negative frame coefficient " + std::to_string(c[i]) + " at node " + std::to_string(k));
            amp[i][k] = std::sqrt(c[i]);
        }
    }
    std::vector<PrimitiveTerm> terms;
    for (int i = 0; i < 3; ++i) terms.push_back(linear_term(amp[i], frame.direction2(i)));
    return terms;
}

/// Conformal route: rho^2 H = (rho theta)^2 (grad Phi1 (x) grad Phi1 + grad Phi2 (x) grad Phi2).
///
/// On a clamped chart the two conformal coordinates are used directly.  On a
/// torus the corrugation phase lambda*Phi must be 2pi-periodic, so the affine
/// part P of Phi is factored out: with Phi' = P^{-1} Phi (linear part = x) and
/// Q = P^T P = a e1e1 + b e2e2 + c eta eta^T, eta = e1 +- e2, we get up to
/// three terms whose phases have integer lattice slopes.
inline std::vector<PrimitiveTerm> conformal_terms(const ConformalFactorization& f, const ScalarField& rho) {
    const GridChart& c = rho.chart;
    const auto amp = zip(rho, f.theta, [](double r, double t) { return r * t; });
    std::vector<PrimitiveTerm> terms;
    if (!c.periodic()) {
        terms.push_back({amp, f.phi1, f.grad1});
        terms.push_back({amp, f.phi2, f.grad2});
        return terms;
    }
    const double br = f.beta.real(), bi = f.beta.imag();
    const Sym2 P{1.0 + br, bi, 1.0 - br};
    const Sym2 Pi = P.inverse();
    const Sym2 Q{P.xx * P.xx + P.xy * P.xy, P.xx * P.xy + P.xy * P.yy, P.xy * P.xy + P.yy * P.yy};
    const double cc = std::abs(Q.xy), sgn = Q.xy >= 0.0 ? 1.0 : -1.0;
    const double a = Q.xx - cc, b = Q.yy - cc;
    if (a < 0.0 || b < 0.0) throw PreconditionError("conformal affine part too sheared for a lattice split");

    ScalarField p1(c), p2(c);
    VectorField g1(c), g2(c);
    for (std::size_t k = 0; k < rho.size(); ++k) {
        p1[k] = Pi.xx * f.phi1[k] + Pi.xy * f.phi2[k];
        p2[k] = Pi.xy * f.phi1[k] + Pi.yy * f.phi2[k];
        g1[k] = f.grad1[k] * Pi.xx + f.grad2[k] * Pi.xy;
        g2[k] = f.grad1[k] * Pi.xy + f.grad2[k] * Pi.yy;
    }
    // P^{-1} maps the jumps of Phi to the lattice periods exactly
    p1.jump_x = c.lx;
    p1.jump_y = 0.0;
    p2.jump_x = 0.0;
    p2.jump_y = c.ly;
    auto scaled = [&](double s) { return map(amp, [s](double v) { return v * std::sqrt(s); }); };
    // coefficients at round-off level would only waste a frequency slot
    const double negligible = 1e-12 * (Q.xx + Q.yy);
    if (a > negligible) terms.push_back({scaled(a), p1, g1});
    if (b > negligible) terms.push_back({scaled(b), p2, g2});
    if (cc > negligible) {
        auto p3 = p1 + sgn * p2;
        auto g3 = g1 + sgn * g2;
        terms.push_back({scaled(cc), p3, g3});
    }
    return terms;
}

}  // namespace nkflex
