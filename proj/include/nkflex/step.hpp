/// @file step.hpp
/// @brief One corrugation step and a stage of successive steps.
///
/// A step adds one primitive metric rho^2 grad Phi (x) grad Phi to the pullback
/// of u, up to an error of order 1/lambda:
///   v = u + (1/lambda) (Gamma1(rho~, lambda Phi) xi + Gamma2(rho~, lambda Phi) zeta),
/// where xi, zeta are built from the map u~ mollified at scale 1/lambda.
#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nkflex/corrugation.hpp"
#include "nkflex/metric.hpp"
#include "nkflex/mollify.hpp"
#include "nkflex/norms.hpp"
#include "nkflex/primitive.hpp"

namespace nkflex {

struct StepParams {
    double lambda = 1.0;
    double epsilon = 1.0;
    double delta = 1.0;
    double nu = 1.0;
    double nu_tilde = 1.0;
    double M = 1.0;      ///< (1/M) <= |grad Phi| <= M
    double gamma = 2.0;  ///< (1/gamma) Id <= grad u^T grad u <= gamma Id
    double c0 = 0.0;     ///< lambda >= c0 (delta/epsilon)^{1/2} nu_tilde; 0 disables the check

    void validate() const {
        if (!(epsilon > 0.0 && epsilon <= delta && delta <= 1.0))
            throw PreconditionError("step amplitudes must satisfy 0 < epsilon <= delta <= 1");
        if (!(nu > 0.0 && nu <= nu_tilde)) throw PreconditionError("step scales must satisfy 0 < nu <= nu_tilde");
        if (!(lambda > 0.0)) throw PreconditionError("step frequency must be positive");
        if (c0 > 0.0 && lambda < c0 * std::sqrt(delta / epsilon) * nu_tilde)
            throw PreconditionError("frequency " + std::to_string(lambda) + " below c0 (delta/epsilon)^{1/2} nu_tilde = " +
                                    std::to_string(c0 * std::sqrt(delta / epsilon) * nu_tilde));
    }

    /// Ellipticity bound carried over to the new map.
    double gamma_bar() const { return std::max(2.0 * gamma, gamma + M * M + 1.0 / (2.0 * gamma)); }
};

/// Amplitudes in (-tolerance, 0) are round-off of a vanishing amplitude and
/// leave the map unchanged.
inline constexpr double negative_amplitude_tolerance = 1e-12;

struct StepOptions {
    int nodes_per_wavelength = 16;
    double max_condition = 1e6;
    int collar = 2;              ///< boundary cells excluded from defect norms on clamped charts
    bool compute_report = true;  ///< defect, norms and band audit
    std::optional<MetricField> target;  ///< metric g for a mid-stage shortness audit
};

struct StepOutcome {
    ImmersionField v;
    MetricField defect;   ///< grad v^T grad v - target
    NormReport diff_norms;  ///< of v - u
    NormReport v_norms;
    bool support_ok = true;     ///< v == u wherever every amplitude vanishes
    double sup_defect = 0.0;    ///< interior of the collar
    double c1_defect = 0.0;
    double gamma_bar = 0.0;
    bool band_ok = true;        ///< (1/gamma_bar) Id <= grad v^T grad v <= gamma_bar Id
    double min_eigenvalue = 0.0, max_eigenvalue = 0.0;
    std::vector<double> frequencies;
    double wall_time = 0.0;
};

namespace detail {

inline void check_resolution(const PrimitiveTerm& t, double lambda, int nodes_per_wavelength) {
    const GridChart& c = t.phase.chart;
    double gmax = 0.0;
    for (std::size_t k = 0; k < t.gradient.size(); ++k)
        if (t.amplitude[k] != 0.0) gmax = std::max(gmax, magnitude(t.gradient[k]));
    const double budget = 2.0 * std::numbers::pi / nodes_per_wavelength;
    if (lambda * gmax * c.h() > budget * (1.0 + 1e-12))
        throw PreconditionError("corrugation under-resolved: lambda*|grad Phi|*h = " + std::to_string(lambda * gmax * c.h()) +
                                " exceeds 2pi/" + std::to_string(nodes_per_wavelength));
    if (c.periodic()) {
        for (double j : {t.phase.jump_x, t.phase.jump_y}) {
            const double turns = lambda * j / (2.0 * std::numbers::pi);
            if (std::abs(turns - std::round(turns)) > 1e-9)
                throw PreconditionError("frequency " + std::to_string(lambda) + " incompatible with the torus lattice");
        }
    }
}

inline void fill_report(StepOutcome& out, const ImmersionField& u, const MetricField& target, const StepParams& p,
                        const StepOptions& opt) {
    const auto pv = pullback_metric(out.v);
    out.defect = pv - target;
    out.sup_defect = sup_norm_interior(out.defect, opt.collar);
    out.c1_defect = out.sup_defect + sup_norm_interior(gradient_magnitude(out.defect), opt.collar);
    out.diff_norms = norm_report(out.v - u, {}, opt.collar);
    out.v_norms = norm_report(out.v, {}, opt.collar);
    out.gamma_bar = p.gamma_bar();
    out.min_eigenvalue = std::numeric_limits<double>::infinity();
    out.max_eigenvalue = 0.0;
    for (const auto& m : pv.values) {
        const auto ev = m.eigenvalues();
        out.min_eigenvalue = std::min(out.min_eigenvalue, ev[0]);
        out.max_eigenvalue = std::max(out.max_eigenvalue, ev[1]);
    }
    out.band_ok = out.min_eigenvalue >= 1.0 / out.gamma_bar && out.max_eigenvalue <= out.gamma_bar;
}

}  // namespace detail

/// Corrugation step adding amplitude^2 grad Phi (x) grad Phi at frequency p.lambda.
inline StepOutcome step(const ImmersionField& u, const PrimitiveTerm& term, const StepParams& p,
                        const CorrugationTable& table, const StepOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    p.validate();
    const GridChart& c = u.chart;
    c.validate(8);
    require_same_chart(c, term.amplitude.chart, "step");
    detail::check_resolution(term, p.lambda, opt.nodes_per_wavelength);

    StepOutcome out;
    out.v = u;
    out.frequencies = {p.lambda};
    bool active = false;
    for (double a : term.amplitude.values) active |= a != 0.0;
    if (active) {
        const auto ut = mollify(u, 1.0 / p.lambda, EdgeMode::reflect_odd);
        const auto du = jacobian(ut);
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double rho = term.amplitude[k];
            if (rho == 0.0) continue;
            // FFT-mollified non-negative amplitudes carry round-off of either sign
            if (rho < 0.0) {
                if (rho > -negative_amplitude_tolerance) continue;
                throw PreconditionError("negative corrugation amplitude " + std::to_string(rho) + " at node " +
                                        std::to_string(k));
            }
            const Vec3 d1 = du.d1[k], d2 = du.d2[k];
            const Sym2 G = Jacobian{d1, d2}.gram();
            const auto ev = G.eigenvalues();
            if (!(ev[0] > 0.0) || ev[1] / ev[0] > opt.max_condition)
                throw PreconditionError("mollified Jacobian near-singular at node " + std::to_string(k) +
                                        " (condition " + std::to_string(ev[1] / ev[0]) + ")");
            const Vec2 a = G.inverse().apply(term.gradient[k]);
            const Vec3 xi_t = d1 * a.x + d2 * a.y;
            const double nxi = magnitude(xi_t);
            const Vec3 zeta_t = cross(d1, d2);
            const Vec3 xi = xi_t * (1.0 / (nxi * nxi));
            const Vec3 zeta = zeta_t * (1.0 / (magnitude(zeta_t) * nxi));
            const double s = nxi * rho;
            if (s > table.s_max())
                throw PreconditionError("corrugation amplitude " + std::to_string(s) + " exceeds table s_max " +
                                        std::to_string(table.s_max()) + ": use a larger table or a smaller epsilon");
            const auto g = table.gamma(s, p.lambda * term.phase[k]);
            out.v[k] += (xi * g[0] + zeta * g[1]) * (1.0 / p.lambda);
        }
    }
    for (std::size_t k = 0; k < u.size(); ++k)
        if (term.amplitude[k] == 0.0 && !(out.v[k].x == u[k].x && out.v[k].y == u[k].y && out.v[k].z == u[k].z))
            out.support_ok = false;
    if (opt.compute_report) {
        auto target = pullback_metric(u);
        for (std::size_t k = 0; k < target.size(); ++k) target[k] += term.metric_at(k);
        detail::fill_report(out, u, target, p, opt);
    }
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct StageParams {
    double K = 16.0;       ///< frequency growth factor between successive terms
    double kappa = 1.5;    ///< mollification exponent, l = lambda^{-kappa}
    double c1 = 0.0;       ///< K > c1 nu_tilde / nu; 0 disables the check
    double quantum = 0.0;  ///< round frequencies to multiples of this (torus lattice); 0 = no rounding

    double ell(double lambda) const { return std::pow(lambda, -kappa); }
};

/// Frequencies lambda * K^{k-1}, rounded to the lattice quantum when given.
inline std::vector<double> stage_frequencies(double lambda, const StageParams& s, std::size_t n) {
    std::vector<double> f;
    double l = lambda;
    for (std::size_t k = 0; k < n; ++k, l *= s.K)
        f.push_back(s.quantum > 0.0 ? std::max(1.0, std::round(l / s.quantum)) * s.quantum : l);
    return f;
}

/// Successive steps adding sum_k rho_k^2 grad Phi_k (x) grad Phi_k.
inline StepOutcome stage(const ImmersionField& u, const std::vector<PrimitiveTerm>& terms, const StepParams& p,
                         const StageParams& s, const CorrugationTable& table, const StepOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    if (s.c1 > 0.0 && !(s.K > s.c1 * p.nu_tilde / p.nu))
        throw PreconditionError("stage growth factor K must exceed c1 nu_tilde / nu");
    const auto freqs = stage_frequencies(p.lambda, s, terms.size());
    StepOutcome out;
    out.v = u;
    out.frequencies = freqs;
    StepOptions inner = opt;
    inner.compute_report = false;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        StepParams pk = p;
        pk.lambda = freqs[k];
        pk.c0 = 0.0;
        auto r = step(out.v, terms[k], pk, table, inner);
        out.v = std::move(r.v);
        if (opt.target) {
            const auto sh = check_short(out.v, *opt.target);
            if (sh.classification == Shortness::not_short)
                throw AssertionFailure("shortness lost after stage term " + std::to_string(k + 1) + " of " +
                                       std::to_string(terms.size()) + " (min eigenvalue " + std::to_string(sh.min_margin) + ")");
        }
    }
    for (std::size_t k = 0; k < u.size(); ++k) {
        bool quiet = true;
        for (const auto& t : terms) quiet &= t.amplitude[k] == 0.0;
        if (quiet && !(out.v[k].x == u[k].x && out.v[k].y == u[k].y && out.v[k].z == u[k].z)) out.support_ok = false;
    }
    if (opt.compute_report) {
        auto target = pullback_metric(u);
        target += primitive_sum(u.chart, terms);
        detail::fill_report(out, u, target, p, opt);
    }
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace nkflex
