/// @file induction.hpp
/// @brief Adapted short immersions and the inductive pass that makes them
/// isometric on a larger skeleton, plus the skeleton-by-skeleton driver.
///
/// A state (u, rho, h) satisfies g - u#e = rho^2 (g + h).  One pass walks the
/// level ladder q = 0, 1, ...: at level q the amplitude is lowered to
/// delta_{q+2}^{1/2} inside a tube around the target skeleton Sigma (where the
/// starting amplitude is large enough), by adding the metric
/// chi^2 (rho_q^2 - delta_{q+2}) g + chi~ rho_q^2 h_q with one corrugation stage.
///
/// The schedule frequencies are far beyond any grid, so the realized pass
/// uses capped frequencies and tube radii truncated from below; every level
/// records both the schedule and the realized values.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nkflex/add_metric.hpp"
#include "nkflex/cutoff.hpp"
#include "nkflex/schedule.hpp"
#include "nkflex/skeleton.hpp"

namespace nkflex {

struct AdaptedState {
    ImmersionField u;
    ScalarField rho;
    MetricField h;
    MetricField g;
    SkeletonSet sigma;  ///< where the state is adapted (empty before the first pass)
    SymbolicPower A;
    Rational theta, alpha;
};

struct InductionOptions {
    int depth = 4;
    double avoid = 1.0;               ///< r_**: relative radius of the tube around S kept clear
    double radius_floor_cells = 3.0;  ///< inner tube radius at the deepest level, in cells
    double radius_floor = 0.0;        ///< absolute floor of the level radii; 0 derives it from this pass alone
    double lambda_scale = 1.0;        ///< stage frequency parameter = lambda_scale * lambda_{q+2}
    double c0 = 1.0 / 32.0;           ///< first stage frequency c0 lambda^kappa
    double c1 = 32.0;                 ///< stage growth factor c1 lambda^{kappa - 1}
    double cbar = 10.0;               ///< constant of the displacement estimates
    double amplitude_floor = 0.0;     ///< stop when delta_{q+2}^{1/2} falls below; 0 selects 32 h / lambda_ceiling
    bool strict = true;               ///< throw at the first failed estimate
    int nodes_per_wavelength = 16;
    int collar = 2;                   ///< boundary cells excluded from derivative estimates on clamped charts
    int halo = 2;                     ///< stencil reach around the cut-off support
    double holder_exponent = 0.0;     ///< exponent of the Hölder probe on grad u; 0 disables it
};

/// One failed estimate.
struct EstimateFailure {
    int pass = 0;
    int q = 0;
    std::string estimate;
    int i = -1, j = -1;
    double value = 0.0, bound = 0.0;
    std::size_t count = 1;  ///< nodes at which the same estimate failed (worst one kept)

    std::string describe() const {
        std::ostringstream s;
        s << "pass " << pass << ", q = " << q << ": " << estimate;
        if (i >= 0) s << " at node (" << i << ", " << j << ")";
        s << ": " << value << " vs bound " << bound;
        if (count > 1) s << " (" << count << " nodes)";
        return s.str();
    }
};

/// Per-level record of a pass (iterate q = index of the new state).
struct LevelRecord {
    int pass = 0;
    int q = 0;
    double delta = 0.0;       ///< delta_{q+1}, the new amplitude level inside the tube
    double log_lambda = 0.0;  ///< ln lambda_{q+1} of the schedule
    double lambda_used = 0.0, ell = 0.0, first_frequency = 0.0, growth = 0.0;
    bool capped = false;
    double radius = 0.0, radius_schedule = 0.0;
    bool radius_truncated = false;
    std::size_t components = 0;
    std::size_t support_nodes = 0;
    double grad_chi = 0.0, grad_chi_wide = 0.0, grad_chi_scale = 0.0;  ///< scale = A delta_{q+2}^{-1/(2 theta)}
    double admissible_avoid = std::numeric_limits<double>::infinity();
    double sup_defect = 0.0;  ///< sup |g - u#e| / sup |g|
    double sup_error = 0.0;   ///< sup |E|
    double rho_min = 0.0, rho_max = 0.0;
    double h_sup = 0.0;      ///< max relative eigenvalue of h
    double min_margin = 0.0; ///< min eigenvalue of g - u#e
    double residual = 0.0;   ///< factorization residual
    double displacement = 0.0, displacement_c1 = 0.0, cbar_measured = 0.0;
    double holder_probe = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> notes;  ///< unmet hypotheses of the metric-adding stage (informational)
    std::vector<EstimateFailure> failures;
    bool assertions_passed() const { return failures.empty(); }
    double wall_time = 0.0;

    /// A level whose stage could not be built has no measurements.
    void mark_unmeasured() {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        sup_defect = sup_error = rho_min = rho_max = h_sup = min_margin = residual = nan;
        displacement = displacement_c1 = cbar_measured = nan;
    }
};

struct PassResult {
    AdaptedState state;
    Schedule schedule;
    TubeRadii radii;
    std::vector<LevelRecord> levels;
    int levels_completed = 0;
    std::string truncation;  ///< why the ladder stopped before the configured depth (empty if it did not)
    double admissible_avoid = std::numeric_limits<double>::infinity();
    double displacement = 0.0;  ///< |u_final - u_start|_0
};

/// rho_{q+1}^2 = rho_q^2 (1 - chi^2) + delta chi^2.
inline ScalarField update_rho(const ScalarField& rho, const ScalarField& chi, double delta) {
    require_same_chart(rho.chart, chi.chart, "update_rho");
    ScalarField out(rho.chart);
    for (std::size_t k = 0; k < rho.size(); ++k) {
        const double c2 = chi[k] * chi[k];
        out[k] = c2 == 0.0 ? rho[k] : c2 == 1.0 ? std::sqrt(delta) : std::sqrt(rho[k] * rho[k] * (1.0 - c2) + delta * c2);
    }
    return out;
}

namespace detail {

inline double sup_relative_eigen(const MetricField& h, const MetricField& g) {
    double m = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const auto ev = relative_eigenvalues(h[k], g[k]);
        m = std::max({m, std::abs(ev[0]), std::abs(ev[1])});
    }
    return m;
}

inline bool interior(const GridChart& c, std::size_t k, int collar) {
    if (c.periodic()) return true;
    const int i = static_cast<int>(k % c.nx), j = static_cast<int>(k / c.nx);
    return i >= collar && j >= collar && i < c.nx - collar && j < c.ny - collar;
}

/// Mask dilated by `cells` in the max norm (wrapping on periodic charts).
inline std::vector<bool> dilate(const GridChart& c, const std::vector<bool>& mask, int cells) {
    std::vector<bool> out = mask;
    for (int j = 0; j < c.ny; ++j)
        for (int i = 0; i < c.nx; ++i) {
            if (!mask[c.index(i, j)]) continue;
            for (int dj = -cells; dj <= cells; ++dj)
                for (int di = -cells; di <= cells; ++di) {
                    int ii = i + di, jj = j + dj;
                    if (c.periodic()) {
                        ii = (ii % c.nx + c.nx) % c.nx;
                        jj = (jj % c.ny + c.ny) % c.ny;
                    } else if (ii < 0 || jj < 0 || ii >= c.nx || jj >= c.ny) {
                        continue;
                    }
                    out[c.index(ii, jj)] = true;
                }
        }
    return out;
}

inline double ellipticity(const MetricField& g) {
    double gamma = 1.0;
    for (const auto& m : g.values) {
        const auto ev = m.eigenvalues();
        gamma = std::max({gamma, ev[1], 1.0 / ev[0]});
    }
    return gamma;
}

inline double holder_probe(const ImmersionField& u, double exponent) {
    const auto du = jacobian(u);
    return std::max(holder_seminorm(du.d1, exponent), holder_seminorm(du.d2, exponent));
}

}  // namespace detail

/// Largest amplitude-level floor the grid resolves: 32 h / lambda_ceiling with
/// lambda_ceiling = 2 pi / (nodes_per_wavelength h).
inline double default_amplitude_floor(const GridChart& c, int nodes_per_wavelength) {
    const double ceiling = 2.0 * std::numbers::pi / (nodes_per_wavelength * c.h());
    return 32.0 * c.h() / ceiling;
}

/// One pass: from a state adapted to S = state.sigma to a state adapted to sigma.
using LevelCallback = std::function<void(const LevelRecord&)>;

/// `top_frequency` is the highest corrugation frequency already present in
/// state.u; it is updated as the ladder proceeds.
inline PassResult inductive_pass(const AdaptedState& state, const SkeletonSet& sigma, const InductionOptions& opt,
                                 const CorrugationTable& table, int pass_index = 1, const LevelCallback& on_level = {},
                                 double* top_frequency_io = nullptr) {
    const GridChart& c = state.u.chart;
    require_same_chart(c, state.rho.chart, "inductive_pass");
    require_same_chart(c, state.h.chart, "inductive_pass");
    require_same_chart(c, state.g.chart, "inductive_pass");
    PassResult out;
    const double rho_sup = sup_norm(state.rho);
    if (!(rho_sup > 0.0)) throw PreconditionError("inductive pass needs a positive amplitude somewhere");
    if (rho_sup > 0.25 + 1e-15) throw PreconditionError("inductive pass needs rho <= 1/4 (sup rho = " + std::to_string(rho_sup) + ")");
    const double delta1 = rho_sup * rho_sup;
    out.schedule = build_schedule(state.A, state.theta, state.alpha, delta1, 2, opt.depth);
    const Schedule& sc = out.schedule;
    const double b = sc.b, th = sc.theta, al = sc.alpha, logA = state.A.log_value();

    const SkeletonSet& S = state.sigma;
    const ScalarField dist_sigma = sigma.level == SkeletonLevel::whole ? ScalarField(c, 0.0) : sigma.distance_field(c);
    const ScalarField dist_S = S.empty() ? ScalarField(c, std::numeric_limits<double>::infinity()) : S.distance_field(c);
    const std::vector<int> feature = sigma.feature_field(c);
    const std::vector<std::size_t> s_nodes = S.nodes_on(c);
    out.radii = TubeRadii::from(separation_constant(sigma), opt.avoid);
    const TubeRadii& R = out.radii;
    const double r_floor = opt.radius_floor > 0.0 ? opt.radius_floor : opt.radius_floor_cells * c.h() / R.inner;
    auto realized_radius = [&](int q) { return std::max(sc.radius(q), r_floor * std::pow(2.0, opt.depth - q)); };
    const double floor = opt.amplitude_floor > 0.0 ? opt.amplitude_floor : default_amplitude_floor(c, opt.nodes_per_wavelength);
    const double gamma = detail::ellipticity(state.g);
    const double gnorm = sup_norm(state.g);

    const ScalarField& rho0 = state.rho;
    const ImmersionField u_start = state.u;
    AdaptedState cur = state;
    std::vector<bool> touched(c.size(), false);  // union of supp chi~_j so far
    double top_frequency = top_frequency_io ? *top_frequency_io : 0.0;

    for (int q = 0; q < opt.depth; ++q) {
        const auto t0 = std::chrono::steady_clock::now();
        const double dn = sc.delta_at(q + 2), dc = sc.delta_at(q + 1);
        const double sdn = std::sqrt(dn), sdc = std::sqrt(dc);
        if (sdn < floor) {
            out.truncation = "amplitude level " + std::to_string(sdn) + " below the resolvable floor " + std::to_string(floor);
            break;
        }
        LevelRecord rec;
        rec.pass = pass_index;
        rec.q = q + 1;
        rec.delta = dn;
        rec.log_lambda = sc.log_lambda[q + 2];
        rec.radius_schedule = sc.radius(q + 1);
        rec.radius = realized_radius(q + 1);
        rec.radius_truncated = rec.radius > rec.radius_schedule;
        const double r = rec.radius;

        std::map<std::string, std::size_t> seen;
        auto fail = [&](const std::string& what, std::size_t node, double value, double bound) {
            if (!opt.strict) {
                if (auto it = seen.find(what); it != seen.end()) {
                    EstimateFailure& f = rec.failures[it->second];
                    ++f.count;
                    if (std::abs(value - bound) > std::abs(f.value - f.bound)) {
                        f.value = value;
                        f.bound = bound;
                        if (node < c.size()) f.i = static_cast<int>(node % c.nx), f.j = static_cast<int>(node / c.nx);
                    }
                    return;
                }
                seen[what] = rec.failures.size();
            }
            EstimateFailure f;
            f.pass = pass_index;
            f.q = q + 1;
            f.estimate = what;
            if (node < c.size()) {
                f.i = static_cast<int>(node % c.nx);
                f.j = static_cast<int>(node / c.nx);
            }
            f.value = value;
            f.bound = bound;
            if (opt.strict) throw AssertionFailure(f.describe());
            rec.failures.push_back(f);
        };

        const CutoffPair cut = make_cutoffs(rho0, dist_sigma, dn, r, R);
        rec.grad_chi = cut.grad_chi;
        rec.grad_chi_wide = cut.grad_chi_wide;
        rec.grad_chi_scale = std::exp(logA - std::log(dn) / (2.0 * th));
        if (!cut.nested) fail("cut-off nesting supp chi within {chi~ = 1}", c.size(), static_cast<double>(cut.nest_failures), 0.0);

        // Clearance from S: the largest r_** for which rho > (3/2) delta^{1/2}
        // forces dist(x, S) >= r_** r at every node (logged, not enforced).
        if (!S.empty()) {
            double adm = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < c.size(); ++k)
                if (rho0[k] > 1.5 * sdn) adm = std::min(adm, dist_S[k] / r);
            rec.admissible_avoid = adm;
            out.admissible_avoid = std::min(out.admissible_avoid, adm);
            bool reaches = false;
            for (std::size_t k : s_nodes) reaches |= cut.chi_wide[k] > 0.0;
            if (reaches) {
                out.truncation = "cut-offs of level " + std::to_string(q + 1) + " reach the previous skeleton";
                break;
            }
        }

        // Each connected piece of supp chi~ must sit around a single feature of sigma.
        std::vector<bool> support(c.size());
        for (std::size_t k = 0; k < c.size(); ++k) support[k] = cut.chi_wide[k] > 0.0;
        const auto comps = connected_components(c, support);
        rec.components = static_cast<std::size_t>(comps.count);
        {
            std::vector<int> owner(static_cast<std::size_t>(comps.count), -1);
            for (std::size_t k = 0; k < c.size(); ++k) {
                const int id = comps.label[k];
                if (id < 0) continue;
                ++rec.support_nodes;
                if (owner[id] == -1) owner[id] = feature[k];
                else if (owner[id] != feature[k]) {
                    fail("geometric condition: a cut-off component meets two skeleton features", k, owner[id], feature[k]);
                    owner[id] = feature[k];
                }
            }
        }

        // Amplitude recursion: part (i) on supp chi~, (iii) and (iv) at the current level.
        for (std::size_t k = 0; k < c.size(); ++k) {
            const double rk = cur.rho[k];
            if (support[k]) {
                if (rk < 1.5 * sdn * (1 - 1e-12)) fail("amplitude band: rho_q >= (3/2) delta_{q+2}^{1/2}", k, rk, 1.5 * sdn);
                if (rk > 2.0 * sdc * (1 + 1e-12)) fail("amplitude band: rho_q <= 2 delta_{q+1}^{1/2}", k, rk, 2.0 * sdc);
            }
            if (rk < sdc) {
                if (rk != rho0[k] || touched[k]) fail("low amplitude only where untouched (rho_q = rho_0)", k, rk, rho0[k]);
            } else if (cut.chi[k] != 1.0 && dist_sigma[k] < R.inner * r) {
                fail("high amplitude inside the inner tube needs chi_q = 1", k, cut.chi[k], 1.0);
            }
        }

        // Metric to add: chi^2 (rho^2 - delta) g + chi~ rho^2 h.
        ScalarField amp(c, 0.0);
        MetricField hh(c);
        for (std::size_t k = 0; k < c.size(); ++k) {
            const double r2 = cur.rho[k] * cur.rho[k];
            if (cut.chi[k] > 0.0) amp[k] = cut.chi[k] * std::sqrt(std::max(r2 - dn, 0.0));
            if (cut.chi_wide[k] > 0.0 && r2 > dn) hh[k] = cur.h[k] * (cut.chi_wide[k] * r2 / (r2 - dn));
        }
        MetricAddParams mp;
        mp.delta = std::max(sup_norm(amp) * sup_norm(amp), 1e-300);
        mp.lambda = opt.lambda_scale * std::exp(sc.log_lambda[q + 2]);
        mp.kappa = sc.kappa;
        mp.alpha = al;
        mp.gamma = gamma;
        mp.c0 = opt.c0;
        mp.c1 = opt.c1;
        mp.strict = false;
        mp.cap_frequencies = true;
        StepOptions so;
        so.nodes_per_wavelength = opt.nodes_per_wavelength;
        so.collar = opt.collar;
        so.compute_report = false;
        MetricAddOutcome add;
        try {
            add = add_metric_2d(cur.u, amp, cur.g, hh, mp, table, so);
        } catch (const Error& e) {
            if (opt.strict) throw;
            fail(std::string("stage could not be built: ") + e.what(), c.size(), 0.0, 0.0);
            out.truncation = "stage of level " + std::to_string(q + 1) + " failed";
            rec.mark_unmeasured();
            if (on_level) on_level(rec);
            out.levels.push_back(std::move(rec));
            break;
        }
        // The stage moves supp chi widened by the mollification length; a level
        // whose moved set would reach S is not applied.
        if (!s_nodes.empty()) {
            std::vector<bool> moving(c.size());
            for (std::size_t k = 0; k < c.size(); ++k) moving[k] = cut.chi[k] > 0.0;
            moving = detail::dilate(c, moving, static_cast<int>(std::ceil(add.ell / std::sqrt(2.0) / c.h())));
            bool reaches = false;
            for (std::size_t k : s_nodes) reaches |= moving[k];
            if (reaches) {
                out.truncation = "level " + std::to_string(q + 1) + " would move the previous skeleton (mollification length " +
                                 std::to_string(add.ell) + ")";
                break;
            }
        }
        if (add.first_frequency < 2.0 * top_frequency)
            rec.notes.push_back("realized frequencies out of order: first frequency " + std::to_string(add.first_frequency) +
                                " below twice the previous top frequency " + std::to_string(top_frequency));
        if (!add.stage.frequencies.empty()) top_frequency = std::max(top_frequency, add.stage.frequencies.back());
        rec.notes.insert(rec.notes.end(), add.violations.begin(), add.violations.end());
        rec.lambda_used = add.lambda_used;
        rec.ell = add.ell;
        rec.first_frequency = add.first_frequency;
        rec.growth = add.growth;
        rec.capped = add.capped;

        AdaptedState nxt = cur;
        nxt.u = add.stage.v;
        const MetricField pu_old = pullback_metric(cur.u), pu_new = pullback_metric(nxt.u);
        nxt.rho = update_rho(cur.rho, cut.chi, dn);
        MetricField E(c);
        for (std::size_t k = 0; k < c.size(); ++k) {
            const double c2 = cut.chi[k] * cut.chi[k];
            const Sym2& gk = cur.g[k];
            E[k] = gk - pu_new[k] - (gk - pu_old[k]) * (1.0 - c2) - gk * (dn * c2);
            const double r2 = cur.rho[k] * cur.rho[k], n2 = nxt.rho[k] * nxt.rho[k];
            if (n2 > 0.0) nxt.h[k] = (cur.h[k] * ((1.0 - c2) * r2) + E[k]) * (1.0 / n2);
        }
        rec.sup_error = sup_norm_interior(E, opt.collar);

        // (1) factorization, shortness, strong shortness.
        double resid = 0.0, margin = std::numeric_limits<double>::infinity(), defect = 0.0;
        std::size_t worst_resid = 0, worst_margin = 0;
        for (std::size_t k = 0; k < c.size(); ++k) {
            const Sym2 d = cur.g[k] - pu_new[k];
            const double rk = magnitude(d - (cur.g[k] + nxt.h[k]) * (nxt.rho[k] * nxt.rho[k]));
            if (rk > resid) resid = rk, worst_resid = k;
            const double m = d.min_eigenvalue();
            if (m < margin) margin = m, worst_margin = k;
            if (detail::interior(c, k, opt.collar)) defect = std::max(defect, magnitude(d));
        }
        rec.residual = resid;
        rec.min_margin = margin;
        rec.sup_defect = defect / gnorm;
        if (!(resid < 1e-9)) fail("factorization g - u#e = rho^2 (g + h)", worst_resid, resid, 1e-9);
        if (!(margin > 0.0)) fail("shortness g - u#e > 0", worst_margin, margin, 0.0);
        rec.h_sup = detail::sup_relative_eigen(nxt.h, cur.g);
        {
            double worst = 0.0;
            std::size_t wk = 0;
            for (std::size_t k = 0; k < c.size(); ++k) {
                const auto ev = relative_eigenvalues(nxt.h[k], cur.g[k]);
                const double m = std::max(std::abs(ev[0]), std::abs(ev[1]));
                if (m > worst) worst = m, wk = k;
            }
            if (worst > 0.5) fail("strong shortness |h| <= g/2", wk, worst, 0.5);
        }

        // Amplitude recursion (ii): rho never grows.
        for (std::size_t k = 0; k < c.size(); ++k)
            if (nxt.rho[k] > cur.rho[k]) fail("amplitude monotone rho_{q+1} <= rho_q", k, nxt.rho[k], cur.rho[k]);
        rec.rho_min = *std::min_element(nxt.rho.values.begin(), nxt.rho.values.end());
        rec.rho_max = *std::max_element(nxt.rho.values.begin(), nxt.rho.values.end());

        // (2) nothing moves outside supp chi~; h is untouched beyond the stencil halo.
        {
            const auto near = detail::dilate(c, support, opt.halo);
            for (std::size_t k = 0; k < c.size(); ++k) {
                if (support[k]) continue;
                const Vec3 du = nxt.u[k] - cur.u[k];
                if (du.x != 0.0 || du.y != 0.0 || du.z != 0.0)
                    fail("unchanged outside supp chi~ (u)", k, magnitude(du), 0.0);
                if (nxt.rho[k] != cur.rho[k]) fail("unchanged outside supp chi~ (rho)", k, nxt.rho[k], cur.rho[k]);
                if (!near[k] && magnitude(nxt.h[k] - cur.h[k]) > 1e-14 * (1.0 + magnitude(cur.h[k])))
                    fail("unchanged outside supp chi~ (h)", k, magnitude(nxt.h[k] - cur.h[k]), 0.0);
            }
            for (std::size_t k : s_nodes) {
                const Vec3 du = nxt.u[k] - u_start[k];
                if (du.x != 0.0 || du.y != 0.0 || du.z != 0.0) fail("u fixed on the previous skeleton", k, magnitude(du), 0.0);
            }
        }

        // (3) global and (4) inner-zone derivative estimates.
        {
            const ScalarField hu = hessian_magnitude(nxt.u), gr = gradient_magnitude(nxt.rho), gh = gradient_magnitude(nxt.h);
            const double b2 = b * b;
            const double in_zone = R.inner * r;
            for (std::size_t k = 0; k < c.size(); ++k) {
                if (!detail::interior(c, k, opt.collar)) continue;
                const double lr = std::log(nxt.rho[k]);
                const double hk = magnitude(nxt.h[k]);
                auto check = [&](const char* what, double v, double logbound) {
                    if (v > 0.0 && std::log(v) > logbound + 1e-12) fail(what, k, v, std::exp(logbound));
                };
                check("global estimate |grad^2 u|", hu[k], b2 * logA + (1.0 - b2 / th) * lr);
                check("global estimate |grad rho|", gr[k], b2 * logA + (1.0 - b2 / th) * lr);
                check("global estimate |h|", hk, -th * al / (2 * b2) * logA + al / (2 * b2) * lr);
                check("global estimate |grad h|", gh[k], (b2 - th * al / (2 * b2)) * logA + (al / (2 * b2) - b2 / th) * lr);
                if (rho0[k] > sdn && dist_sigma[k] < in_zone) {
                    check("inner estimate |grad^2 u|", hu[k], b * logA + (1.0 - b / th) * lr);
                    check("inner estimate |grad rho|", gr[k], b * logA + (1.0 - b / th) * lr);
                    check("inner estimate |h|", hk, -th * al / b * logA + al / b * lr);
                    check("inner estimate |grad h|", gh[k], (b - th * al / b) * logA + (al / b - b / th) * lr);
                }
            }
        }

        // Displacement at the realized frequency.
        {
            const ImmersionField d = nxt.u - cur.u;
            rec.displacement = sup_norm(d);
            rec.displacement_c1 = rec.displacement + sup_norm_interior(gradient_magnitude(d), opt.collar);
            const double lam = std::max(add.first_frequency, 1e-300);
            rec.cbar_measured = std::max(rec.displacement * lam / sdc, rec.displacement_c1 / sdc);
            if (rec.displacement > opt.cbar * sdc / lam)
                fail("displacement |u_q - u_{q-1}|_0 <= C delta^{1/2} / lambda", c.size(), rec.displacement, opt.cbar * sdc / lam);
            if (rec.displacement_c1 > opt.cbar * sdc)
                fail("displacement |u_q - u_{q-1}|_1 <= C delta^{1/2}", c.size(), rec.displacement_c1, opt.cbar * sdc);
        }
        if (opt.holder_exponent > 0.0) rec.holder_probe = detail::holder_probe(nxt.u, opt.holder_exponent);

        for (std::size_t k = 0; k < c.size(); ++k) touched[k] = touched[k] || support[k];
        cur = std::move(nxt);
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_level) on_level(rec);
        out.levels.push_back(std::move(rec));
        ++out.levels_completed;
    }

    out.state = std::move(cur);
    out.state.sigma = sigma;
    out.state.A = state.A.pow(sc.law.b_squared);
    out.state.theta = sc.law.theta_next;
    out.state.alpha = sc.law.alpha_next;
    out.displacement = sup_norm(out.state.u - u_start);
    if (top_frequency_io) *top_frequency_io = top_frequency;
    return out;
}

/// Inputs of the skeleton-by-skeleton construction.
struct GlobalConfig {
    SymbolicPower A{64, 1};
    Rational theta{3, 20};
    Rational alpha{1, 10};
    std::optional<Rational> target_theta;  ///< required final exponent
    std::vector<SkeletonSet> skeleta;      ///< Sigma_1, Sigma_2, ... (the last one is usually the whole chart)
    InductionOptions pass;
    BootstrapParams bootstrap;
    double delta_cap = 1.0 / 16.0;  ///< keeps the starting amplitude within rho <= 1/4
    /// Later passes inherit A' = A^{b^2}; since adaptedness with constant A
    /// implies it for every larger constant, A is raised to this multiple of
    /// the ordering minimum of the new exponents when A' falls short.
    double raise_margin = 1.0 + 1e-6;
};

struct GlobalResult {
    AdaptedState state;
    BootstrapResult bootstrap;
    std::vector<PassResult> passes;
    Rational theta_final;
    double displacement = 0.0;      ///< |v - u~|_0, u~ the bootstrapped map
    double displacement_raw = 0.0;  ///< |v - u|_0, u the input map
    double displacement_bound = 0.0;  ///< A^{-1/2}
    double holder_first = std::numeric_limits<double>::quiet_NaN();
    double holder_max = 0.0;
    std::vector<EstimateFailure> failures;
    bool passed() const { return failures.empty(); }
};

/// Final exponent after the passes: theta_0 prod b_j^{-2}, with alpha_{j+1} = alpha_j / (2 b_j^2).
inline Rational final_exponent(Rational theta, Rational alpha, std::size_t passes, int n = 2) {
    for (std::size_t j = 0; j < passes; ++j) {
        const auto law = exponent_law(theta, alpha, n);
        theta = law.theta_next;
        alpha = law.alpha_next;
    }
    return theta;
}

inline GlobalResult run_global(const ImmersionField& u, const MetricField& g, const GlobalConfig& cfg,
                               const CorrugationTable& table,
                               const LevelCallback& on_level = {}) {
    if (cfg.skeleta.empty()) throw ConfigError("at least one skeleton is required");
    GlobalResult out;
    out.theta_final = final_exponent(cfg.theta, cfg.alpha, cfg.skeleta.size());
    if (cfg.target_theta && *cfg.target_theta > out.theta_final)
        throw ConfigError("target theta = " + to_string(*cfg.target_theta) + " exceeds the reachable exponent theta_final = " +
                          "theta_0 prod b_j^-2 = " + to_string(out.theta_final) + " (~" +
                          std::to_string(to_double(out.theta_final)) + ")");

    BootstrapParams bp = cfg.bootstrap;
    bp.delta_cap = std::min(bp.delta_cap, cfg.delta_cap);
    out.bootstrap = bootstrap_strong(u, g, bp, table);
    AdaptedState st;
    st.u = out.bootstrap.u;
    st.rho = out.bootstrap.rho;
    st.h = out.bootstrap.h;
    st.g = g;
    st.A = cfg.A;
    st.theta = cfg.theta;
    st.alpha = cfg.alpha;
    const ImmersionField u_tilde = st.u;

    InductionOptions po = cfg.pass;
    // One radius ladder for all passes, resolving the narrowest tubes.
    if (po.radius_floor == 0.0) {
        double narrowest = std::numeric_limits<double>::infinity();
        for (const auto& sk : cfg.skeleta) narrowest = std::min(narrowest, TubeRadii::from(separation_constant(sk), po.avoid).inner);
        po.radius_floor = po.radius_floor_cells * u.chart.h() / narrowest;
    }
    if (po.holder_exponent == 0.0) po.holder_exponent = 0.9 * to_double(out.theta_final);
    if (po.holder_exponent > 0.0) out.holder_first = detail::holder_probe(st.u, po.holder_exponent);
    double top_frequency = out.bootstrap.stage.frequencies.empty() ? 0.0 : out.bootstrap.stage.frequencies.back();
    for (std::size_t j = 0; j < cfg.skeleta.size(); ++j) {
        if (j > 0) {
            const double rho_sup = sup_norm(st.rho);
            const double need = minimal_log_A(exponent_law(st.theta, st.alpha, 2), rho_sup * rho_sup) + std::log(cfg.raise_margin);
            if (st.A.log_value() < need) st.A = SymbolicPower{Rational(std::exp(1.0)), Rational(need)};
        }
        PassResult pr = inductive_pass(st, cfg.skeleta[j], po, table, static_cast<int>(j + 1), on_level, &top_frequency);
        for (const auto& rec : pr.levels) {
            for (const auto& f : rec.failures) out.failures.push_back(f);
            if (std::isfinite(rec.holder_probe)) out.holder_max = std::max(out.holder_max, rec.holder_probe);
        }
        st = pr.state;
        out.passes.push_back(std::move(pr));
    }
    out.state = st;
    out.displacement = sup_norm(st.u - u_tilde);
    out.displacement_raw = sup_norm(st.u - u);
    out.displacement_bound = std::pow(cfg.A.value(), -0.5);
    return out;
}

/// Smallest A (geometric bisection between the ordering minimum and `factor`
/// times it) for which a depth-limited non-strict run records no failed
/// estimate.  A run in which no level was executed verifies nothing and
/// does not count as passing.  Returns nullopt when even the largest A fails.
struct Calibration {
    std::optional<double> smallest_passing;
    double suggested = 0.0;  ///< 2x smallest_passing
    int runs = 0;
};

inline Calibration calibrate_A(const ImmersionField& u, const MetricField& g, GlobalConfig cfg, const CorrugationTable& table,
                               int depth = 3, double factor = 64.0, int iterations = 6) {
    Calibration cal;
    cfg.pass.depth = std::min(cfg.pass.depth, depth);
    cfg.pass.strict = false;
    cfg.pass.holder_exponent = -1.0;  // probe not needed
    const auto law = exponent_law(cfg.theta, cfg.alpha, 2);
    const double lo0 = minimal_log_A(law, cfg.delta_cap) + 1e-9;
    auto passes = [&](double logA) {
        ++cal.runs;
        GlobalConfig c = cfg;
        c.A = SymbolicPower{Rational(std::exp(logA)), 1};
        try {
            const auto r = run_global(u, g, c, table);
            int levels = 0;
            for (const auto& p : r.passes) levels += p.levels_completed;
            return r.passed() && levels > 0;
        } catch (const Error&) {
            return false;
        }
    };
    double lo = lo0, hi = lo0 + std::log(factor);
    if (passes(lo)) {
        cal.smallest_passing = std::exp(lo);
    } else if (passes(hi)) {
        for (int it = 0; it < iterations; ++it) {
            const double mid = 0.5 * (lo + hi);
            (passes(mid) ? hi : lo) = mid;
        }
        cal.smallest_passing = std::exp(hi);
    }
    if (cal.smallest_passing) cal.suggested = 2.0 * *cal.smallest_passing;
    return cal;
}

}  // namespace nkflex
