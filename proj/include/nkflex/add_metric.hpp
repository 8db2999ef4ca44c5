/// @file add_metric.hpp
/// @brief Adding a full 2-D metric increment rho^2 (g + h) in one stage, and the
/// bootstrap that turns a strictly short immersion into a strong short one.
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nkflex/step.hpp"

namespace nkflex {

struct MetricAddParams {
    double delta = 1.0;
    double lambda = 1.0;
    double kappa = 1.5;
    double alpha = 0.5;  ///< exponent in the hypotheses on h
    double gamma = 2.0;  ///< ellipticity of g
    double c0 = 1.0;     ///< first frequency c0 lambda^kappa
    double c1 = 1.0;     ///< growth factor K = c1 lambda^{kappa - 1}
    bool strict = true;  ///< throw on violated hypotheses instead of recording them
    bool cap_frequencies = false;  ///< lower lambda until every stage frequency is resolved by the grid
    ConformalOptions conformal{};
};

struct MetricAddOutcome {
    StepOutcome stage;
    MetricField error;  ///< E = grad v^T grad v - grad u^T grad u - rho^2 (g + h)
    double sup_error = 0.0;
    double c1_error = 0.0;
    double ell = 0.0;
    double lambda_used = 0.0;
    bool capped = false;  ///< lambda was lowered to fit the grid
    double first_frequency = 0.0;
    double growth = 0.0;
    std::size_t terms = 0;
    std::vector<std::string> violations;  ///< hypotheses that failed (non-strict mode)
    std::optional<ConformalFactorization> factorization;
};

namespace detail {

inline std::vector<std::string> metric_add_violations(const ScalarField& rho, const MetricField& h, const MetricField& g,
                                                      const MetricAddParams& p) {
    std::vector<std::string> v;
    const double sd = std::sqrt(p.delta);
    const double r0 = sup_norm(rho), r1 = r0 + sup_norm(gradient_magnitude(rho));
    const double h0 = sup_norm(h), h1 = h0 + sup_norm(gradient_magnitude(h));
    auto check = [&](bool ok, const std::string& what, double lhs, double rhs) {
        if (!ok) v.push_back(what + " (" + std::to_string(lhs) + " > " + std::to_string(rhs) + ")");
    };
    check(r0 <= sd * (1 + 1e-12), "|rho|_0 <= delta^{1/2}", r0, sd);
    check(r1 <= sd * p.lambda, "|rho|_1 <= delta^{1/2} lambda", r1, sd * p.lambda);
    check(h0 <= std::pow(p.lambda, -p.alpha), "|h|_0 <= lambda^{-alpha}", h0, std::pow(p.lambda, -p.alpha));
    check(h1 <= std::pow(p.lambda, 1 - p.alpha), "|h|_1 <= lambda^{1-alpha}", h1, std::pow(p.lambda, 1 - p.alpha));
    check(2 * p.gamma <= std::pow(p.lambda, p.alpha), "2 gamma <= lambda^alpha", 2 * p.gamma, std::pow(p.lambda, p.alpha));
    for (const auto& m : g.values) {
        const auto ev = m.eigenvalues();
        if (ev[0] < 1.0 / p.gamma - 1e-12 || ev[1] > p.gamma + 1e-12) {
            v.push_back("g outside the band [1/gamma, gamma]");
            break;
        }
    }
    return v;
}

}  // namespace detail

/// Adds rho^2 (g + h) to the pullback of u through conformal
/// coordinates of the mollified g + h.
inline MetricAddOutcome add_metric_2d(const ImmersionField& u, const ScalarField& rho, const MetricField& g,
                                      const MetricField& h, const MetricAddParams& p, const CorrugationTable& table,
                                      const StepOptions& opt = {}) {
    const GridChart& c = u.chart;
    require_same_chart(c, rho.chart, "add_metric_2d");
    require_same_chart(c, g.chart, "add_metric_2d");
    require_same_chart(c, h.chart, "add_metric_2d");
    MetricAddOutcome out;
    out.violations = detail::metric_add_violations(rho, h, g, p);
    if (p.strict && !out.violations.empty()) {
        std::string all;
        for (const auto& s : out.violations) all += (all.empty() ? "" : "; ") + s;
        throw PreconditionError("add_metric_2d hypotheses violated: " + all);
    }

    out.lambda_used = p.lambda;
    out.ell = std::pow(p.lambda, -p.kappa);
    out.first_frequency = p.c0 * std::pow(p.lambda, p.kappa);
    out.growth = p.c1 * std::pow(p.lambda, p.kappa - 1.0);

    bool active = false;
    for (double r : rho.values) active |= r != 0.0;
    if (!active) {
        out.stage.v = u;
        out.error = MetricField(c);
        return out;
    }

    StageParams st;
    st.kappa = p.kappa;
    if (c.periodic()) st.quantum = 2.0 * std::numbers::pi / c.lx;
    const double budget = 2.0 * std::numbers::pi / opt.nodes_per_wavelength / c.h();
    std::vector<PrimitiveTerm> terms;
    double lambda = p.lambda;
    if (p.cap_frequencies) lambda = std::min(lambda, std::pow(2.0 * c.h(), -1.0 / p.kappa));
    for (int attempt = 0;; ++attempt) {
        out.lambda_used = lambda;
        out.ell = std::pow(lambda, -p.kappa);
        out.first_frequency = p.c0 * std::pow(lambda, p.kappa);
        out.growth = p.c1 * std::pow(lambda, p.kappa - 1.0);
        const auto rt = mollify(rho, out.ell);
        const auto gt = mollify(g, out.ell);
        const auto ht = mollify(h, out.ell);
        out.factorization = solve_conformal(gt + ht, p.conformal);
        terms = conformal_terms(*out.factorization, rt);
        if (!p.cap_frequencies || terms.empty()) break;
        st.K = out.growth;
        const auto f = stage_frequencies(out.first_frequency, st, terms.size());
        double top = 0.0;
        for (std::size_t k = 0; k < terms.size(); ++k) {
            double gmax = 0.0;
            for (std::size_t i = 0; i < c.size(); ++i)
                if (terms[k].amplitude[i] != 0.0) gmax = std::max(gmax, magnitude(terms[k].gradient[i]));
            top = std::max(top, f[k] * gmax);
        }
        if (top <= budget) break;
        out.capped = true;
        if (attempt == 8)
            throw PreconditionError("stage frequencies cannot be fitted under the grid ceiling " + std::to_string(budget));
        const double n = static_cast<double>(terms.size());
        lambda *= 0.98 * std::pow(budget / top, 1.0 / (p.kappa + (n - 1.0) * (p.kappa - 1.0)));
    }
    if (out.lambda_used < p.lambda) out.capped = true;
    out.terms = terms.size();

    StepParams sp;
    sp.lambda = out.first_frequency;
    sp.epsilon = p.delta;
    sp.delta = p.delta;
    sp.nu = out.lambda_used;
    sp.nu_tilde = 1.0 / out.ell;
    sp.gamma = p.gamma;
    st.K = out.growth;
    out.stage = stage(u, terms, sp, st, table, opt);

    out.error = pullback_metric(out.stage.v) - pullback_metric(u);
    for (std::size_t k = 0; k < out.error.size(); ++k) out.error[k] -= (g[k] + h[k]) * (rho[k] * rho[k]);
    out.sup_error = sup_norm_interior(out.error, opt.collar);
    out.c1_error = out.sup_error + sup_norm_interior(gradient_magnitude(out.error), opt.collar);
    return out;
}

struct BootstrapParams {
    double A0 = 64.0;
    double alpha_star = 0.0;  ///< target |h~|_0 <= A0^{-alpha_star}; 0 selects 1/(8 N) for N primitive terms
    double lambda = 1.0;       ///< first stage frequency
    double K = 16.0;
    double gamma = 2.0;
    int collar = 2;
    double delta_cap = 0.125;  ///< largest admissible delta* (dyadic)
    bool fit_grid = true;      ///< replace K by the largest growth factor the grid resolves
    int nodes_per_wavelength = 16;
};

struct BootstrapResult {
    ImmersionField u;   ///< u~
    MetricField h;      ///< h~ with g - u~#e = delta* (g + h~)
    double delta_star = 0.0;
    ScalarField rho;    ///< constant delta*^{1/2}
    double h_sup = 0.0;
    double alpha_star = 0.0;
    double h_bound = 0.0;  ///< A0^{-alpha_star}
    double h_c1 = 0.0;
    double displacement = 0.0;  ///< |u~ - u|_0
    double c2 = 0.0;            ///< |u~|_2
    double K = 0.0;             ///< growth factor actually used
    double lambda = 0.0;        ///< first frequency actually used
    bool strong = false;   ///< (1/2) g <= u~#e <= g everywhere
    StepOutcome stage;
};

/// Largest dyadic delta* <= cap with g - u#e - delta* g >= delta* g.
inline double dyadic_margin(const ImmersionField& u, const MetricField& g, double cap = 0.125) {
    const auto pu = pullback_metric(u);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) m = std::min(m, relative_eigenvalues(g[k] - pu[k], g[k])[0]);
    if (!(m > shortness_tolerance)) throw PreconditionError("immersion is not strictly short");
    double d = 0.125;
    while (2.0 * d > m || d > cap) d *= 0.5;
    return d;
}

inline BootstrapResult bootstrap_strong(const ImmersionField& u, const MetricField& g, const BootstrapParams& p,
                                        const CorrugationTable& table) {
    const GridChart& c = u.chart;
    BootstrapResult r;
    const auto pu = pullback_metric(u);
    r.delta_star = dyadic_margin(u, g, p.delta_cap);
    // A defect that already is a dyadic multiple delta g (delta <= 1/8) needs no stage.
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto ev = relative_eigenvalues(g[k] - pu[k], g[k]);
        lo = std::min(lo, ev[0]);
        hi = std::max(hi, ev[1]);
    }
    if (hi - lo < 1e-12) {
        double d = 0.125;
        while (d > hi + 1e-12) d *= 0.5;
        if (std::abs(d - lo) < 1e-12 && d <= p.delta_cap) r.delta_star = d;
    }
    r.rho = ScalarField(c, std::sqrt(r.delta_star));
    MetricField D(c);
    for (std::size_t k = 0; k < D.size(); ++k) D[k] = g[k] - pu[k] - g[k] * r.delta_star;

    std::vector<PrimitiveTerm> terms;
    if (sup_norm(D) > 1e-12) {
        if (c.periodic()) {
            terms = conformal_terms(solve_conformal(D), ScalarField(c, 1.0));
        } else {
            Sym2 mean{};
            for (const auto& m : D.values) mean += m * (1.0 / D.size());
            const auto ev = mean.eigenvalues();
            terms = frame_terms(build_frame(mean, std::max(ev[1], 1.0 / ev[0]) * (1 + 1e-9)), D);
        }
    }
    r.alpha_star = p.alpha_star > 0.0 ? p.alpha_star : 1.0 / (8.0 * std::max<std::size_t>(terms.size(), 1));
    r.h_bound = std::pow(p.A0, -r.alpha_star);
    StageParams st;
    st.K = p.K;
    if (c.periodic()) st.quantum = 2.0 * std::numbers::pi / c.lx;
    StepParams sp;
    sp.lambda = p.lambda;
    sp.gamma = p.gamma;
    if (p.fit_grid && terms.size() > 1) {
        // the first term is added to an unperturbed map; the stage error is
        // governed by the ratio K between successive frequencies, so spend the
        // grid on K
        double gmax = 0.0;
        for (const auto& t : terms)
            for (std::size_t k = 0; k < c.size(); ++k)
                if (t.amplitude[k] != 0.0) gmax = std::max(gmax, magnitude(t.gradient[k]));
        const double budget = 2.0 * std::numbers::pi / p.nodes_per_wavelength / c.h();
        const double n = static_cast<double>(terms.size() - 1);
        st.K = std::pow(budget / (p.lambda * gmax), 1.0 / n);
        for (int attempt = 0; attempt < 64; ++attempt) {
            const auto f = stage_frequencies(p.lambda, st, terms.size());
            if (f.back() * gmax <= budget * (1.0 + 1e-12)) break;
            st.K *= 0.995;
        }
    }
    r.K = st.K;
    r.lambda = sp.lambda;
    StepOptions opt;
    opt.nodes_per_wavelength = p.nodes_per_wavelength;
    opt.collar = p.collar;
    opt.compute_report = false;
    r.stage = stage(u, terms, sp, st, table, opt);
    r.u = r.stage.v;

    const auto pv = pullback_metric(r.u);
    r.h = MetricField(c);
    for (std::size_t k = 0; k < D.size(); ++k) r.h[k] = (pv[k] - pu[k] - D[k]) * (-1.0 / r.delta_star);
    r.h_sup = sup_norm_interior(r.h, p.collar);
    r.h_c1 = r.h_sup + sup_norm_interior(gradient_magnitude(r.h), p.collar);
    r.displacement = sup_norm(r.u - u);
    r.c2 = norm_report(r.u, {}, p.collar).c2_norm;
    r.strong = true;
    for (std::size_t k = 0; k < D.size(); ++k) {
        const auto ev = relative_eigenvalues(pv[k], g[k]);
        if (ev[0] < 0.5 || ev[1] > 1.0) r.strong = false;
    }
    return r;
}

}  // namespace nkflex
