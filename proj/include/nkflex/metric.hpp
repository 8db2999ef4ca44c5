/// @file metric.hpp
/// @brief Pullback metrics of immersions and shortness audits.
#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "nkflex/stencil.hpp"

namespace nkflex {

struct JacobianField {
    ImmersionField d1;
    ImmersionField d2;

    Jacobian at(std::size_t k) const { return {d1[k], d2[k]}; }
};

inline JacobianField jacobian(const ImmersionField& u) { return {diff(u, 0), diff(u, 1)}; }

struct PullbackResult {
    MetricField metric;
    std::vector<std::size_t> degenerate_nodes;  ///< nodes whose Jacobian lost rank
    double min_singular_value = 0.0;
};

inline MetricField pullback_metric(const JacobianField& du) {
    MetricField g(du.d1.chart);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = du.at(k).gram();
    return g;
}

/// u#e = Du^T Du with the configured stencil.
inline MetricField pullback_metric(const ImmersionField& u) { return pullback_metric(jacobian(u)); }

/// Pullback together with the rank audit.  A node is degenerate when its
/// smallest singular value is below `tol` times the largest one.
inline PullbackResult pullback_metric_checked(const ImmersionField& u, double tol = 1e-10) {
    PullbackResult r{pullback_metric(u), {}, std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < r.metric.size(); ++k) {
        const auto ev = r.metric[k].eigenvalues();
        const double smin = std::sqrt(std::max(ev[0], 0.0));
        const double smax = std::sqrt(std::max(ev[1], 0.0));
        r.min_singular_value = std::min(r.min_singular_value, smin);
        if (!(smin > tol * smax)) r.degenerate_nodes.push_back(k);
    }
    return r;
}

enum class Shortness { strictly_short, short_only, not_short };

inline const char* to_string(Shortness s) {
    switch (s) {
        case Shortness::strictly_short: return "strictly short";
        case Shortness::short_only: return "short";
        default: return "not short";
    }
}

struct ShortnessReport {
    ScalarField min_eigenvalue;  ///< of g - u#e, per node
    double min_margin = 0.0;
    std::size_t worst_node = 0;
    Shortness classification = Shortness::not_short;
    // Filled only when a factorization g - u#e = rho^2 (g + h) is supplied.
    std::optional<double> strong_bound;            ///< max |eig(g^{-1/2} h g^{-1/2})|; strong short iff <= 1/2
    std::optional<double> factorization_residual;  ///< sup |g - u#e - rho^2 (g+h)|
};

/// Classification tolerance: eigenvalues within this band of 0 count as 0.
inline constexpr double shortness_tolerance = 1e-12;

inline ShortnessReport check_short_metric(const MetricField& pulled, const MetricField& g) {
    require_same_chart(pulled.chart, g.chart, "check_short");
    ShortnessReport r;
    r.min_eigenvalue = ScalarField(g.chart);
    r.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double e = (g[k] - pulled[k]).min_eigenvalue();
        r.min_eigenvalue[k] = e;
        if (e < r.min_margin) {
            r.min_margin = e;
            r.worst_node = k;
        }
    }
    if (r.min_margin > shortness_tolerance)
        r.classification = Shortness::strictly_short;
    else if (r.min_margin >= -shortness_tolerance)
        r.classification = Shortness::short_only;
    else
        r.classification = Shortness::not_short;
    return r;
}

inline ShortnessReport check_short(const ImmersionField& u, const MetricField& g) {
    return check_short_metric(pullback_metric(u), g);
}

inline ShortnessReport check_short(const ImmersionField& u, const MetricField& g, const ScalarField& rho,
                                   const MetricField& h) {
    const auto pulled = pullback_metric(u);
    auto r = check_short_metric(pulled, g);
    double strong = 0.0, resid = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto ev = relative_eigenvalues(h[k], g[k]);
        strong = std::max({strong, std::abs(ev[0]), std::abs(ev[1])});
        resid = std::max(resid, magnitude(g[k] - pulled[k] - (g[k] + h[k]) * (rho[k] * rho[k])));
    }
    r.strong_bound = strong;
    r.factorization_residual = resid;
    return r;
}

}  // namespace nkflex
