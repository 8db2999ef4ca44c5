/// @file cutoff.hpp
/// @brief Cut-off pairs (chi, chi~) built from the amplitude level and the
/// distance to the current skeleton, and the tube radii they use.
///
/// chi   = phi (rho / delta^{1/2}) psi (dist / r)
/// chi~  = phi~(rho / delta^{1/2}) psi~(dist / r)
/// with phi~ = 1 on supp phi and psi~ = 1 on supp psi, so supp chi lies in {chi~ = 1}.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nkflex/skeleton.hpp"
#include "nkflex/stencil.hpp"

namespace nkflex {

/// Quintic smoothstep: 0 at t <= 0, 1 at t >= 1, C^2 joins.  max |S'| = 15/8.
inline double smoothstep(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

inline double ramp_up(double s, double a, double b) { return smoothstep((s - a) / (b - a)); }
inline double ramp_down(double s, double a, double b) { return 1.0 - smoothstep((s - a) / (b - a)); }

/// Level profiles on s = rho / delta^{1/2}: both vanish for s <= 3/2 and equal 1 for s >= 2.
inline double level_profile(double s) { return ramp_up(s, 1.75, 2.0); }
inline double level_profile_wide(double s) { return ramp_up(s, 1.5, 1.75); }

/// Tube radii in units of the level radius r_q.  Tubes around the skeleton are
/// {dist < inner r_q} (where chi may be 1) inside {dist < outer r_q} (where
/// chi~ may be positive); `avoid` is the relative radius of the tube around
/// the previous skeleton S that the cut-offs must stay clear of.
struct TubeRadii {
    double separation = 1.0;  ///< geometric separation constant of the skeleton
    double avoid = 1.0;       ///< r_**
    double outer = 1.0;       ///< r~_* = separation * avoid
    double inner = 0.55;      ///< r_*, with outer/2 < inner < outer
    double shoulder = 0.65;   ///< psi ramps down on [inner, shoulder], psi~ on [shoulder, outer]

    static TubeRadii from(double separation, double avoid) {
        TubeRadii t;
        t.separation = separation;
        t.avoid = avoid;
        t.outer = separation * avoid;
        t.inner = 0.55 * t.outer;
        t.shoulder = 0.65 * t.outer;
        return t;
    }
    double psi(double s) const { return ramp_down(s, inner, shoulder); }
    double psi_wide(double s) const { return ramp_down(s, shoulder, outer); }
};

struct CutoffPair {
    ScalarField chi, chi_wide;
    double grad_chi = 0.0, grad_chi_wide = 0.0;  ///< sup of the gradients
    bool nested = true;                          ///< supp chi within {chi~ = 1}
    std::size_t nest_failures = 0;
};

/// Cut-offs at level delta (= delta_{q+2}) and radius r (= r_{q+1}).  `rho`
/// is the amplitude at the start of the pass; `dist` the distance to Sigma.
inline CutoffPair make_cutoffs(const ScalarField& rho, const ScalarField& dist, double delta, double r,
                               const TubeRadii& radii) {
    require_same_chart(rho.chart, dist.chart, "make_cutoffs");
    const double sd = std::sqrt(delta);
    CutoffPair c;
    c.chi = ScalarField(rho.chart);
    c.chi_wide = ScalarField(rho.chart);
    for (std::size_t k = 0; k < rho.size(); ++k) {
        const double s = rho[k] / sd, t = dist[k] / r;
        c.chi[k] = level_profile(s) * radii.psi(t);
        c.chi_wide[k] = level_profile_wide(s) * radii.psi_wide(t);
        if (c.chi[k] > 0.0 && c.chi_wide[k] != 1.0) {
            c.nested = false;
            ++c.nest_failures;
        }
    }
    c.grad_chi = sup_norm(gradient_magnitude(c.chi));
    c.grad_chi_wide = sup_norm(gradient_magnitude(c.chi_wide));
    return c;
}

}  // namespace nkflex
