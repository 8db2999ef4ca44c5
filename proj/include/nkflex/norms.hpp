/// @file norms.hpp
/// @brief Sup, C^1, C^2 norms and sampled Hölder seminorms of grid fields.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "nkflex/stencil.hpp"

namespace nkflex {

struct NormReport {
    double sup_norm = 0.0;
    double c1_norm = 0.0;  ///< sup + sup |grad f|
    double c2_norm = 0.0;  ///< c1 + sup |hess f|
    std::vector<std::pair<double, double>> holder_seminorms;  ///< (exponent, value)
};

/// Optional collar: nodes closer than `collar` cells to a clamped edge are
/// ignored (one-sided stencils there have their own, larger, error).
template <class T>
double sup_norm_interior(const Field<T>& f, int collar) {
    const GridChart& c = f.chart;
    if (c.periodic() || collar <= 0) return sup_norm(f);
    double m = 0.0;
    for (int j = collar; j < c.ny - collar; ++j)
        for (int i = collar; i < c.nx - collar; ++i) m = std::max(m, magnitude(f(i, j)));
    return m;
}

/// Lower bound for the Hölder seminorm [f]_theta (deriv_order 0) or
/// [Df]_theta (deriv_order 1).
///
/// Separations are sampled along the axes and diagonals at dyadic node
/// offsets 2^j, which keeps the cost O(N log N) and makes the value monotone
/// under nested refinement.  It is always <= the continuum seminorm.
template <class T>
double holder_seminorm(const Field<T>& f, double theta, int deriv_order = 0) {
    if (!(theta > 0.0 && theta <= 1.0)) throw PreconditionError("Hölder exponent must lie in (0, 1]");
    if (deriv_order == 1) {
        return std::max(holder_seminorm(diff(f, 0), theta, 0), holder_seminorm(diff(f, 1), theta, 0));
    }
    const GridChart& c = f.chart;
    const double hx = c.hx(), hy = c.hy();
    const int reach = c.periodic() ? std::min(c.nx, c.ny) - 1 : std::max(c.nx, c.ny) - 1;
    double best = 0.0;
    for (int s = 1; s <= reach; s *= 2) {
        const int offsets[4][2] = {{s, 0}, {0, s}, {s, s}, {s, -s}};
        for (const auto& o : offsets) {
            const double dist = std::hypot(o[0] * hx, o[1] * hy);
            const double denom = std::pow(dist, theta);
            for (int j = 0; j < c.ny; ++j) {
                const int jj = j + o[1];
                if (!c.periodic() && (jj < 0 || jj >= c.ny)) continue;
                for (int i = 0; i < c.nx; ++i) {
                    const int ii = i + o[0];
                    if (!c.periodic() && ii >= c.nx) break;
                    const double d = magnitude(f.sample(ii, jj) - f(i, j));
                    best = std::max(best, d / denom);
                }
            }
        }
    }
    return best;
}

template <class T>
NormReport norm_report(const Field<T>& f, const std::vector<double>& exponents = {}, int collar = 0) {
    NormReport r;
    r.sup_norm = sup_norm_interior(f, collar);
    r.c1_norm = r.sup_norm + sup_norm_interior(gradient_magnitude(f), collar);
    r.c2_norm = r.c1_norm + sup_norm_interior(hessian_magnitude(f), collar);
    for (double th : exponents) r.holder_seminorms.emplace_back(th, holder_seminorm(f, th, 0));
    return r;
}

}  // namespace nkflex
