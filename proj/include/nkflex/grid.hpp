/// @file grid.hpp
/// @brief Uniform tensor-product sample grids over a planar chart or a flat torus.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "nkflex/error.hpp"

namespace nkflex {

enum class Boundary { periodic, clamped };

inline const char* to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "clamped"; }

/// Rectangle [x0, x0+lx] x [y0, y0+ly] sampled by nx x ny nodes.
///
/// Periodic charts identify the far edge with the near one, so the nodes are
/// x0 + i*lx/nx for i < nx.  Clamped charts include both edges.
struct GridChart {
    double x0 = 0.0;
    double y0 = 0.0;
    double lx = 1.0;
    double ly = 1.0;
    int nx = 8;
    int ny = 8;
    Boundary mode = Boundary::clamped;

    static GridChart torus(double length, int n, double origin = 0.0) {
        GridChart c{origin, origin, length, length, n, n, Boundary::periodic};
        c.validate(2);
        return c;
    }
    static GridChart square(double x0, double length, int n) {
        GridChart c{x0, x0, length, length, n, n, Boundary::clamped};
        c.validate(2);
        return c;
    }

    bool periodic() const { return mode == Boundary::periodic; }
    double hx() const { return periodic() ? lx / nx : lx / (nx - 1); }
    double hy() const { return periodic() ? ly / ny : ly / (ny - 1); }
    double h() const { return std::max(hx(), hy()); }
    double x(int i) const { return x0 + i * hx(); }
    double y(int j) const { return y0 + j * hy(); }
    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }

    /// The differencing and mollification layers need at least 8 nodes per
    /// axis; plain storage (e.g. tiny export fixtures) allows fewer.
    void validate(int min_resolution = 8) const {
        if (nx < min_resolution || ny < min_resolution)
            throw PreconditionError("grid resolution " + std::to_string(nx) + "x" + std::to_string(ny) +
                                    " below the minimum of " + std::to_string(min_resolution) + " per axis");
        if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
            throw PreconditionError("grid extent must be positive and finite");
    }

    bool same_as(const GridChart& o) const {
        return nx == o.nx && ny == o.ny && mode == o.mode && x0 == o.x0 && y0 == o.y0 && lx == o.lx && ly == o.ly;
    }
};

inline void require_same_chart(const GridChart& a, const GridChart& b, const char* what) {
    if (!a.same_as(b)) throw PreconditionError(std::string("chart mismatch in ") + what);
}

}  // namespace nkflex
