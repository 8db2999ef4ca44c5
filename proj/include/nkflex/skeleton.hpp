/// @file skeleton.hpp
/// @brief Skeleta of a planar triangulation: exact distance fields, feature
/// labels, the geometric separation constant, and grid connected components.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "nkflex/field.hpp"

namespace nkflex {

struct Segment {
    Vec2 a, b;
};

inline double point_segment_distance(const Vec2& p, const Segment& s) {
    const Vec2 d = s.b - s.a;
    const double len2 = dot(d, d);
    double t = len2 > 0.0 ? dot(p - s.a, d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return magnitude(p - (s.a + d * t));
}

enum class SkeletonLevel { empty, vertices, edges, whole };

inline const char* to_string(SkeletonLevel l) {
    switch (l) {
        case SkeletonLevel::empty: return "empty";
        case SkeletonLevel::vertices: return "vertices";
        case SkeletonLevel::edges: return "edges";
        case SkeletonLevel::whole: return "whole";
    }
    return "?";
}

/// A closed subset of the chart: nothing, finitely many points, finitely many
/// segments, or the whole chart.
struct SkeletonSet {
    SkeletonLevel level = SkeletonLevel::empty;
    std::vector<Vec2> vertices;
    std::vector<Segment> segments;

    static SkeletonSet none() { return {}; }
    static SkeletonSet points(std::vector<Vec2> v) { return {SkeletonLevel::vertices, std::move(v), {}}; }
    static SkeletonSet edges(std::vector<Segment> s) { return {SkeletonLevel::edges, {}, std::move(s)}; }
    static SkeletonSet whole() { return {SkeletonLevel::whole, {}, {}}; }

    bool empty() const { return level == SkeletonLevel::empty; }

    std::size_t feature_count() const {
        switch (level) {
            case SkeletonLevel::vertices: return vertices.size();
            case SkeletonLevel::edges: return segments.size();
            case SkeletonLevel::whole: return 1;
            default: return 0;
        }
    }

    /// Exact Euclidean distance (in chart coordinates); +inf for the empty set.
    double distance(const Vec2& p) const { return nearest(p).second; }

    /// Index of the nearest feature (-1 for the empty set) and its distance.
    std::pair<int, double> nearest(const Vec2& p) const {
        std::pair<int, double> best{-1, std::numeric_limits<double>::infinity()};
        switch (level) {
            case SkeletonLevel::empty: break;
            case SkeletonLevel::whole: best = {0, 0.0}; break;
            case SkeletonLevel::vertices:
                for (std::size_t k = 0; k < vertices.size(); ++k) {
                    const double d = magnitude(p - vertices[k]);
                    if (d < best.second) best = {static_cast<int>(k), d};
                }
                break;
            case SkeletonLevel::edges:
                for (std::size_t k = 0; k < segments.size(); ++k) {
                    const double d = point_segment_distance(p, segments[k]);
                    if (d < best.second) best = {static_cast<int>(k), d};
                }
                break;
        }
        return best;
    }

    ScalarField distance_field(const GridChart& c) const {
        if (c.periodic() && (level == SkeletonLevel::vertices || level == SkeletonLevel::edges))
            throw PreconditionError("point and segment skeleta are only supported on clamped charts");
        return ScalarField::generate(c, [&](double x, double y) { return distance(Vec2{x, y}); });
    }

    std::vector<int> feature_field(const GridChart& c) const {
        std::vector<int> f(c.size());
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i) f[c.index(i, j)] = nearest(Vec2{c.x(i), c.y(j)}).first;
        return f;
    }

    /// Nodes lying on the set (distance below a small fraction of the spacing).
    std::vector<std::size_t> nodes_on(const GridChart& c) const {
        std::vector<std::size_t> out;
        if (empty()) return out;
        const double tol = 1e-9 * c.h();
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i)
                if (distance(Vec2{c.x(i), c.y(j)}) <= tol) out.push_back(c.index(i, j));
        return out;
    }
};

/// Geometric separation constant of the pair S subset Sigma: the ratio r_bar
/// such that, away from S, tubes of relative radius r_bar around distinct
/// features of Sigma do not meet.  For segments meeting at a vertex of S
/// under angle w, the tubes of radius r d around both segments at distance
/// d from the vertex meet iff r >= sin(w/2); we take half the smallest such
/// value.  Point and whole-chart skeleta have no competing features near S,
/// so r_bar = 1 there; their tube radii are audited separately.
inline double separation_constant(const SkeletonSet& sigma) {
    if (sigma.level != SkeletonLevel::edges) return 1.0;
    double best = 1.0;
    const double eps = 1e-12;
    const auto& s = sigma.segments;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            const Vec2 pi[2] = {s[i].a, s[i].b}, pj[2] = {s[j].a, s[j].b};
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    if (magnitude(pi[a] - pj[b]) > eps) continue;
                    const Vec2 u = pi[1 - a] - pi[a], v = pj[1 - b] - pj[b];
                    const double w = std::acos(std::clamp(dot(u, v) / (magnitude(u) * magnitude(v)), -1.0, 1.0));
                    best = std::min(best, 0.5 * std::sin(0.5 * w));
                }
        }
    return best;
}

/// Minimum distance between two distinct features (vertices: pairwise;
/// segments: pairs not sharing an endpoint).  +inf when fewer than two.
inline double feature_gap(const SkeletonSet& sigma) {
    double best = std::numeric_limits<double>::infinity();
    if (sigma.level == SkeletonLevel::vertices) {
        for (std::size_t i = 0; i < sigma.vertices.size(); ++i)
            for (std::size_t j = i + 1; j < sigma.vertices.size(); ++j)
                best = std::min(best, magnitude(sigma.vertices[i] - sigma.vertices[j]));
    } else if (sigma.level == SkeletonLevel::edges) {
        const auto& s = sigma.segments;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = i + 1; j < s.size(); ++j) {
                const bool adjacent = magnitude(s[i].a - s[j].a) < 1e-12 || magnitude(s[i].a - s[j].b) < 1e-12 ||
                                      magnitude(s[i].b - s[j].a) < 1e-12 || magnitude(s[i].b - s[j].b) < 1e-12;
                if (adjacent) continue;
                best = std::min({best, point_segment_distance(s[i].a, s[j]), point_segment_distance(s[i].b, s[j]),
                                 point_segment_distance(s[j].a, s[i]), point_segment_distance(s[j].b, s[i])});
            }
    }
    return best;
}

/// Connected components of a node mask (4-neighbour connectivity, wrapping
/// on periodic charts).  Returns labels (-1 outside the mask) and the count.
struct Components2D {
    std::vector<int> label;
    int count = 0;
};

inline Components2D connected_components(const GridChart& c, const std::vector<bool>& mask) {
    Components2D out;
    out.label.assign(c.size(), -1);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < c.size(); ++start) {
        if (!mask[start] || out.label[start] >= 0) continue;
        const int id = out.count++;
        out.label[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t k = stack.back();
            stack.pop_back();
            const int i = static_cast<int>(k % c.nx), j = static_cast<int>(k / c.nx);
            const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
            for (int d = 0; d < 4; ++d) {
                int ii = i + di[d], jj = j + dj[d];
                if (c.periodic()) {
                    ii = (ii + c.nx) % c.nx;
                    jj = (jj + c.ny) % c.ny;
                } else if (ii < 0 || jj < 0 || ii >= c.nx || jj >= c.ny) {
                    continue;
                }
                const std::size_t n = c.index(ii, jj);
                if (mask[n] && out.label[n] < 0) {
                    out.label[n] = id;
                    stack.push_back(n);
                }
            }
        }
    }
    return out;
}

}  // namespace nkflex
