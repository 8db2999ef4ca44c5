/// @file mesh_io.hpp
/// @brief Triangle meshes of immersions: Wavefront OBJ export and re-import,
/// seam welding on periodic charts, and an edge-count audit.
#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nkflex/field.hpp"

namespace nkflex {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;  ///< zero-based vertex indices
    int columns = 0, rows = 0;                  ///< vertex lattice (0 if unknown)
};

/// One vertex per node; periodic charts get a duplicated last column / row
/// carrying the seam positions u(0) + jump, so every grid cell becomes a quad
/// split into two triangles.
inline TriangleMesh mesh_from_field(const ImmersionField& u) {
    const GridChart& c = u.chart;
    const bool per = c.periodic();
    TriangleMesh m;
    m.columns = per ? c.nx + 1 : c.nx;
    m.rows = per ? c.ny + 1 : c.ny;
    m.vertices.reserve(static_cast<std::size_t>(m.columns) * m.rows);
    for (int j = 0; j < m.rows; ++j)
        for (int i = 0; i < m.columns; ++i) {
            Vec3 p = u(i % c.nx, j % c.ny);
            if (i == c.nx) p += u.jump_x;
            if (j == c.ny) p += u.jump_y;
            m.vertices.push_back(p);
        }
    auto id = [&](int i, int j) { return j * m.columns + i; };
    for (int j = 0; j + 1 < m.rows; ++j)
        for (int i = 0; i + 1 < m.columns; ++i) {
            m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return m;
}

inline std::string format_coordinate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void write_obj(const TriangleMesh& m, std::ostream& os, const std::string& comment = {}) {
    if (!comment.empty()) os << "# " << comment << "\n";
    if (m.columns > 0) os << "# lattice " << m.columns << " x " << m.rows << "\n";
    for (const auto& v : m.vertices)
        os << "v " << format_coordinate(v.x) << ' ' << format_coordinate(v.y) << ' ' << format_coordinate(v.z) << '\n';
    for (const auto& t : m.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

inline void export_mesh(const ImmersionField& u, const std::string& path, const std::string& comment = {}) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    write_obj(mesh_from_field(u), os, comment);
    if (!os) throw Error("write failed for " + path);
}

/// Reads the subset written above: `v x y z`, `f a b c` (also `a/b/c` forms),
/// and the lattice comment.
inline TriangleMesh read_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    TriangleMesh m;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream s(line);
        std::string tag;
        s >> tag;
        if (tag == "v") {
            Vec3 v;
            if (!(s >> v.x >> v.y >> v.z)) throw Error(path + ":" + std::to_string(lineno) + ": malformed vertex");
            m.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> t{};
            for (int& k : t) {
                std::string tok;
                if (!(s >> tok)) throw Error(path + ":" + std::to_string(lineno) + ": face needs three vertices");
                k = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            std::string extra;
            if (s >> extra) throw Error(path + ":" + std::to_string(lineno) + ": only triangles are supported");
            m.triangles.push_back(t);
        } else if (tag == "#") {
            std::string word;
            if (s >> word && word == "lattice") {
                char x;
                s >> m.columns >> x >> m.rows;
            }
        }
    }
    for (const auto& t : m.triangles)
        for (int k : t)
            if (k < 0 || k >= static_cast<int>(m.vertices.size())) throw Error(path + ": face index out of range");
    return m;
}

/// Identify the duplicated seam column / row of a periodic lattice with the
/// first one.  Returns the welded mesh; `mismatch` receives the largest
/// deviation of a seam vertex from its partner shifted by the given jumps.
inline TriangleMesh weld_seams(const TriangleMesh& m, bool periodic_x, bool periodic_y, const Vec3& jump_x = {},
                               const Vec3& jump_y = {}, double* mismatch = nullptr) {
    if (m.columns <= 0 || m.rows <= 0) throw PreconditionError("weld_seams needs a lattice mesh");
    const int nx = periodic_x ? m.columns - 1 : m.columns, ny = periodic_y ? m.rows - 1 : m.rows;
    TriangleMesh w;
    w.columns = nx;
    w.rows = ny;
    double worst = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) w.vertices.push_back(m.vertices[static_cast<std::size_t>(j) * m.columns + i]);
    auto remap = [&](int k) {
        int i = k % m.columns, j = k / m.columns;
        Vec3 shift{};
        if (periodic_x && i == nx) { i = 0; shift += jump_x; }
        if (periodic_y && j == ny) { j = 0; shift += jump_y; }
        const int target = j * nx + i;
        worst = std::max(worst, magnitude(m.vertices[k] - (w.vertices[target] + shift)));
        return target;
    };
    for (const auto& t : m.triangles) w.triangles.push_back({remap(t[0]), remap(t[1]), remap(t[2])});
    if (mismatch) *mismatch = worst;
    return w;
}

struct EdgeAudit {
    std::size_t edges = 0;
    std::size_t boundary = 0;     ///< used by one face
    std::size_t nonmanifold = 0;  ///< used by more than two faces
    bool watertight() const { return boundary == 0 && nonmanifold == 0 && edges > 0; }
};

inline EdgeAudit audit_edges(const TriangleMesh& m) {
    std::map<std::pair<int, int>, int> uses;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e) {
            const int a = t[e], b = t[(e + 1) % 3];
            ++uses[{std::min(a, b), std::max(a, b)}];
        }
    EdgeAudit a;
    a.edges = uses.size();
    for (const auto& [edge, n] : uses) {
        if (n == 1) ++a.boundary;
        if (n > 2) ++a.nonmanifold;
    }
    return a;
}

}  // namespace nkflex
