/// @file field_io.hpp
/// @brief Columnar binary container and CSV dumps for grid fields.
///
/// Layout (little-endian host order):
///   8 bytes  magic "NKFIELD1"
///   int32    boundary mode (0 periodic, 1 clamped)
///   int32    nx, ny, components
///   float64  x0, y0, lx, ly
///   float64  jump_x[components], jump_y[components]
///   float64  body: component-major columns, each row-major (j*nx + i)
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "nkflex/field.hpp"

namespace nkflex {

inline constexpr char field_magic[8] = {'N', 'K', 'F', 'I', 'E', 'L', 'D', '1'};

template <class T>
void write_field(const Field<T>& f, const std::string& path) {
    using C = Components<T>;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    os.write(field_magic, 8);
    put(static_cast<std::int32_t>(f.chart.periodic() ? 0 : 1));
    put(static_cast<std::int32_t>(f.chart.nx));
    put(static_cast<std::int32_t>(f.chart.ny));
    put(static_cast<std::int32_t>(C::count));
    put(f.chart.x0);
    put(f.chart.y0);
    put(f.chart.lx);
    put(f.chart.ly);
    for (double v : C::get(f.jump_x)) put(v);
    for (double v : C::get(f.jump_y)) put(v);
    for (int comp = 0; comp < C::count; ++comp)
        for (const auto& v : f.values) put(C::get(v)[comp]);
    if (!os) throw Error("write failed for " + path);
}

template <class T>
Field<T> read_field(const std::string& path) {
    using C = Components<T>;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    auto get = [&](auto& v) {
        is.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!is) throw Error("truncated field file " + path);
    };
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, field_magic, 8) != 0) throw Error(path + " is not a field container");
    std::int32_t mode, nx, ny, comps;
    get(mode);
    get(nx);
    get(ny);
    get(comps);
    if (comps != C::count) throw Error("component count mismatch in " + path);
    GridChart c;
    c.mode = mode == 0 ? Boundary::periodic : Boundary::clamped;
    c.nx = nx;
    c.ny = ny;
    get(c.x0);
    get(c.y0);
    get(c.lx);
    get(c.ly);
    Field<T> f(c);
    double jx[C::count], jy[C::count];
    for (auto& v : jx) get(v);
    for (auto& v : jy) get(v);
    f.jump_x = C::set(jx);
    f.jump_y = C::set(jy);
    std::vector<double> body(static_cast<std::size_t>(C::count) * f.size());
    for (auto& v : body) get(v);
    for (std::size_t k = 0; k < f.size(); ++k) {
        double tmp[C::count];
        for (int comp = 0; comp < C::count; ++comp) tmp[comp] = body[comp * f.size() + k];
        f.values[k] = C::set(tmp);
    }
    return f;
}

/// CSV with columns x, y, c0, c1, ...
template <class T>
void write_csv(const Field<T>& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << "x,y";
    for (int comp = 0; comp < Components<T>::count; ++comp) os << ",c" << comp;
    os << '\n' << std::setprecision(17);
    for (int j = 0; j < f.chart.ny; ++j)
        for (int i = 0; i < f.chart.nx; ++i) {
            os << f.chart.x(i) << ',' << f.chart.y(j);
            for (double v : Components<T>::get(f(i, j))) os << ',' << v;
            os << '\n';
        }
}

}  // namespace nkflex
