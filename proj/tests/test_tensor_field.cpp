#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "nkflex/field_io.hpp"
#include "nkflex/metric.hpp"
#include "nkflex/mollify.hpp"
#include "nkflex/norms.hpp"

using namespace nkflex;
using Catch::Approx;

namespace {

double max_deviation(const MetricField& g, const Sym2& target, int collar = 0) {
    double m = 0.0;
    const auto& c = g.chart;
    for (int j = collar; j < c.ny - collar; ++j)
        for (int i = collar; i < c.nx - collar; ++i) m = std::max(m, magnitude(g(i, j) - target));
    return m;
}

ImmersionField cylinder(int n) {
    const auto c = GridChart::square(0.0, 1.0, n);
    return ImmersionField::generate(c, [](double x, double y) { return Vec3{std::cos(x), std::sin(x), y}; });
}

// Fourier symbol of the discrete kernel: mollifying sin(kx) multiplies it by this.
double kernel_symbol(double l, double h, double k) {
    const auto w = bump_weights(l / std::sqrt(2.0) / h);
    const int m = static_cast<int>(w.size() / 2);
    double num = 0.0, den = 0.0;
    for (int o = -m; o <= m; ++o) {
        num += w[o + m] * std::cos(k * o * h);
        den += w[o + m];
    }
    return num / den;
}

}  // namespace

TEST_CASE("flat and linear maps pull back to constant metrics", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 32);
    REQUIRE(max_deviation(pullback_metric(flat_map(c)), Sym2::identity()) < 1e-12);
    const auto u = ImmersionField::generate(c, [](double x, double y) { return Vec3{2 * x, y, 0.0}; });
    REQUIRE(max_deviation(pullback_metric(u), Sym2{4.0, 0.0, 1.0}) < 1e-12);
}

TEST_CASE("flat map on the torus pulls back to the identity across the seam", "[tensor_field]") {
    const auto c = GridChart::torus(2 * std::numbers::pi, 32);
    REQUIRE(max_deviation(pullback_metric(flat_map(c)), Sym2::identity()) < 1e-12);
}

TEST_CASE("cylinder pulls back to the identity at stencil order", "[tensor_field]") {
    const double e64 = max_deviation(pullback_metric(cylinder(65)), Sym2::identity());
    const double e128 = max_deviation(pullback_metric(cylinder(129)), Sym2::identity());
    // one-sided second-order stencils at the edge dominate
    REQUIRE(e64 < 1e-3);
    REQUIRE(std::log2(e64 / e128) > 1.8);
    // the 4th-order interior is far more accurate
    REQUIRE(max_deviation(pullback_metric(cylinder(129)), Sym2::identity(), 2) < 1e-8);
}

TEST_CASE("pullback is symmetric by storage and PSD within truncation error", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 64);
    // rank drops along x2 = 0.5
    const auto u = ImmersionField::generate(c, [](double x, double y) {
        return Vec3{x, (y - 0.5) * (y - 0.5) * (y - 0.5), std::sin(x)};
    });
    const auto g = pullback_metric_checked(u);
    double trunc = 0.0, min_eig = 1e300;
    for (int j = 0; j < c.ny; ++j)
        for (int i = 0; i < c.nx; ++i) {
            const double x = c.x(i), y = c.y(j);
            const Vec3 d1{1.0, 0.0, std::cos(x)}, d2{0.0, 3 * (y - 0.5) * (y - 0.5), 0.0};
            const Sym2 exact = Jacobian{d1, d2}.gram();
            trunc = std::max(trunc, magnitude(g.metric(i, j) - exact));
            min_eig = std::min(min_eig, g.metric(i, j).min_eigenvalue());
        }
    REQUIRE(min_eig >= -10.0 * trunc);
    REQUIRE(g.min_singular_value >= 0.0);
}

TEST_CASE("degenerate Jacobian nodes are flagged, not fatal", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 16);
    const auto u = ImmersionField::generate(c, [](double x, double) { return Vec3{x, 0.0, 0.0}; });
    const auto r = pullback_metric_checked(u);
    REQUIRE(r.degenerate_nodes.size() == c.size());
}

TEST_CASE("mollify preserves constants", "[tensor_field]") {
    for (auto c : {GridChart::square(0.0, 1.0, 64), GridChart::torus(1.0, 64)}) {
        const ScalarField f(c, 3.7);
        const auto g = mollify(f, 0.1);
        for (double v : g.values) REQUIRE(std::abs(v - 3.7) < 1e-12);
        const MetricField m(c, Sym2{2.0, 0.3, 1.0});
        REQUIRE(max_deviation(mollify(m, 0.1), Sym2{2.0, 0.3, 1.0}) < 1e-12);
    }
}

TEST_CASE("mollify rejects under-resolved kernels", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 65);
    const ScalarField f(c, 1.0);
    REQUIRE_THROWS_AS(mollify(f, 1.9 * c.h()), PreconditionError);
    REQUIRE_NOTHROW(mollify(f, 2.0 * c.h()));
}

TEST_CASE("mollification error of a sine follows the kernel symbol", "[tensor_field]") {
    const int n = 1024;
    const auto c = GridChart::torus(2 * std::numbers::pi, n);
    const double k = 3.0;
    const auto f = ScalarField::generate(c, [&](double x, double) { return std::sin(k * x); });
    const double l0 = 0.4;
    double err[3];
    for (int s = 0; s < 3; ++s) {
        const double l = l0 / (1 << s);
        err[s] = sup_norm(mollify(f, l) - f);
        const double oracle = std::abs(1.0 - kernel_symbol(l, c.hx(), k));
        REQUIRE(err[s] == Approx(oracle).epsilon(1e-6));
    }
    for (int s = 0; s < 2; ++s) {
        const double ratio = err[s] / err[s + 1];
        // at least first order in l; the even kernel actually gives second order
        REQUIRE(ratio >= 2.0);
        REQUIRE(ratio == Approx(4.0).epsilon(0.05));
    }
}

TEST_CASE("mollification commutator decays like l^2", "[tensor_field]") {
    const auto c = GridChart::torus(2 * std::numbers::pi, 1024);
    const auto f = ScalarField::generate(c, [](double x, double) { return std::sin(2.0 * x); });
    const auto ff = zip(f, f, [](double a, double b) { return a * b; });
    std::vector<double> ls, es;
    for (double l : {0.4, 0.2, 0.1}) {
        const auto m = mollify(f, l);
        const auto comm = mollify(ff, l) - zip(m, m, [](double a, double b) { return a * b; });
        ls.push_back(std::log(l));
        es.push_back(std::log(sup_norm(comm)));
    }
    const double slope = ((es[2] - es[0]) / (ls[2] - ls[0]));
    REQUIRE(slope == Approx(2.0).margin(0.3));
}

TEST_CASE("mollify is linear and contracts the sup norm", "[tensor_field]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (auto c : {GridChart::square(0.0, 1.0, 48), GridChart::torus(1.0, 48)}) {
        ScalarField f(c), g(c);
        for (auto& v : f.values) v = U(rng);
        for (auto& v : g.values) v = U(rng);
        const double a = 0.7, b = -1.3;
        const auto lhs = mollify(a * f + b * g, 0.1);
        const auto rhs = a * mollify(f, 0.1) + b * mollify(g, 0.1);
        REQUIRE(sup_norm(lhs - rhs) < 1e-12);
        REQUIRE(sup_norm(mollify(f, 0.1)) <= sup_norm(f));
    }
}

TEST_CASE("mollify respects quasi-periodic jumps", "[tensor_field]") {
    const auto c = GridChart::torus(1.0, 64);
    const auto u = flat_map(c);
    const auto m = mollify(u, 0.1);
    REQUIRE(sup_norm(m - u) < 1e-12);
}

TEST_CASE("Hölder seminorm examples", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 65);
    REQUIRE(holder_seminorm(ScalarField(c, 2.5), 0.5) == 0.0);
    const auto x1 = ScalarField::generate(c, [](double x, double) { return x; });
    REQUIRE(holder_seminorm(x1, 1.0) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Hölder seminorm of sqrt(x1) approaches 1 and bounds brute force from below", "[tensor_field]") {
    double prev = 0.0;
    for (double eps : {1e-2, 1e-4, 1e-6}) {
        GridChart c{eps, 0.0, 1.0 - eps, 1.0, 256, 8, Boundary::clamped};
        const auto f = ScalarField::generate(c, [](double x, double) { return std::sqrt(x); });
        const double dyadic = holder_seminorm(f, 0.5);
        double brute = 0.0;
        for (int i = 0; i < c.nx; ++i)
            for (int k = i + 1; k < c.nx; ++k)
                brute = std::max(brute, std::abs(f(k, 0) - f(i, 0)) / std::sqrt(c.x(k) - c.x(i)));
        REQUIRE(dyadic <= brute + 1e-12);
        REQUIRE(brute <= 1.0 + 1e-12);
        REQUIRE(dyadic > prev);
        prev = dyadic;
    }
    REQUIRE(prev > 0.98);
}

TEST_CASE("Hölder seminorm is monotone under nested refinement", "[tensor_field]") {
    auto fn = [](double x, double y) { return std::sin(3 * x) * std::cos(2 * y) + std::sqrt(std::abs(x - 0.3)); };
    for (double theta : {0.2, 0.5, 1.0}) {
        double prev = 0.0;
        for (int n : {33, 65, 129, 257}) {
            const auto f = ScalarField::generate(GridChart::square(0.0, 1.0, n), fn);
            const double v = holder_seminorm(f, theta);
            REQUIRE(v >= prev - 1e-12);
            prev = v;
        }
        prev = 0.0;
        for (int n : {32, 64, 128, 256}) {
            const auto f = ScalarField::generate(GridChart::torus(2 * std::numbers::pi, n),
                                                 [](double x, double y) { return std::sin(x) + std::cos(3 * y); });
            const double v = holder_seminorm(f, theta);
            REQUIRE(v >= prev - 1e-12);
            prev = v;
        }
    }
}

TEST_CASE("norm report is consistent", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 64);
    const auto f = ScalarField::generate(c, [](double x, double y) { return std::sin(4 * x) * y; });
    const auto r = norm_report(f, {0.5, 1.0});
    REQUIRE(r.sup_norm >= 0.0);
    REQUIRE(r.c1_norm >= r.sup_norm);
    REQUIRE(r.c2_norm >= r.c1_norm);
    for (auto [th, v] : r.holder_seminorms) REQUIRE(v >= 0.0);
    REQUIRE(holder_seminorm(f, 1.0, 0) <= r.c1_norm);
}

TEST_CASE("shortness classification", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 16);
    const MetricField g(c, Sym2::identity());
    const auto a = check_short(flat_map(c, 0.7), g);
    REQUIRE(a.classification == Shortness::strictly_short);
    REQUIRE(a.min_margin == Approx(1.0 - 0.49).epsilon(1e-12));
    const auto b = check_short(flat_map(c), g);
    REQUIRE(b.classification == Shortness::short_only);
    REQUIRE(std::abs(b.min_margin) < 1e-12);
    REQUIRE(check_short(flat_map(c, 1.1), g).classification == Shortness::not_short);
}

TEST_CASE("strong-short bound and factorization residual", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 16);
    const MetricField g(c, Sym2::identity());
    // g - u#e = 0.51 Id = rho^2 (g + h) with rho^2 = 0.5, h = 0.02 Id
    const auto r = check_short(flat_map(c, 0.7), g, ScalarField(c, std::sqrt(0.5)), MetricField(c, Sym2::identity(0.02)));
    REQUIRE(*r.factorization_residual < 1e-12);
    REQUIRE(*r.strong_bound == Approx(0.02));
}

TEST_CASE("field container round trip", "[tensor_field]") {
    const auto c = GridChart::torus(2.0, 16);
    auto u = flat_map(c, 1.5);
    u(3, 4).z = 0.25;
    const auto path = (std::filesystem::temp_directory_path() / "nkflex_roundtrip.bin").string();
    write_field(u, path);
    const auto back = read_field<Vec3>(path);
    REQUIRE(back.chart.same_as(c));
    REQUIRE(sup_norm(back - u) == 0.0);
    REQUIRE(back.jump_x.x == 3.0);
    const auto csv = (std::filesystem::temp_directory_path() / "nkflex_roundtrip.csv").string();
    write_csv(MetricField(c, Sym2{1, 2, 3}), csv);
    REQUIRE(std::filesystem::file_size(csv) > 0);
    std::remove(path.c_str());
    std::remove(csv.c_str());
}

TEST_CASE("wide kernels take the FFT path with identical results", "[tensor_field]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const auto w = bump_weights(40.5);
    for (auto c : {GridChart::torus(1.0, 128), GridChart::square(0.0, 1.0, 128)}) {
        auto u = flat_map(c, 0.8);
        for (auto& v : u.values) v += Vec3{U(rng), U(rng), U(rng)} * 0.01;
        for (int axis : {0, 1}) {
            const auto a = detail::convolve_axis(u, w, axis, EdgeMode::reflect_odd);
            const auto b = detail::convolve_axis_fft(u, w, axis);
            REQUIRE(sup_norm(a - b) < 1e-12);
        }
    }
}

TEST_CASE("odd reflection preserves affine maps on clamped charts", "[tensor_field]") {
    const auto c = GridChart::square(0.0, 1.0, 64);
    const auto u = ImmersionField::generate(c, [](double x, double y) { return Vec3{0.8 * x + 0.1 * y, 0.3 - y, 2 * x}; });
    REQUIRE(sup_norm(mollify(u, 0.05, EdgeMode::reflect_odd) - u) < 1e-12);
    REQUIRE(sup_norm(mollify(u, 0.5, EdgeMode::reflect_odd) - u) < 1e-12);
}
