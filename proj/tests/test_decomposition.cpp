#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "nkflex/primitive.hpp"

using namespace nkflex;
using Catch::Approx;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

MetricField smooth_random_spd(const GridChart& c, std::uint64_t seed, double amplitude) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    struct Mode { int kx, ky; double a, ph; };
    std::vector<Mode> modes[3];
    for (auto& m : modes)
        for (int k = 0; k < 6; ++k) m.push_back({int(U(rng) * 3), int(U(rng) * 3), U(rng), U(rng) * 3});
    auto eval = [&](const std::vector<Mode>& ms, double x, double y) {
        double s = 0.0, w = 0.0;
        for (const auto& m : ms) {
            s += m.a * std::cos(two_pi * (m.kx * (x - c.x0) / c.lx + m.ky * (y - c.y0) / c.ly) + m.ph);
            w += std::abs(m.a);
        }
        return s / w;  // in [-1, 1]
    };
    return MetricField::generate(c, [&](double x, double y) {
        // off-identity part has operator norm <= amplitude
        const double p = eval(modes[0], x, y), q = eval(modes[1], x, y), r = eval(modes[2], x, y);
        const Sym2 E{p, q, r};
        const double n = std::max(magnitude(E), 1.0);
        return Sym2::identity() + E * (amplitude / n);
    });
}

}  // namespace

TEST_CASE("equiangular frame has coefficients 2/3 at the identity", "[decomposition]") {
    const auto f = build_frame(Sym2::identity(), 2.0);
    const auto c = f.coefficients(Sym2::identity());
    for (double v : c) REQUIRE(v == Approx(2.0 / 3.0).epsilon(1e-14));
    REQUIRE(f.n_star == 3);
    REQUIRE(f.validity_radius > 0.0);
    REQUIRE(f.inner_radius() == Approx(f.validity_radius / 4));
}

TEST_CASE("frame decomposition reconstructs symmetric matrices exactly", "[decomposition]") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int n : {2, 3, 4}) {
        Eigen::MatrixXd G0 = Eigen::MatrixXd::Identity(n, n);
        G0(0, 1) = G0(1, 0) = 0.2;
        const auto f = build_frame(n, G0, 2.0);
        REQUIRE(f.n_star == n * (n + 1) / 2);
        for (int k = 0; k < 2000; ++k) {
            Eigen::MatrixXd G(n, n);
            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b) G(a, b) = G(b, a) = N(rng);
            REQUIRE((f.reconstruct(f.coefficients(G)) - G).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("off-diagonal perturbation of the identity keeps positive coefficients", "[decomposition]") {
    const auto f = build_frame(Sym2::identity(), 2.0);
    for (double v : f.coefficients(Sym2{1.0, 0.1, 1.0})) REQUIRE(v > 0.0);
}

TEST_CASE("coefficients stay above the radius on the certified ball", "[decomposition]") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const Sym2& base : {Sym2::identity(), Sym2{2.0, 0.5, 1.0}}) {
        const auto f = build_frame(base, 4.0);
        const double r = f.validity_radius;
        for (int k = 0; k < 10000; ++k) {
            Sym2 E{N(rng), N(rng), N(rng)};
            E *= r * U(rng) / magnitude(E);
            const auto c = f.coefficients(base + E);
            REQUIRE(std::min({c[0], c[1], c[2]}) >= r - 1e-12);
        }
    }
}

TEST_CASE("frame construction validates its base point", "[decomposition]") {
    REQUIRE_THROWS_AS(build_frame(Sym2{10.0, 0.0, 1.0}, 2.0), PreconditionError);
    Eigen::MatrixXd bad(2, 3);
    REQUIRE_THROWS_AS(build_frame(2, bad, 2.0), PreconditionError);
}

TEST_CASE("Beltrami coefficient examples", "[decomposition]") {
    const auto c = GridChart::torus(1.0, 16);
    REQUIRE(beltrami_coefficient(MetricField(c, Sym2::identity())).sup_abs == 0.0);
    const auto d = beltrami_coefficient(MetricField(c, Sym2{4.0, 0.0, 1.0}));
    REQUIRE(std::abs(d.mu(3, 3) - Complex(1.0 / 3.0, 0.0)) < 1e-15);
    for (double a : {0.1, 1.0, 7.0}) REQUIRE(beltrami_coefficient(MetricField(c, Sym2::identity(a))).sup_abs == 0.0);
}

TEST_CASE("Beltrami coefficient obeys the ellipticity bound", "[decomposition]") {
    const auto c = GridChart::torus(1.0, 64);
    const auto H = smooth_random_spd(c, 5, 0.6);
    REQUIRE(beltrami_coefficient(H).bound_excess <= 1e-12);
}

TEST_CASE("Beltrami coefficient rejects non-SPD nodes by name", "[decomposition]") {
    const auto c = GridChart::torus(1.0, 16);
    MetricField H(c, Sym2::identity());
    H(2, 5) = Sym2{1.0, 2.0, 1.0};
    try {
        beltrami_coefficient(H);
        FAIL("expected an error");
    } catch (const PreconditionError& e) {
        REQUIRE(std::string(e.what()).find("(2, 5)") != std::string::npos);
    }
}

TEST_CASE("identity metric gives identity coordinates", "[decomposition]") {
    for (auto c : {GridChart::torus(two_pi, 64), GridChart::square(0.0, 1.0, 64)}) {
        const auto f = solve_conformal(MetricField(c, Sym2::identity()));
        REQUIRE(f.residual_sup < 1e-12);
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i) {
                REQUIRE(std::abs(f.phi1(i, j) - c.x(i)) < 1e-12);
                REQUIRE(std::abs(f.phi2(i, j) - c.y(j)) < 1e-12);
                REQUIRE(std::abs(f.theta(i, j) - 1.0) < 1e-12);
            }
    }
}

TEST_CASE("constant anisotropic metric gives the affine solution", "[decomposition]") {
    const auto c = GridChart::torus(two_pi, 256);
    const auto f = solve_conformal(MetricField(c, Sym2{4.0, 0.0, 1.0}));
    const double mu = 1.0 / 3.0;
    REQUIRE(std::abs(f.beta - Complex(mu, 0.0)) < 1e-12);
    REQUIRE(f.residual_sup < 1e-8);
    for (std::size_t k = 0; k < f.phi1.size(); k += 97) {
        REQUIRE(f.grad1[k].x == Approx(1 + mu).epsilon(1e-8));
        REQUIRE(f.grad2[k].y == Approx(1 - mu).epsilon(1e-8));
        REQUIRE(f.grad1[k].x / f.grad2[k].y == Approx(2.0).epsilon(1e-8));
        REQUIRE(f.theta[k] * f.theta[k] == Approx(9.0 / 4.0).epsilon(1e-8));
    }
    // Phi = ((1 + mu) x1, (1 - mu) x2)
    for (int j = 0; j < c.ny; j += 31)
        for (int i = 0; i < c.nx; i += 29) {
            REQUIRE(std::abs(f.phi1(i, j) - (1 + mu) * c.x(i)) < 1e-8);
            REQUIRE(std::abs(f.phi2(i, j) - (1 - mu) * c.y(j)) < 1e-8);
        }
}

TEST_CASE("random smooth SPD metrics factor conformally", "[decomposition]") {
    const auto c = GridChart::torus(two_pi, 256);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto H = smooth_random_spd(c, seed, 0.2);
        const auto f = solve_conformal(H);
        REQUIRE(f.residual_sup < 1e-6);
        REQUIRE(f.min_det > 0.0);
        REQUIRE(f.min_theta > 0.0);
        REQUIRE(f.sup_mu <= std::sqrt(1.0 - 1.0 / (2 * std::pow(1.25, 4))));
    }
}

TEST_CASE("clamped charts are solved on a padded torus", "[decomposition]") {
    const auto c = GridChart::square(0.0, 1.0, 128);
    const auto H = smooth_random_spd(c, 9, 0.3);
    const auto f = solve_conformal(H);
    REQUIRE(f.residual_sup < 1e-6);
    REQUIRE(f.min_det > 0.0);
}

TEST_CASE("stalled contraction reports its factor", "[decomposition]") {
    const auto c = GridChart::torus(two_pi, 64);
    const auto H = smooth_random_spd(c, 4, 0.95);
    ConformalOptions opt;
    opt.max_iterations = 3;
    REQUIRE_THROWS_AS(solve_conformal(H, opt), ConvergenceError);
}

TEST_CASE("conformal terms reproduce the metric with lattice phases", "[decomposition]") {
    const auto c = GridChart::torus(two_pi, 128);
    auto H = smooth_random_spd(c, 12, 0.2);
    for (auto& h : H.values) h += Sym2{0.1, 0.15, 0.0};
    const auto f = solve_conformal(H);
    const ScalarField rho(c, 0.3);
    const auto terms = conformal_terms(f, rho);
    REQUIRE(terms.size() == 3);
    const auto sum = primitive_sum(c, terms);
    double worst = 0.0;
    for (std::size_t k = 0; k < sum.size(); ++k) worst = std::max(worst, magnitude(sum[k] - H[k] * 0.09));
    REQUIRE(worst < 1e-8);
    for (const auto& t : terms) {
        // integer multiples of the period
        REQUIRE(std::abs(std::remainder(t.phase.jump_x / c.lx, 1.0)) < 1e-12);
        REQUIRE(std::abs(std::remainder(t.phase.jump_y / c.ly, 1.0)) < 1e-12);
    }
}

TEST_CASE("frame terms reproduce a slowly varying metric", "[decomposition]") {
    const auto c = GridChart::square(0.0, 1.0, 32);
    const auto D = MetricField::generate(c, [](double x, double y) { return Sym2{0.3 + 0.02 * x, 0.01 * y, 0.3}; });
    const auto frame = build_frame(Sym2::identity(0.3), 4.0);
    const auto sum = primitive_sum(c, frame_terms(frame, D));
    REQUIRE(sup_norm(sum - D) < 1e-12);
}
