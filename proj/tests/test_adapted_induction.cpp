#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "nkflex/induction.hpp"

using namespace nkflex;
using Catch::Approx;

namespace {

const CorrugationTable& table() {
    static const CorrugationTable t(1.0, 257, 512);
    return t;
}

Rational random_rational(std::mt19937_64& rng, long lo_num, long hi_num, long den) {
    std::uniform_int_distribution<long> d(lo_num, hi_num);
    return Rational(d(rng), den);
}

// Distance to a segment by dense sampling along it: an oracle independent of
// the projection formula.
double sampled_segment_distance(const Vec2& p, const Segment& s, int samples = 20000) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= samples; ++k) {
        const double t = static_cast<double>(k) / samples;
        const Vec2 q = s.a + (s.b - s.a) * t;
        best = std::min(best, magnitude(p - q));
    }
    return best;
}

// Adapted state on the flat 2pi-torus with g = 1.44 Id, rho = 1/4, h = 0:
// the scaled chart map u = s x with s^2 = 1.44 (1 - 1/16).
AdaptedState flat_torus_state(int n, double A) {
    const auto c = GridChart::torus(2.0 * std::numbers::pi, n);
    AdaptedState st;
    st.g = constant_metric(c, Sym2{1.44, 0.0, 1.44});
    st.rho = ScalarField(c, 0.25);
    st.h = MetricField(c);
    st.u = flat_map(c, std::sqrt(1.44 * (1.0 - 0.0625)));
    st.A = SymbolicPower{Rational(A), 1};
    st.theta = Rational(3, 20);
    st.alpha = Rational(1, 10);
    return st;
}

struct TorusLadder {
    AdaptedState start = flat_torus_state(512, 45000.0);
    PassResult pass;
    TorusLadder() {
        InductionOptions o;
        o.depth = 5;
        o.strict = false;
        pass = inductive_pass(start, SkeletonSet::whole(), o, table());
    }
};

const TorusLadder& torus_ladder() {
    static const TorusLadder l;
    return l;
}

}  // namespace

// ---------------------------------------------------------------- schedule

TEST_CASE("growth exponent for theta = 0.15, alpha = 0.1 is 31/25", "[adapted_induction]") {
    const auto law = exponent_law(Rational(3, 20), Rational(1, 10), 2);
    CHECK(law.b == Rational(31, 25));
    CHECK(to_double(law.b) == Approx(1.24).epsilon(1e-15));
    CHECK(law.theta_next == Rational(3, 20) / Rational(961, 625));
    CHECK(law.alpha_next == Rational(1, 10) / (2 * Rational(961, 625)));
}

TEST_CASE("growth exponent tends to 1 as alpha vanishes near the top of the band", "[adapted_induction]") {
    const Rational theta = parse_rational("0.19999");
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 12; ++k) {
        const Rational alpha(1, boost::multiprecision::cpp_int(1) << (4 * k));
        const auto law = exponent_law(theta, alpha, 2);
        const double bm1 = to_double(law.b - 1);
        CHECK(bm1 > 0.0);
        CHECK(bm1 < prev);
        prev = bm1;
    }
    CHECK(prev < 1e-9);
    const auto law = exponent_law(theta, Rational(1, boost::multiprecision::cpp_int(1) << 48), 2);
    CHECK(to_double(law.theta_next) == Approx(0.19999).epsilon(1e-9));
}

TEST_CASE("three-dimensional exponent law uses n_* = 6", "[adapted_induction]") {
    const auto law = exponent_law(Rational(1, 20), Rational(1, 10), 3);
    CHECK(law.n_star == 6);
    CHECK(law.b == 1 + Rational(6, 100) / Rational(35, 100));
    CHECK(law.b == Rational(41, 35));
}

TEST_CASE("exponent band is enforced", "[adapted_induction]") {
    CHECK_THROWS_AS(exponent_law(Rational(1, 5), Rational(1, 10), 2), ConfigError);
    CHECK_THROWS_AS(exponent_law(Rational(1, 4), Rational(1, 10), 2), ConfigError);
    CHECK_THROWS_AS(exponent_law(Rational(1, 13), Rational(1, 10), 3), ConfigError);
    CHECK_NOTHROW(exponent_law(Rational(1, 14), Rational(1, 10), 3));
    CHECK_THROWS_AS(exponent_law(Rational(1, 10), Rational(1), 2), ConfigError);
}

TEST_CASE("exponent algebra holds exactly for random admissible rationals", "[adapted_induction]") {
    std::mt19937_64 rng(20261019);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 3;
        const int n_star = n * (n + 1) / 2;
        const Rational top(1, n == 2 ? 5 : 2 * n_star + 1);
        const Rational theta = random_rational(rng, 1, 999, 1000) * top;
        const Rational alpha = random_rational(rng, 1, 999, 1000);
        const auto law = exponent_law(theta, alpha, n);
        const Rational b = n == 2 ? 1 + 4 * alpha * theta / (1 - 5 * theta)
                                  : 1 + 2 * n_star * alpha * theta / (1 - (2 * n_star + 1) * theta);
        REQUIRE(law.b == b);
        REQUIRE(law.theta_next * law.b * law.b == theta);
        REQUIRE(law.alpha_next * 2 * law.b * law.b == alpha);
        const SymbolicPower A{Rational(64), 1};
        const auto Anext = A.pow(law.b_squared);
        REQUIRE(Anext.base == A.base);
        REQUIRE(Anext.exponent == law.b_squared);
    }
}

TEST_CASE("schedule ladder is ordered and names the minimal A when it is not", "[adapted_induction]") {
    const Rational theta(3, 20), alpha(1, 10);
    const auto law = exponent_law(theta, alpha, 2);
    const double la = minimal_log_A(law, 1.0 / 16.0);
    CHECK(std::exp(la) == Approx(22295.2).epsilon(1e-4));

    const auto s = build_schedule(SymbolicPower{Rational(45000), 1}, theta, alpha, 1.0 / 16.0, 2, 5);
    CHECK(s.b == Approx(1.24));
    CHECK(s.kappa == Approx(1.0 + (0.3 / 1.24) * 0.34));
    for (int q = 1; q < s.levels(); ++q) {
        CHECK(s.delta_at(q + 1) <= s.delta_at(q) / 4.0);
        CHECK(s.log_lambda[q + 1] - s.log_lambda[q] >= std::log(2.0));
        CHECK(s.log_lambda[q + 1] == Approx(1.24 * s.log_lambda[q]).epsilon(1e-12));
        CHECK(s.log_lambda[q] == Approx(std::log(45000.0) - std::log(s.delta_at(q)) / 0.3).epsilon(1e-12));
        CHECK(s.radius(q) == Approx(1.0 / s.lambda(q + 1)));
    }

    try {
        build_schedule(SymbolicPower{Rational(64), 1}, theta, alpha, 1.0 / 16.0, 2, 3);
        FAIL("ordering violation not reported");
    } catch (const ScheduleOrderingError& e) {
        CHECK(e.level == 1);
        CHECK(std::string(e.what()).find("minimal adequate A") != std::string::npos);
        CHECK(e.minimal_log_A == Approx(la));
    }
    CHECK_NOTHROW(build_schedule(SymbolicPower{Rational(std::exp(la + 1e-9)), 1}, theta, alpha, 1.0 / 16.0, 2, 6));
}

TEST_CASE("decimal rationals parse exactly", "[adapted_induction]") {
    CHECK(parse_rational("0.15") == Rational(3, 20));
    CHECK(parse_rational("3/20") == Rational(3, 20));
    CHECK(parse_rational("1e-2") == Rational(1, 100));
    CHECK(parse_rational("-0.5") == Rational(-1, 2));
}

// ---------------------------------------------------------------- skeleta

TEST_CASE("skeleton distances match sampled geometry and vanish on the set", "[adapted_induction]") {
    const auto c = GridChart::square(0.0, 1.0, 65);
    const Vec2 a{0.25, 0.25}, b{0.75, 0.25}, d{0.25, 0.75};
    const auto V = SkeletonSet::points({a, b, d});
    const auto E = SkeletonSet::edges({{a, b}, {b, d}, {d, a}});
    const auto dv = V.distance_field(c), de = E.distance_field(c);
    for (int j = 0; j < c.ny; j += 4)
        for (int i = 0; i < c.nx; i += 4) {
            const Vec2 p{c.x(i), c.y(j)};
            const double ov = std::min({magnitude(p - a), magnitude(p - b), magnitude(p - d)});
            double oe = std::numeric_limits<double>::infinity();
            for (const auto& s : E.segments) oe = std::min(oe, sampled_segment_distance(p, s));
            CHECK(dv[c.index(i, j)] >= 0.0);
            CHECK(dv[c.index(i, j)] == Approx(ov).margin(1e-15));
            CHECK(de[c.index(i, j)] == Approx(oe).margin(1e-4));
            CHECK(de[c.index(i, j)] <= oe + 1e-15);
        }
    CHECK(V.nodes_on(c).size() == 3);
    // edge a-b lies on grid row 16: nodes 16..48; b-d is a diagonal through nodes; d-a on column 16
    const auto on = E.nodes_on(c);
    for (auto k : on) CHECK(de[k] <= 1e-9 * c.h());
    CHECK(on.size() == 33 + 33 + 33 - 3);
    CHECK_THROWS_AS(V.distance_field(GridChart::torus(1.0, 16)), PreconditionError);
    CHECK(SkeletonSet::whole().distance(Vec2{0.3, 0.1}) == 0.0);
    CHECK(std::isinf(SkeletonSet::none().distance(Vec2{0.3, 0.1})));
}

TEST_CASE("separation constant is half the sine of the smallest half-angle", "[adapted_induction]") {
    const Vec2 a{0.25, 0.25}, b{0.75, 0.25}, d{0.25, 0.75};
    const auto E = SkeletonSet::edges({{a, b}, {b, d}, {d, a}});
    CHECK(separation_constant(E) == Approx(0.5 * std::sin(std::numbers::pi / 8.0)).epsilon(1e-12));
    CHECK(separation_constant(SkeletonSet::points({a, b})) == 1.0);
    CHECK(feature_gap(SkeletonSet::points({a, b, d})) == Approx(0.5));
}

TEST_CASE("flood fill counts components and wraps on a torus", "[adapted_induction]") {
    const auto cl = GridChart::square(0.0, 1.0, 32);
    const auto tor = GridChart::torus(1.0, 32);
    std::vector<bool> mask(cl.size(), false);
    for (int j = 0; j < 32; ++j) {
        mask[cl.index(0, j)] = true;
        mask[cl.index(31, j)] = true;
        mask[cl.index(15, j)] = (j % 2 == 0);
    }
    CHECK(connected_components(cl, mask).count == 2 + 16);
    CHECK(connected_components(tor, mask).count == 1 + 16);
    std::vector<bool> diag(cl.size(), false);
    for (int k = 0; k < 32; ++k) diag[cl.index(k, k)] = true;
    CHECK(connected_components(cl, diag).count == 32);
}

// ---------------------------------------------------------------- cut-offs

TEST_CASE("quintic profile has the stated derivative bound and C2 joins", "[adapted_induction]") {
    double maxd = 0.0;
    const double e = 1e-6;
    for (int k = 0; k <= 10000; ++k) {
        const double t = k / 10000.0;
        maxd = std::max(maxd, (smoothstep(t + e) - smoothstep(t - e)) / (2 * e));
    }
    CHECK(maxd == Approx(15.0 / 8.0).epsilon(1e-6));
    // across a C2 join the centred second difference is O(e); a C1 profile would give O(1)
    const double e2 = 1e-4;
    for (double t : {0.0, 1.0}) {
        const double d2 = (smoothstep(t + e2) - 2 * smoothstep(t) + smoothstep(t - e2)) / (e2 * e2);
        CHECK(std::abs(d2) < 100 * e2);
    }
    CHECK(level_profile(1.5) == 0.0);
    CHECK(level_profile_wide(1.5) == 0.0);
    CHECK(level_profile(2.0) == 1.0);
    CHECK(level_profile_wide(1.75) == 1.0);
}

TEST_CASE("cut-offs saturate on the inner tube and vanish at low amplitude", "[adapted_induction]") {
    const auto c = GridChart::square(0.0, 1.0, 129);
    const auto V = SkeletonSet::points({{0.5, 0.5}});
    const auto dist = V.distance_field(c);
    const auto R = TubeRadii::from(1.0, 1.0);
    const double delta = 1e-3, r = 0.2;
    const auto high = make_cutoffs(ScalarField(c, 0.25), dist, delta, r, R);
    CHECK(high.nested);
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (dist[k] < R.inner * r) CHECK(high.chi[k] == 1.0);
        if (dist[k] >= R.outer * r) CHECK(high.chi_wide[k] == 0.0);
    }
    const auto low = make_cutoffs(ScalarField(c, 1.49 * std::sqrt(delta)), dist, delta, r, R);
    CHECK(sup_norm(low.chi) == 0.0);
    CHECK(sup_norm(low.chi_wide) == 0.0);
}

TEST_CASE("cut-off nesting holds node-wise on a random scenario", "[adapted_induction]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    const auto c = GridChart::square(0.0, 1.0, 129);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Vec2> pts;
        for (int k = 0; k < 4; ++k) pts.push_back({U(rng), U(rng)});
        const auto dist = SkeletonSet::points(pts).distance_field(c);
        const double kx = 1 + trial, ky = 2 + trial;
        const auto rho = ScalarField::generate(c, [&](double x, double y) {
            return 0.125 * (1.0 + std::sin(2 * std::numbers::pi * kx * x) * std::cos(2 * std::numbers::pi * ky * y));
        });
        const double delta = std::pow(0.25 * U(rng), 2.0);
        const auto cut = make_cutoffs(rho, dist, delta, 0.1 + 0.2 * U(rng), TubeRadii::from(U(rng), 1.0));
        REQUIRE(cut.nested);
        for (std::size_t k = 0; k < c.size(); ++k)
            if (cut.chi[k] > 0.0) REQUIRE(cut.chi_wide[k] == 1.0);
    }
}

// ---------------------------------------------------------------- amplitude recursion

TEST_CASE("amplitude recursion fixed points", "[adapted_induction]") {
    const auto c = GridChart::torus(1.0, 16);
    const auto rho = ScalarField::generate(c, [](double x, double y) { return 0.2 + 0.03 * std::sin(6.28 * x) * std::cos(6.28 * y); });
    const double delta = 0.004;
    const auto same = update_rho(rho, ScalarField(c, 0.0), delta);
    for (std::size_t k = 0; k < c.size(); ++k) CHECK(same[k] == rho[k]);
    const auto flat = update_rho(rho, ScalarField(c, 1.0), delta);
    for (std::size_t k = 0; k < c.size(); ++k) CHECK(flat[k] == std::sqrt(delta));
}

TEST_CASE("amplitude recursion is monotone on the admissible band", "[adapted_induction]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const auto c = GridChart::torus(1.0, 64);
    for (int trial = 0; trial < 20; ++trial) {
        const double dq1 = 0.01 * (1.0 + U(rng)), dq2 = dq1 / (4.0 + 10.0 * U(rng));
        ScalarField rho(c), chi(c);
        for (std::size_t k = 0; k < c.size(); ++k) {
            rho[k] = 1.5 * std::sqrt(dq2) + U(rng) * (2.0 * std::sqrt(dq1) - 1.5 * std::sqrt(dq2));
            chi[k] = U(rng);
        }
        const auto next = update_rho(rho, chi, dq2);
        for (std::size_t k = 0; k < c.size(); ++k) {
            REQUIRE(next[k] <= rho[k]);
            REQUIRE(next[k] >= std::sqrt(dq2) * (1 - 1e-15));
            REQUIRE(next[k] * next[k] == Approx(rho[k] * rho[k] * (1 - chi[k] * chi[k]) + dq2 * chi[k] * chi[k]).epsilon(1e-14));
        }
    }
}

// ---------------------------------------------------------------- inductive pass

TEST_CASE("pass with Sigma = S leaves the state unchanged away from the tubes and fixes S", "[adapted_induction]") {
    const auto c = GridChart::square(0.0, 1.0, 129);
    const Vec2 a{0.25, 0.25}, b{0.75, 0.25}, d{0.25, 0.75};
    const auto S = SkeletonSet::points({a, b, d});
    const auto dist = S.distance_field(c);
    // rho vanishing on S; g = s^2 / (1 - rho^2) Id makes g - u#e = rho^2 g exactly with h = 0
    const double s2 = 0.81;
    AdaptedState st;
    st.rho = map(dist, [](double r) { return 0.25 * smoothstep(r / 0.2); });
    st.g = map(st.rho, [&](double r) { return Sym2{s2 / (1 - r * r), 0.0, s2 / (1 - r * r)}; });
    st.h = MetricField(c);
    st.u = flat_map(c, std::sqrt(s2));
    st.sigma = S;
    st.A = SymbolicPower{Rational(45000), 1};
    st.theta = Rational(3, 20);
    st.alpha = Rational(1, 10);

    InductionOptions o;
    o.depth = 3;
    o.strict = false;
    const auto pr = inductive_pass(st, S, o, table());
    double reach = (o.halo + 2) * c.h();
    for (const auto& L : pr.levels) reach = std::max(reach, L.radius * pr.radii.outer + L.ell + (o.halo + 2) * c.h());
    INFO("levels " << pr.levels.size() << ", truncation: " << pr.truncation);
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (dist[k] > reach) {
            REQUIRE(magnitude(pr.state.u[k] - st.u[k]) == 0.0);
            REQUIRE(pr.state.rho[k] == st.rho[k]);
        }
    }
    for (auto k : S.nodes_on(c)) CHECK(magnitude(pr.state.u[k] - st.u[k]) == 0.0);
    CHECK(pr.state.A.exponent == pr.schedule.law.b_squared);
    CHECK(pr.state.theta == Rational(3, 20) / pr.schedule.law.b_squared);
}

TEST_CASE("one flat-torus level passes every estimate", "[adapted_induction]") {
    const auto st = flat_torus_state(512, 45000.0);
    InductionOptions o;
    o.depth = 1;
    o.strict = true;
    PassResult pr;
    REQUIRE_NOTHROW(pr = inductive_pass(st, SkeletonSet::whole(), o, table()));
    REQUIRE(pr.levels.size() == 1);
    const auto& L = pr.levels.front();
    CHECK(L.assertions_passed());
    CHECK(L.residual < 1e-9);
    CHECK(L.min_margin > 0.0);
    CHECK(L.h_sup <= 0.5);
    CHECK(L.rho_max <= 0.25);
    CHECK(L.rho_min == Approx(std::sqrt(L.delta)).epsilon(1e-12));
}

TEST_CASE("flat-torus ladder of depth 5 keeps every estimate", "[adapted_induction]") {
    const auto& l = torus_ladder();
    INFO("truncation: " << l.pass.truncation);
    REQUIRE(!l.pass.levels.empty());
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& L : l.pass.levels) {
        for (const auto& f : L.failures) UNSCOPED_INFO(f.describe());
        CHECK(L.assertions_passed());
        CHECK(L.sup_defect < prev);
        prev = L.sup_defect;
    }
}

TEST_CASE("flat-torus pass displacement stays within A^-1/2", "[adapted_induction]") {
    const auto& l = torus_ladder();
    CHECK(l.pass.displacement <= std::pow(45000.0, -0.5));
}

// ---------------------------------------------------------------- global driver

TEST_CASE("an isometric map is refused as not strictly short", "[adapted_induction]") {
    const auto c = GridChart::square(0.0, 1.0, 33);
    GlobalConfig cfg;
    cfg.skeleta = {SkeletonSet::whole()};
    CHECK_THROWS_WITH(run_global(flat_map(c), constant_metric(c, Sym2{1, 0, 1}), cfg, table()),
                      Catch::Matchers::ContainsSubstring("not strictly short"));
}

TEST_CASE("unreachable target exponent quotes the product law", "[adapted_induction]") {
    const auto c = GridChart::square(0.0, 1.0, 33);
    GlobalConfig cfg;
    cfg.skeleta = {SkeletonSet::points({{0.5, 0.5}}), SkeletonSet::whole()};
    cfg.target_theta = Rational(3, 20);
    const Rational expected = final_exponent(Rational(3, 20), Rational(1, 10), 2);
    CHECK(expected < Rational(3, 20));
    CHECK_THROWS_WITH(run_global(flat_map(c, 0.5), constant_metric(c, Sym2{1, 0, 1}), cfg, table()),
                      Catch::Matchers::ContainsSubstring(to_string(expected)));
}

TEST_CASE("final exponent is the product law", "[adapted_induction]") {
    const auto l1 = exponent_law(Rational(3, 20), Rational(1, 10), 2);
    const auto l2 = exponent_law(l1.theta_next, l1.alpha_next, 2);
    CHECK(final_exponent(Rational(3, 20), Rational(1, 10), 2) == Rational(3, 20) / (l1.b_squared * l2.b_squared));
}

TEST_CASE("disc with a triangle keeps u fixed on the skeleta", "[adapted_induction]") {
    const auto c = GridChart::square(0.0, 1.0, 257);
    const Vec2 a{0.25, 0.25}, b{0.75, 0.25}, d{0.25, 0.75};
    GlobalConfig cfg;
    cfg.A = SymbolicPower{Rational(45000), 1};
    cfg.skeleta = {SkeletonSet::points({a, b, d}), SkeletonSet::edges({{a, b}, {b, d}, {d, a}}), SkeletonSet::whole()};
    cfg.pass.depth = 2;
    cfg.pass.strict = false;
    const auto u = flat_map(c, std::sqrt(15.0 / 16.0));
    const auto r = run_global(u, constant_metric(c, Sym2{1, 0, 1}), cfg, table());
    REQUIRE(r.passes.size() == 3);
    ImmersionField ref = r.bootstrap.u;
    for (std::size_t j = 0; j + 1 < r.passes.size(); ++j) {
        const auto& sk = cfg.skeleta[j];
        for (auto k : sk.nodes_on(c))
            for (std::size_t later = j + 1; later < r.passes.size(); ++later)
                CHECK(magnitude(r.passes[later].state.u[k] - r.passes[j].state.u[k]) <= 1e-12);
        for (const auto& L : r.passes[j].levels)
            for (const auto& f : L.failures) {
                INFO(f.describe());
                CHECK(f.estimate.find("geometric condition") == std::string::npos);
            }
    }
}
