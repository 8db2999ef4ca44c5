/// @file benchmarks.hpp
/// @brief Fixed benchmark setups shared by the command-line tool and the
/// acceptance runner: flat-strip step, torus conformal stage, metric addition
/// sweep, conformal factorization checks and corrugation table dumps.
#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <vector>

#include "nkflex/add_metric.hpp"
#include "nkflex/fit.hpp"

namespace nkflex::bench {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// (1 - r^2/R^2)^3 inside the disc of radius R around (cx, cy).
inline double bump(double x, double y, double cx, double cy, double R) {
    const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (R * R);
    if (r2 >= 1.0) return 0.0;
    const double t = 1.0 - r2;
    return t * t * t;
}

// ------------------------------------------------------------------ step

struct StepPoint {
    double lambda = 0.0, sup_defect = 0.0, outside = 0.0, min_eigenvalue = 0.0, max_eigenvalue = 0.0, gamma_bar = 0.0;
    bool support_ok = false, band_ok = false;
    double seconds = 0.0;
};

struct StepBench {
    std::vector<StepPoint> points;
    double slope = 0.0;
};

/// One step on the unit square adding eps * bump * dx (x) dx to the flat map.
inline StepBench step_bench(const std::vector<double>& lambdas, const CorrugationTable& table, int n = 1025) {
    const auto c = GridChart::square(0.0, 1.0, n);
    const double eps = 0.01;
    const auto u = flat_map(c);
    const auto rho = ScalarField::generate(c, [&](double x, double y) { return std::sqrt(eps) * bump(x, y, 0.5, 0.5, 0.3); });
    const auto term = linear_term(rho, Vec2{1.0, 0.0});
    StepBench b;
    std::vector<double> sup;
    for (double l : lambdas) {
        StepParams p;
        p.lambda = l;
        p.epsilon = eps;
        p.delta = eps;
        const auto r = step(u, term, p, table);
        StepPoint pt{l, r.sup_defect, 0.0, r.min_eigenvalue, r.max_eigenvalue, r.gamma_bar, r.support_ok, r.band_ok, r.wall_time};
        for (std::size_t k = 0; k < u.size(); ++k)
            if (rho[k] == 0.0) pt.outside = std::max(pt.outside, magnitude(r.v[k] - u[k]));
        b.points.push_back(pt);
        sup.push_back(r.sup_defect);
    }
    b.slope = loglog_slope(lambdas, sup);
    return b;
}

// ------------------------------------------------------------------ stage

struct StageBench {
    std::vector<double> K, sup_error;
    std::size_t terms = 0;
};

/// Flat 2pi-torus map plus 0.1 Id through its two conformal terms.
inline StageBench stage_bench(const std::vector<double>& Ks, const CorrugationTable& table, int n = 1024) {
    const auto c = GridChart::torus(two_pi, n);
    const auto u = flat_map(c);
    const auto f = solve_conformal(MetricField(c, Sym2::identity(0.1)));
    const auto terms = conformal_terms(f, ScalarField(c, 1.0));
    StageBench b;
    b.terms = terms.size();
    for (double K : Ks) {
        StepParams p;
        p.lambda = 4;
        p.epsilon = p.delta = 0.1;
        StageParams s;
        s.K = K;
        s.quantum = 1.0;
        b.K.push_back(K);
        b.sup_error.push_back(stage(u, terms, p, s, table).sup_defect);
    }
    return b;
}

// ------------------------------------------------------------------ metric addition

struct MetricAdditionBench {
    std::vector<double> lambda, sup_error;
    double slope = 0.0;
    double kappa = 1.5;
    std::vector<double> moved_radius, allowed_radius, ell;
};

inline MetricAddParams metric_addition_params(double lambda) {
    MetricAddParams p;
    p.delta = 0.1;
    p.lambda = lambda;
    p.kappa = 1.5;
    p.alpha = 0.5;
    p.gamma = 1.0;
    p.c0 = 32.0 / std::pow(32.0, 1.5);
    p.c1 = 4.0 / std::sqrt(32.0);
    return p;
}

/// Sup E against lambda for a constant rho on a small torus, and the reach
/// of the map change around a compactly supported rho.
inline MetricAdditionBench metric_addition_bench(const std::vector<double>& lambdas, const CorrugationTable& table, int n = 1024) {
    const double L = two_pi / 32;
    const auto c = GridChart::torus(L, n);
    const auto u = flat_map(c, 0.9);
    const MetricField g(c, Sym2::identity()), h(c);
    const ScalarField rho(c, std::sqrt(0.1));
    const double R = 0.4 * L;
    const auto bumped = ScalarField::generate(c, [&](double x, double y) { return std::sqrt(0.1) * bump(x, y, L / 2, L / 2, R); });
    MetricAdditionBench b;
    for (double l : lambdas) {
        const auto r = add_metric_2d(u, rho, g, h, metric_addition_params(l), table);
        b.lambda.push_back(l);
        b.sup_error.push_back(r.sup_error);
        const auto rb = add_metric_2d(u, bumped, g, h, metric_addition_params(l), table);
        double moved = 0.0;
        for (int j = 0; j < c.ny; ++j)
            for (int i = 0; i < c.nx; ++i)
                if (magnitude(rb.stage.v(i, j) - u(i, j)) > 0.0)
                    moved = std::max(moved, std::hypot(c.x(i) - L / 2, c.y(j) - L / 2));
        b.moved_radius.push_back(moved);
        b.ell.push_back(rb.ell);
        b.allowed_radius.push_back(R + std::pow(l, -b.kappa) + c.h());
    }
    b.slope = loglog_slope(b.lambda, b.sup_error);
    return b;
}

// ------------------------------------------------------------------ conformal

struct ConformalCheck {
    double identity_residual = 0.0;
    Complex mu_anisotropic;
    double theta_sq_ratio = 0.0;  ///< theta^2 for diag(4, 1)
    double anisotropic_residual = 0.0;
    std::vector<double> random_residual;
    double worst_mu_bound_gap = -1.0;  ///< max over nodes of |mu|^2 - (1 - 4 det H / tr^2 H)
    double seconds = 0.0;
};

inline MetricField smooth_random_spd(const GridChart& c, std::uint64_t seed, double amplitude) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    struct Mode {
        int kx, ky;
        double a, ph;
    };
    std::vector<Mode> modes[3];
    for (auto& m : modes)
        for (int k = 0; k < 6; ++k) m.push_back({int(U(rng) * 3), int(U(rng) * 3), U(rng), U(rng) * 3});
    auto eval = [&](const std::vector<Mode>& ms, double x, double y) {
        double s = 0.0, w = 0.0;
        for (const auto& m : ms) {
            s += m.a * std::cos(two_pi * (m.kx * (x - c.x0) / c.lx + m.ky * (y - c.y0) / c.ly) + m.ph);
            w += std::abs(m.a);
        }
        return s / w;
    };
    return MetricField::generate(c, [&](double x, double y) {
        const Sym2 E{eval(modes[0], x, y), eval(modes[1], x, y), eval(modes[2], x, y)};
        const double n = std::max(magnitude(E), 1.0);
        return Sym2::identity() + E * (amplitude / n);
    });
}

inline ConformalCheck conformal_check(int n = 256, int random_cases = 3) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto c = GridChart::torus(two_pi, n);
    ConformalCheck out;
    out.identity_residual = solve_conformal(MetricField(c, Sym2::identity())).residual_sup;
    const auto f = solve_conformal(MetricField(c, Sym2{4.0, 0.0, 1.0}));
    out.mu_anisotropic = f.beta;
    out.theta_sq_ratio = f.theta[0] * f.theta[0];
    out.anisotropic_residual = f.residual_sup;
    for (int s = 1; s <= random_cases; ++s) {
        const auto H = smooth_random_spd(c, static_cast<std::uint64_t>(s), 0.2);
        const auto r = solve_conformal(H);
        out.random_residual.push_back(r.residual_sup);
        for (std::size_t k = 0; k < H.size(); ++k) {
            const double tr = H[k].xx + H[k].yy, det = H[k].xx * H[k].yy - H[k].xy * H[k].xy;
            out.worst_mu_bound_gap = std::max(out.worst_mu_bound_gap, std::norm(r.mu[k]) - (1.0 - 4.0 * det / (tr * tr)));
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// ------------------------------------------------------------------ corrugation

/// CSV of Gamma and its t-derivatives on an (s, t) lattice plus the identity
/// residual (1 + d_t G1)^2 + (d_t G2)^2 - (1 + s^2).
inline void corrugation_dump(const CorrugationTable& table, std::ostream& os, int s_samples, int t_samples) {
    os << "s,t,gamma1,gamma2,dt_gamma1,dt_gamma2,identity_residual\n";
    os.precision(17);
    for (int i = 0; i < s_samples; ++i) {
        const double s = table.s_max() * i / std::max(1, s_samples - 1);
        for (int j = 0; j < t_samples; ++j) {
            const double t = two_pi * j / t_samples;
            const double g1 = table.eval(s, t, CorrugationPart::gamma1), g2 = table.eval(s, t, CorrugationPart::gamma2);
            const double d1 = table.eval(s, t, CorrugationPart::dt_gamma1), d2 = table.eval(s, t, CorrugationPart::dt_gamma2);
            os << s << ',' << t << ',' << g1 << ',' << g2 << ',' << d1 << ',' << d2 << ','
               << (1 + d1) * (1 + d1) + d2 * d2 - (1 + s * s) << '\n';
        }
    }
}

}  // namespace nkflex::bench
