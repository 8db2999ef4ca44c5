/// @file frame.hpp
/// @brief Finite frames of rank-one directions and the linear coefficient maps
/// that write any symmetric matrix as sum_i L_i(G) xi_i (x) xi_i.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nkflex/error.hpp"
#include "nkflex/types.hpp"

namespace nkflex {

/// Coordinates of a symmetric n x n matrix: entries (a, b) with a <= b, row by row.
inline Eigen::VectorXd sym_coordinates(const Eigen::MatrixXd& G) {
    const int n = static_cast<int>(G.rows());
    Eigen::VectorXd v(n * (n + 1) / 2);
    int k = 0;
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) v(k++) = G(a, b);
    return v;
}

inline Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& G) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    return es.operatorSqrt();
}

inline Eigen::MatrixXd to_eigen(const Sym2& s) {
    Eigen::MatrixXd m(2, 2);
    m << s.xx, s.xy, s.xy, s.yy;
    return m;
}

struct PrimitiveFrame {
    int n = 2;
    int n_star = 3;
    std::vector<Eigen::VectorXd> directions;  ///< unit vectors xi_i
    Eigen::MatrixXd coefficient_map;          ///< L(G) = coefficient_map * sym_coordinates(G)
    Eigen::MatrixXd base_point;               ///< G0
    double validity_radius = 0.0;             ///< r: |G - G0|_op <= r implies L_i(G) >= r
    double solve_residual = 0.0;

    Eigen::VectorXd coefficients(const Eigen::MatrixXd& G) const { return coefficient_map * sym_coordinates(G); }

    Eigen::MatrixXd reconstruct(const Eigen::VectorXd& c) const {
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n_star; ++i) G += c(i) * directions[i] * directions[i].transpose();
        return G;
    }

    /// r0 = r / 4, the radius used when the frame is reused around nearby base points.
    double inner_radius() const { return validity_radius / 4.0; }

    // 2-D conveniences
    std::array<double, 3> coefficients(const Sym2& G) const {
        const auto c = coefficients(to_eigen(G));
        return {c(0), c(1), c(2)};
    }
    Vec2 direction2(int i) const { return {directions[i](0), directions[i](1)}; }
};

namespace detail {

// Directions whose sum of squares is a positive combination of the identity.
inline std::vector<Eigen::VectorXd> reference_directions(int n) {
    std::vector<Eigen::VectorXd> dirs;
    if (n == 2) {
        const double s = std::sqrt(3.0) / 2.0;
        for (auto [x, y] : {std::pair{1.0, 0.0}, std::pair{0.5, s}, std::pair{0.5, -s}}) {
            Eigen::VectorXd v(2);
            v << x, y;
            dirs.push_back(v);
        }
        return dirs;
    }
    // e_i - (1/n) sum_{j != i} e_j and e_i + e_j: Id is a positive combination.
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(n, -1.0 / n);
        v(i) = 1.0;
        dirs.push_back(v.normalized());
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
            v(i) = v(j) = 1.0;
            dirs.push_back(v.normalized());
        }
    return dirs;
}

// Dual norm of L_i with respect to the operator norm: the nuclear norm of the
// matrix representing L_i through the trace pairing.
inline double functional_nuclear_norm(const Eigen::RowVectorXd& row, int n) {
    Eigen::MatrixXd lam(n, n);
    int k = 0;
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b, ++k) {
            if (a == b)
                lam(a, a) = row(k);
            else
                lam(a, b) = lam(b, a) = 0.5 * row(k);
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lam);
    return es.eigenvalues().cwiseAbs().sum();
}

inline Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::MatrixXd A(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) A(a, b) = A(b, a) = N(rng);
    return A;
}

inline double operator_norm(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Frame adapted to the base point G0: directions G0^{1/2} xi normalized, so
/// that G0 itself has strictly positive coefficients.
inline PrimitiveFrame build_frame(int n, const Eigen::MatrixXd& G0, double gamma, int shell_samples = 2000) {
    if (n < 2 || G0.rows() != n || G0.cols() != n) throw PreconditionError("frame base point has wrong dimension");
    if ((G0 - G0.transpose()).norm() > 0.0) throw PreconditionError("frame base point is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G0);
    if (es.eigenvalues().minCoeff() < 1.0 / gamma || es.eigenvalues().maxCoeff() > gamma)
        throw PreconditionError("frame base point outside the ellipticity band [1/gamma, gamma]");

    PrimitiveFrame f;
    f.n = n;
    f.n_star = n * (n + 1) / 2;
    f.base_point = G0;
    const Eigen::MatrixXd root = spd_sqrt(G0);
    for (const auto& xi : detail::reference_directions(n)) f.directions.push_back((root * xi).normalized());

    // Column i holds the coordinates of xi_i (x) xi_i.
    Eigen::MatrixXd A(f.n_star, f.n_star);
    for (int i = 0; i < f.n_star; ++i) A.col(i) = sym_coordinates(f.directions[i] * f.directions[i].transpose());
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12)
        throw PreconditionError("degenerate frame: coefficient system is singular");
    f.coefficient_map = lu.inverse();
    f.solve_residual = (A * f.coefficient_map - Eigen::MatrixXd::Identity(f.n_star, f.n_star)).cwiseAbs().maxCoeff();

    const Eigen::VectorXd c0 = f.coefficients(G0);
    double r = std::numeric_limits<double>::infinity();
    for (int i = 0; i < f.n_star; ++i)
        r = std::min(r, c0(i) / (1.0 + detail::functional_nuclear_norm(f.coefficient_map.row(i), n)));
    if (!(r > 0.0)) throw PreconditionError("frame has a non-positive coefficient at its base point");

    // Sampled audit of the shell |G - G0| = r; shrink if the bound ever fails.
    std::mt19937_64 rng(0x5eed);
    for (int attempt = 0; attempt < 50; ++attempt) {
        bool ok = true;
        for (int s = 0; s < shell_samples && ok; ++s) {
            Eigen::MatrixXd E = detail::random_symmetric(rng, n);
            E *= r / detail::operator_norm(E);
            ok = f.coefficients(G0 + E).minCoeff() >= r - 1e-12;
        }
        if (ok) break;
        r *= 0.9;
    }
    f.validity_radius = r;
    return f;
}

inline PrimitiveFrame build_frame(const Sym2& G0, double gamma) { return build_frame(2, to_eigen(G0), gamma); }

}  // namespace nkflex
