/// @file schedule.hpp
/// @brief Parameter ladder of the inductive construction and its exponent algebra.
///
/// Exponents are kept as exact rationals: given (theta, alpha) the growth
/// exponent b, the next exponents theta' = theta/b^2, alpha' = alpha/(2 b^2)
/// and the next amplitude base A' = A^{b^2} (kept symbolically as base^exponent)
/// are all exact.  The numeric ladder delta_q, lambda_q, r_q is double
/// precision, with lambda_q stored through its logarithm since it outgrows
/// any floating-point range within a few levels.
#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "nkflex/error.hpp"

namespace nkflex {

using Rational = boost::multiprecision::cpp_rational;

/// Exact value of a decimal literal such as "0.15", "1e-3", "-2.5E2" or a
/// fraction "3/20".
inline Rational parse_rational(const std::string& text) {
    const auto bad = [&] { return ConfigError("not a number: '" + text + "'"); };
    if (text.empty()) throw bad();
    if (const auto slash = text.find('/'); slash != std::string::npos) {
        const Rational den = parse_rational(text.substr(slash + 1));
        if (den == 0) throw bad();
        return parse_rational(text.substr(0, slash)) / den;
    }
    std::size_t i = 0;
    bool negative = false;
    if (text[i] == '+' || text[i] == '-') negative = text[i++] == '-';
    boost::multiprecision::cpp_int digits = 0;
    long scale = 0;
    bool any = false, point = false;
    for (; i < text.size() && text[i] != 'e' && text[i] != 'E'; ++i) {
        const char ch = text[i];
        if (ch == '.' && !point) {
            point = true;
        } else if (ch >= '0' && ch <= '9') {
            digits = digits * 10 + (ch - '0');
            if (point) --scale;
            any = true;
        } else {
            throw bad();
        }
    }
    if (!any) throw bad();
    if (i < text.size()) {
        const std::string ex = text.substr(i + 1);
        std::size_t used = 0;
        long e = 0;
        try {
            e = std::stol(ex, &used);
        } catch (const std::exception&) {
            throw bad();
        }
        if (used != ex.size()) throw bad();
        scale += e;
    }
    Rational r(digits);
    const boost::multiprecision::cpp_int ten = boost::multiprecision::pow(boost::multiprecision::cpp_int(10),
                                                                          static_cast<unsigned>(std::labs(scale)));
    r = scale >= 0 ? Rational(r * ten) : Rational(r / ten);
    return negative ? -r : r;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) {
    std::ostringstream s;
    s << r;
    return s.str();
}

/// base^exponent with rational base and exponent, kept unevaluated.
struct SymbolicPower {
    Rational base = 1;
    Rational exponent = 1;

    double log_value() const { return to_double(exponent) * std::log(to_double(base)); }
    double value() const { return std::exp(log_value()); }
    /// (base^e)^p = base^(e p)
    SymbolicPower pow(const Rational& p) const { return {base, exponent * p}; }
};

/// Number of primitive directions needed for n x n symmetric matrices.
inline int primitive_count(int n) { return n * (n + 1) / 2; }

/// Upper end of the admissible Hölder band: 1/5 for surfaces, 1/(2 n_* + 1) for n >= 3.
inline Rational theta_upper_bound(int n) {
    if (n == 2) return Rational(1, 5);
    return Rational(1, 2 * primitive_count(n) + 1);
}

struct ExponentLaw {
    int n = 2;
    int n_star = 3;
    Rational theta, alpha;
    Rational b;
    Rational b_squared;
    Rational theta_next;  ///< theta / b^2
    Rational alpha_next;  ///< alpha / (2 b^2)
};

inline ExponentLaw exponent_law(const Rational& theta, const Rational& alpha, int n = 2) {
    if (n < 2) throw ConfigError("dimension must be at least 2");
    const Rational top = theta_upper_bound(n);
    if (!(theta > 0 && theta < top))
        throw ConfigError("theta = " + to_string(theta) + " outside the admissible band (0, " + to_string(top) + ") for n = " +
                          std::to_string(n));
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha = " + to_string(alpha) + " outside (0, 1)");
    ExponentLaw e;
    e.n = n;
    e.n_star = primitive_count(n);
    e.theta = theta;
    e.alpha = alpha;
    if (n == 2)
        e.b = 1 + 4 * alpha * theta / (1 - 5 * theta);
    else
        e.b = 1 + 2 * e.n_star * alpha * theta / (1 - (2 * e.n_star + 1) * theta);
    e.b_squared = e.b * e.b;
    e.theta_next = theta / e.b_squared;
    e.alpha_next = alpha / (2 * e.b_squared);
    return e;
}

struct Schedule {
    ExponentLaw law;
    SymbolicPower A;       ///< amplitude base
    SymbolicPower A_next;  ///< A^{b^2}
    double theta = 0.0, alpha = 0.0, b = 1.0;
    double kappa = 1.0;  ///< mollification exponent 1 + (2 theta / b)(b - 1 + alpha)
    int depth = 0;
    std::vector<double> delta;       ///< delta[q], q = 1..depth+2; delta[0] unused
    std::vector<double> log_lambda;  ///< ln lambda_q, same indexing

    double delta_at(int q) const { return delta.at(static_cast<std::size_t>(q)); }
    double lambda(int q) const { return std::exp(log_lambda.at(static_cast<std::size_t>(q))); }
    /// r_q = 1 / lambda_{q+1}
    double radius(int q) const { return std::exp(-log_lambda.at(static_cast<std::size_t>(q + 1))); }
    int levels() const { return static_cast<int>(delta.size()) - 1; }
};

/// ln of the smallest A >= 1 for which delta_{q+1} <= delta_q / 4 and
/// lambda_{q+1} >= 2 lambda_q hold at every level.  The first level is the
/// binding one: later ratios only improve since delta_q decreases.
inline double minimal_log_A(const ExponentLaw& law, double delta1) {
    const double th = to_double(law.theta), bm1 = to_double(law.b) - 1.0;
    const double la = (std::log(4.0) + bm1 * std::log(delta1)) / (2.0 * th * bm1);
    return std::max(0.0, la);
}

/// The ladder cannot be ordered for the given amplitude base.
class ScheduleOrderingError : public AssertionFailure {
public:
    ScheduleOrderingError(const std::string& what, int level, double minimal_log_A)
        : AssertionFailure(what), level(level), minimal_log_A(minimal_log_A) {}
    int level;
    double minimal_log_A;
};

inline std::string describe_log(double la) {
    std::ostringstream s;
    if (la < 700.0)
        s << std::exp(la);
    else
        s << "exp(" << la << ")";
    return s.str();
}

/// Ladder delta_1 = delta1, lambda_q = A delta_q^{-1/(2 theta)}, lambda_{q+1} = lambda_q^b,
/// generated for q = 1..depth+2 with the ordering checked at every level.
inline Schedule build_schedule(const SymbolicPower& A, const Rational& theta, const Rational& alpha, double delta1, int n,
                               int depth) {
    if (!(delta1 > 0.0 && delta1 < 1.0)) throw ConfigError("delta_1 must lie in (0, 1)");
    if (depth < 0) throw ConfigError("depth must be non-negative");
    Schedule s;
    s.law = exponent_law(theta, alpha, n);
    s.A = A;
    s.A_next = A.pow(s.law.b_squared);
    s.theta = to_double(theta);
    s.alpha = to_double(alpha);
    s.b = to_double(s.law.b);
    s.kappa = 1.0 + (2.0 * s.theta / s.b) * (s.b - 1.0 + s.alpha);
    s.depth = depth;
    const double logA = A.log_value();
    if (logA < 0.0) throw ConfigError("A must be at least 1");
    const int top = depth + 2;
    s.delta.assign(static_cast<std::size_t>(top) + 1, std::numeric_limits<double>::quiet_NaN());
    s.log_lambda.assign(static_cast<std::size_t>(top) + 1, std::numeric_limits<double>::quiet_NaN());
    double log_delta = std::log(delta1);
    for (int q = 1; q <= top; ++q) {
        s.delta[q] = std::exp(log_delta);
        s.log_lambda[q] = logA - log_delta / (2.0 * s.theta);
        log_delta = s.b * log_delta - 2.0 * s.theta * (s.b - 1.0) * logA;
    }
    const double tol = 1e-12;
    for (int q = 1; q < top; ++q) {
        const double dratio = std::log(s.delta[q + 1]) - std::log(s.delta[q]);
        const double lratio = s.log_lambda[q + 1] - s.log_lambda[q];
        if (dratio > -std::log(4.0) + tol || lratio < std::log(2.0) - tol)
            throw ScheduleOrderingError("schedule ordering violated at q = " + std::to_string(q) + " (delta ratio " +
                                            std::to_string(std::exp(dratio)) + "); minimal adequate A = " +
                                            describe_log(minimal_log_A(s.law, delta1)),
                                        q, minimal_log_A(s.law, delta1));
    }
    return s;
}

}  // namespace nkflex
