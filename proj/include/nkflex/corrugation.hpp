/// @file corrugation.hpp
/// @brief Tabulated Kuiper corrugation pair Gamma = (Gamma1, Gamma2).
///
/// For amplitude s the loop t -> sqrt(1+s^2) * exp(i alpha cos t) has unit
/// mean in the tangential direction exactly when J0(alpha) = (1+s^2)^{-1/2},
/// so integrating it minus the identity gives 2pi-periodic functions with
///   (1 + d_t Gamma1)^2 + (d_t Gamma2)^2 = 1 + s^2.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "nkflex/bessel.hpp"
#include "nkflex/error.hpp"

namespace nkflex {

enum class CorrugationPart { gamma1, gamma2, dt_gamma1, dt_gamma2, ds_gamma1, ds_gamma2, dtt_gamma1, dtt_gamma2 };

namespace detail {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct Hermite {
    double h00, h10, h01, h11;    // values
    double d00, d10, d01, d11;    // derivatives w.r.t. the local coordinate
};

inline Hermite hermite(double x) {
    const double x2 = x * x, x3 = x2 * x;
    return {2 * x3 - 3 * x2 + 1, x3 - 2 * x2 + x, -2 * x3 + 3 * x2, x3 - x2,
            6 * x2 - 6 * x,      3 * x2 - 4 * x + 1, -6 * x2 + 6 * x, 3 * x2 - 2 * x};
}

}  // namespace detail

/// Amplitude profile alpha(s) and its derivative, from the J0 normalization.
struct Amplitude {
    double alpha;
    double dalpha;
};

inline Amplitude corrugation_amplitude(double s) {
    if (s == 0.0) return {0.0, std::numbers::sqrt2};
    const double a = inverse_j0(1.0 / std::sqrt(1.0 + s * s));
    // J0'(a) a' = -s (1+s^2)^{-3/2}, J0' = -J1
    return {a, s * std::pow(1.0 + s * s, -1.5) / bessel_j1(a)};
}

class CorrugationTable {
public:
    CorrugationTable(double s_max, int s_samples, int t_samples) : s_max_(s_max), ns_(s_samples), nt_(t_samples) {
        if (!(s_max > 0.0 && s_max <= 1.0)) throw PreconditionError("corrugation s_max must lie in (0, 1]");
        if (s_samples < 64 || t_samples < 64) throw PreconditionError("corrugation table needs >= 64 samples per axis");
        hs_ = s_max_ / (ns_ - 1);
        ht_ = detail::two_pi / nt_;
        alpha_.resize(ns_);
        dalpha_.resize(ns_);
        for (auto* v : {&g1_, &g2_, &g1t_, &g2t_, &g1s_, &g2s_, &g1st_, &g2st_}) v->assign(std::size_t(ns_) * nt_, 0.0);
        for (int i = 0; i < ns_; ++i) build_row(i);
    }

    double s_max() const { return s_max_; }
    int s_samples() const { return ns_; }
    int t_samples() const { return nt_; }
    double s_node(int i) const { return i * hs_; }
    double t_node(int j) const { return j * ht_; }
    double alpha_node(int i) const { return alpha_[i]; }

    /// Stored node values (no interpolation).
    double node(int i, int j, CorrugationPart p) const {
        const std::size_t k = std::size_t(i) * nt_ + j;
        switch (p) {
            case CorrugationPart::gamma1: return g1_[k];
            case CorrugationPart::gamma2: return g2_[k];
            case CorrugationPart::dt_gamma1: return g1t_[k];
            case CorrugationPart::dt_gamma2: return g2t_[k];
            case CorrugationPart::ds_gamma1: return g1s_[k];
            case CorrugationPart::ds_gamma2: return g2s_[k];
            default: return closed_form(s_node(i), alpha_[i], t_node(j), p);
        }
    }

    /// Largest |Gamma_i(s, 2pi) - Gamma_i(s, 0)| produced by the quadrature.
    double periodicity_defect() const { return periodicity_defect_; }

    /// Largest node residual of (1 + d_t G1)^2 + (d_t G2)^2 - (1 + s^2).
    double identity_residual() const {
        double r = 0.0;
        for (int i = 0; i < ns_; ++i)
            for (int j = 0; j < nt_; ++j) {
                const std::size_t k = std::size_t(i) * nt_ + j;
                const double s = s_node(i);
                r = std::max(r, std::abs((1 + g1t_[k]) * (1 + g1t_[k]) + g2t_[k] * g2t_[k] - (1 + s * s)));
            }
        return r;
    }

    /// Empirical constants: max |d_t G1| / s^2 and max |d_t G2| / s over the table.
    std::array<double, 2> empirical_constants() const {
        std::array<double, 2> c{0.0, 0.0};
        for (int i = 1; i < ns_; ++i) {
            const double s = s_node(i);
            for (int j = 0; j < nt_; ++j) {
                const std::size_t k = std::size_t(i) * nt_ + j;
                c[0] = std::max(c[0], std::abs(g1t_[k]) / (s * s));
                c[1] = std::max(c[1], std::abs(g2t_[k]) / s);
            }
        }
        return c;
    }

    Amplitude amplitude(double s) const {
        check_s(s);
        int i;
        double x;
        locate_s(s, i, x);
        const auto H = detail::hermite(x);
        return {H.h00 * alpha_[i] + H.h10 * hs_ * dalpha_[i] + H.h01 * alpha_[i + 1] + H.h11 * hs_ * dalpha_[i + 1],
                (H.d00 * alpha_[i] + H.d10 * hs_ * dalpha_[i] + H.d01 * alpha_[i + 1] + H.d11 * hs_ * dalpha_[i + 1]) /
                    hs_};
    }

    /// Gamma1 and Gamma2 at (s, t); t is taken modulo 2pi.
    std::array<double, 2> gamma(double s, double t) const {
        check_s(s);
        if (s == 0.0) return {0.0, 0.0};
        const auto v = bicubic(s, t, false);
        return {v[0], v[1]};
    }

    double eval(double s, double t, CorrugationPart p) const {
        check_s(s);
        switch (p) {
            case CorrugationPart::gamma1: return gamma(s, t)[0];
            case CorrugationPart::gamma2: return gamma(s, t)[1];
            case CorrugationPart::ds_gamma1: return s == 0.0 ? 0.0 : bicubic(s, t, true)[0];
            case CorrugationPart::ds_gamma2:
                if (s == 0.0) return 0.0;
                return bicubic(s, t, true)[1];
            default: return s == 0.0 ? 0.0 : closed_form(s, amplitude(s).alpha, t, p);
        }
    }

private:
    void check_s(double s) const {
        if (!(s >= 0.0) || s > s_max_)
            throw PreconditionError("corrugation amplitude " + std::to_string(s) + " outside [0, " +
                                    std::to_string(s_max_) + "]");
    }

    void locate_s(double s, int& i, double& x) const {
        i = std::min(static_cast<int>(s / hs_), ns_ - 2);
        x = s / hs_ - i;
    }

    // d_t Gamma and d_t^2 Gamma in closed form given the amplitude.
    static double closed_form(double s, double alpha, double t, CorrugationPart p) {
        const double r = std::sqrt(1.0 + s * s);
        const double phase = alpha * std::cos(t);
        switch (p) {
            case CorrugationPart::dt_gamma1: return r * std::cos(phase) - 1.0;
            case CorrugationPart::dt_gamma2: return r * std::sin(phase);
            case CorrugationPart::dtt_gamma1: return r * alpha * std::sin(t) * std::sin(phase);
            case CorrugationPart::dtt_gamma2: return -r * alpha * std::sin(t) * std::cos(phase);
            default: throw PreconditionError("not a closed-form corrugation part");
        }
    }

    void build_row(int i) {
        const double s = s_node(i);
        const auto amp = corrugation_amplitude(s);
        alpha_[i] = amp.alpha;
        dalpha_[i] = amp.dalpha;
        const double r = std::sqrt(1.0 + s * s);
        const double dr = s / r;
        // integrands in t, and their s-derivatives
        auto f = [&](double t, std::array<double, 4>& out) {
            const double c = std::cos(t), ph = amp.alpha * c;
            const double cp = std::cos(ph), sp = std::sin(ph);
            out[0] = r * cp - 1.0;
            out[1] = r * sp;
            out[2] = dr * cp - r * sp * c * amp.dalpha;
            out[3] = dr * sp + r * cp * c * amp.dalpha;
        };
        std::array<double, 4> acc{0, 0, 0, 0}, a, m, b;
        const std::size_t base = std::size_t(i) * nt_;
        f(0.0, a);
        for (int j = 0; j < nt_; ++j) {
            const std::size_t k = base + j;
            g1_[k] = acc[0];
            g2_[k] = acc[1];
            g1s_[k] = acc[2];
            g2s_[k] = acc[3];
            g1t_[k] = a[0];
            g2t_[k] = a[1];
            g1st_[k] = a[2];
            g2st_[k] = a[3];
            // Simpson on [t_j, t_{j+1}] with the exact midpoint
            f((j + 0.5) * ht_, m);
            f((j + 1) * ht_, b);
            for (int c = 0; c < 4; ++c) acc[c] += ht_ / 6.0 * (a[c] + 4.0 * m[c] + b[c]);
            a = b;
        }
        periodicity_defect_ = std::max({periodicity_defect_, std::abs(acc[0]), std::abs(acc[1])});
    }

    // Bicubic Hermite in (s, t); returns (G1, G2) or (d_s G1, d_s G2).
    std::array<double, 2> bicubic(double s, double t, bool ds) const {
        int i;
        double x;
        locate_s(s, i, x);
        double tt = std::fmod(t, detail::two_pi);
        if (tt < 0.0) tt += detail::two_pi;
        int j = static_cast<int>(tt / ht_);
        if (j >= nt_) j = nt_ - 1;
        const double y = tt / ht_ - j;
        const int j1 = (j + 1) % nt_;
        const auto Hs = detail::hermite(x);
        const auto Ht = detail::hermite(y);
        const double ws[4] = {ds ? Hs.d00 / hs_ : Hs.h00, ds ? Hs.d10 : Hs.h10 * hs_, ds ? Hs.d01 / hs_ : Hs.h01,
                              ds ? Hs.d11 : Hs.h11 * hs_};
        const double wt[4] = {Ht.h00, Ht.h10 * ht_, Ht.h01, Ht.h11 * ht_};
        std::array<double, 2> out{0.0, 0.0};
        const std::vector<double>* val[2] = {&g1_, &g2_};
        const std::vector<double>* vt[2] = {&g1t_, &g2t_};
        const std::vector<double>* vs[2] = {&g1s_, &g2s_};
        const std::vector<double>* vst[2] = {&g1st_, &g2st_};
        for (int c = 0; c < 2; ++c) {
            double acc = 0.0;
            for (int a = 0; a < 2; ++a) {
                const std::size_t row = std::size_t(i + a) * nt_;
                for (int b = 0; b < 2; ++b) {
                    const std::size_t k = row + (b == 0 ? j : j1);
                    const double wsv = ws[2 * a], wsd = ws[2 * a + 1];
                    const double wtv = wt[2 * b], wtd = wt[2 * b + 1];
                    acc += wsv * (wtv * (*val[c])[k] + wtd * (*vt[c])[k]) + wsd * (wtv * (*vs[c])[k] + wtd * (*vst[c])[k]);
                }
            }
            out[c] = acc;
        }
        return out;
    }

    double s_max_;
    int ns_, nt_;
    double hs_ = 0.0, ht_ = 0.0;
    double periodicity_defect_ = 0.0;
    std::vector<double> alpha_, dalpha_;
    std::vector<double> g1_, g2_, g1t_, g2t_, g1s_, g2s_, g1st_, g2st_;
};

}  // namespace nkflex
