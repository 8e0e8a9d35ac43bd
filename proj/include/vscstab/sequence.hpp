#pragma once

// Coupled sequence networks of the grid-tied converter in the PLL frame,
// the augmented sequence impedance (ASI) loop impedances, the minor-loop
// eigenvalues used by the generalized Nyquist criterion, and the
// generalized ASIN built from arbitrary 2x2 source/load sequence matrices.
//
// Every transfer function is kept as a CRational. The PLL-related pieces
// share the polynomials
//     Np = kp_pll s + ki_pll
//     Cd = k_m cos(d0) U Np + (k_m + 1) U s^2     (den of G_pll and C_pll)
//     Cn = j (L_sum I0 s - U0) Np                  (num of C_pll)
//     P  = Cd + (j/2) Cn                           (1 + j C_pll / 2 = P / Cd)
// and the current loop contributes K = kp_cc s + ki_cc, H_i = K L_f / s.
// With Zs the polynomial of Z_sum and Q = K L_f P + s Zs Cd (so that
// H_i + Z_grid^p = Q / (s P)), the closed forms used below are
//     r        = Cn Cn* K^2 L_f^2 / (4 Q Q*)
//     gamma    = P P* / (P P* - Cn Cn* / 4)
//     z_loop_p = (Q Q* - Cn Cn* K^2 L_f^2 / 4) / (s P Q*).
// Building them this way avoids the spurious common factors that generic
// rational arithmetic would introduce.

#include "vscstab/error.hpp"
#include "vscstab/model.hpp"
#include "vscstab/tf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>
#include <utility>

namespace vscstab {

/// [u_p; u_n] = 1/2 [1 j; 1 -j] [u_d; u_q].
[[nodiscard]] inline std::pair<cplx, cplx> dq_to_sequence(cplx u_d, cplx u_q) noexcept {
    return {0.5 * (u_d + kJ * u_q), 0.5 * (u_d - kJ * u_q)};
}

[[nodiscard]] inline std::pair<cplx, cplx> sequence_to_dq(cplx u_p, cplx u_n) noexcept {
    return {u_p + u_n, -kJ * (u_p - u_n)};
}

/// Polynomial building blocks shared by the model's rational functions.
struct SequencePolys {
    CPoly k_cc;       ///< kp_cc s + ki_cc
    CPoly zs;         ///< numerator of Z_sum
    CPoly cd;         ///< denominator of G_pll / C_pll
    CPoly cn;         ///< numerator of C_pll
    CPoly p;          ///< Cd + (j/2) Cn
    CPoly q;          ///< K L_f P + s Zs Cd
    CPoly gamma_den;  ///< P P* - Cn Cn* / 4
    CPoly loop_num;   ///< Q Q* - Cn Cn* K^2 L_f^2 / 4
    double l_f{};     ///< L_filter in pu * s
};

struct SequenceModel {
    SystemParams params;
    OperatingPoint op;

    CRational h_i;       ///< (kp_cc + ki_cc/s) L_filter
    CRational h_pll;     ///< (kp_pll + ki_pll/s) / U_s
    CRational g_pll;     ///< delta_pll / u_cq
    CRational c_pll;     ///< j (s L_sum I0 - U0) G_pll
    CRational z_sigma;
    CRational z_grid_p;  ///< Z_sum / (1 + j C_pll / 2)
    CRational z_grid_n;
    CRational d_pll;     ///< (j C_pll / 2) / (1 + j C_pll / 2)
    CRational z_c_p;     ///< H_i
    CRational z_c_n;     ///< conj_coeff(H_i)
    CRational r;         ///< coupling ratio |D|^2 |Z_c|^2 / |Z_grid + Z_c|^2
    CRational gamma;     ///< 1 / (1 - D D*)
    CRational z_loop_p;  ///< (1 - r)(Z_c^p + Z_grid^p)
    CRational z_loop_n;

    SequencePolys polys;
};

[[nodiscard]] inline SequenceModel build_model(const SystemParams& params, const OperatingPoint& op) {
    params.validate();
    const double lock = std::abs(op.u_g0_pll.imag());
    if (!(lock < 1e-8)) throw ModelError("operating point does not satisfy the PLL lock condition");

    const auto& c = params.control;
    const double ws = params.omega_s();
    const double lf = params.l_filter_dyn();
    const double ls = params.l_total_dyn();
    const double u = c.u_s_mag;
    const double km = params.circuit.k_m();
    const cplx i0 = op.i_c0;
    const cplx u0 = op.u_s0_pll;

    SequenceModel m;
    m.params = params;
    m.op = op;

    auto& pp = m.polys;
    pp.l_f = lf;
    pp.k_cc = CPoly{c.ki_cc, c.kp_cc};
    pp.zs = CPoly{cplx{params.circuit.r_total(), ls * ws}, ls};

    const CPoly s = CPoly::s_pow(1);
    const CPoly np{c.ki_pll, c.kp_pll};
    pp.cd = (km * std::cos(op.delta_pll0) * u) * np + ((km + 1.0) * u) * CPoly::s_pow(2);
    pp.cn = kJ * (CPoly{-u0, ls * i0} * np);
    pp.p = pp.cd + (0.5 * kJ) * pp.cn;
    if (pp.p.is_zero()) throw ModelError("degenerate PLL network: 1 + j C_pll / 2 vanishes identically");
    pp.q = lf * (pp.k_cc * pp.p) + s * pp.zs * pp.cd;

    const CPoly cn_cn = pp.cn * pp.cn.conj_coeff();
    const CPoly kk = pp.k_cc * pp.k_cc * (lf * lf);
    pp.gamma_den = pp.p * pp.p.conj_coeff() - 0.25 * cn_cn;
    pp.loop_num = pp.q * pp.q.conj_coeff() - 0.25 * (cn_cn * kk);
    if (pp.gamma_den.is_zero()) throw ModelError("degenerate coupling: 1 - D_pll D_pll* vanishes identically");
    if (pp.q.is_zero()) throw ModelError("degenerate loop: H_i + Z_grid vanishes identically");

    m.h_i = CRational(lf * pp.k_cc, s);
    m.h_pll = CRational((1.0 / u) * np, s);
    m.g_pll = CRational(np, pp.cd);
    m.c_pll = CRational(pp.cn, pp.cd);
    m.z_sigma = params.z_sigma();
    m.z_grid_p = CRational(pp.zs * pp.cd, pp.p);
    m.z_grid_n = m.z_grid_p.conj_coeff();
    m.d_pll = CRational((0.5 * kJ) * pp.cn, pp.p);
    m.z_c_p = m.h_i;
    m.z_c_n = m.h_i.conj_coeff();
    m.r = CRational(0.25 * (cn_cn * kk), pp.q * pp.q.conj_coeff());
    m.gamma = CRational(pp.p * pp.p.conj_coeff(), pp.gamma_den);
    if (pp.cn.is_zero()) {
        // Frozen PLL: no coupling, the loop is H_i + Z_sum.
        m.z_loop_p = CRational(pp.q, s * pp.p);
    } else {
        m.z_loop_p = CRational(pp.loop_num, s * pp.p * pp.q.conj_coeff());
    }
    m.z_loop_n = m.z_loop_p.conj_coeff();
    return m;
}

[[nodiscard]] inline SequenceModel build_model(const SystemParams& params) {
    return build_model(params, solve_operating_point(params));
}

/// 2x2 complex matrix at one point of the s-plane.
struct FreqMatrix2 {
    std::array<cplx, 4> m{};  ///< row-major: m00, m01, m10, m11
    cplx s{};

    [[nodiscard]] cplx operator()(int i, int j) const noexcept { return m[static_cast<std::size_t>(2 * i + j)]; }
    [[nodiscard]] cplx& operator()(int i, int j) noexcept { return m[static_cast<std::size_t>(2 * i + j)]; }
    [[nodiscard]] cplx trace() const noexcept { return m[0] + m[3]; }
    [[nodiscard]] cplx det() const noexcept { return m[0] * m[3] - m[1] * m[2]; }
    [[nodiscard]] bool finite() const noexcept {
        for (const auto& x : m)
            if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
        return true;
    }
};

/// Coupled source impedance seen from the converter terminal:
/// gamma [Z_grid^p, Z_grid^n D; Z_grid^p D*, Z_grid^n].
[[nodiscard]] inline FreqMatrix2 source_matrix(const SequenceModel& model, cplx s) {
    const cplx g = model.gamma(s);
    const cplx zp = model.z_grid_p(s);
    const cplx zn = model.z_grid_n(s);
    const cplx d = model.d_pll(s);
    const cplx dc = model.d_pll.conj_coeff()(s);
    FreqMatrix2 out;
    out.s = s;
    out(0, 0) = g * zp;
    out(0, 1) = g * zn * d;
    out(1, 0) = g * zp * dc;
    out(1, 1) = g * zn;
    if (!out.finite()) throw EvaluationError("source matrix not finite (1 - D D* vanishes)");
    return out;
}

/// Converter sequence impedance diag(H_i, H_i*).
[[nodiscard]] inline FreqMatrix2 converter_matrix(const SequenceModel& model, cplx s) {
    FreqMatrix2 out;
    out.s = s;
    out(0, 0) = model.z_c_p(s);
    out(1, 1) = model.z_c_n(s);
    return out;
}

/// Minor-loop gain Z_source * Z_conv^-1.
[[nodiscard]] inline FreqMatrix2 minor_loop_matrix(const SequenceModel& model, cplx s) {
    const FreqMatrix2 src = source_matrix(model, s);
    const FreqMatrix2 conv = converter_matrix(model, s);
    if (conv(0, 0) == cplx{} || conv(1, 1) == cplx{}) {
        throw EvaluationError("singular converter matrix: H_i vanishes");
    }
    FreqMatrix2 out;
    out.s = s;
    out(0, 0) = src(0, 0) / conv(0, 0);
    out(0, 1) = src(0, 1) / conv(1, 1);
    out(1, 0) = src(1, 0) / conv(0, 0);
    out(1, 1) = src(1, 1) / conv(1, 1);
    return out;
}

/// Roots of lambda^2 - tr lambda + det, cancellation-free ordering.
[[nodiscard]] inline std::pair<cplx, cplx> eig2(const FreqMatrix2& a) noexcept {
    const cplx tr = a.trace();
    const cplx det = a.det();
    const cplx disc = std::sqrt(tr * tr - 4.0 * det);
    const cplx big = std::real(std::conj(tr) * disc) >= 0.0 ? 0.5 * (tr + disc) : 0.5 * (tr - disc);
    if (big == cplx{}) return {cplx{}, cplx{}};
    return {big, det / big};
}

struct GncEigenvalues {
    cplx lambda1;
    cplx lambda2;
    /// Closed-form expression with a = Z_grid^p / H_i and |a|^2 = a a*:
    /// 1/2 (gamma a + gamma a* +- sqrt(gamma^2 (a + a*)^2 - 4 |a|^2)).
    cplx closed_form_lambda1;
    cplx closed_form_lambda2;
    bool analytic_agrees = false;
};

[[nodiscard]] inline GncEigenvalues gnc_eigenvalues(const SequenceModel& model, cplx s) {
    const FreqMatrix2 ml = minor_loop_matrix(model, s);
    GncEigenvalues out;
    std::tie(out.lambda1, out.lambda2) = eig2(ml);

    const cplx g = model.gamma(s);
    const cplx a = model.z_grid_p(s) / model.z_c_p(s);
    const cplx ac = model.z_grid_n(s) / model.z_c_n(s);
    const cplx root = std::sqrt(g * g * (a + ac) * (a + ac) - 4.0 * a * ac);
    out.closed_form_lambda1 = 0.5 * (g * a + g * ac + root);
    out.closed_form_lambda2 = 0.5 * (g * a + g * ac - root);

    auto close = [](cplx x, cplx y) {
        const double scale = std::max({std::abs(x), std::abs(y), 1e-300});
        return std::abs(x - y) <= 1e-6 * scale;
    };
    out.analytic_agrees = (close(out.lambda1, out.closed_form_lambda1) && close(out.lambda2, out.closed_form_lambda2)) ||
                          (close(out.lambda1, out.closed_form_lambda2) && close(out.lambda2, out.closed_form_lambda1));
    return out;
}

/// 2x2 matrix of rational functions, entries pp, pn, np, nn.
struct RationalMatrix2 {
    CRational pp, pn, np, nn;
};

struct GasinInput {
    RationalMatrix2 z_source;
    RationalMatrix2 z_load;
};

/// Source/load split of the model: the coupled grid impedance and the
/// converter diag(H_i, H_i*). The source entries share the denominator
/// P P* - Cn Cn*/4 (closed forms of gamma Z_grid^p, gamma Z_grid^n D, ...).
[[nodiscard]] inline GasinInput gasin_input(const SequenceModel& model) {
    const auto& pp = model.polys;
    const CPoly zc = pp.zs.conj_coeff();
    const CPoly cdc = pp.cd.conj_coeff();
    GasinInput in;
    in.z_source.pp = CRational(pp.p.conj_coeff() * pp.zs * pp.cd, pp.gamma_den);
    in.z_source.pn = CRational((0.5 * kJ) * (zc * cdc * pp.cn), pp.gamma_den);
    in.z_source.np = CRational((-0.5 * kJ) * (pp.zs * pp.cd * pp.cn.conj_coeff()), pp.gamma_den);
    in.z_source.nn = CRational(pp.p * zc * cdc, pp.gamma_den);
    in.z_load.pp = model.z_c_p;
    in.z_load.nn = model.z_c_n;
    return in;
}

/// Generalized ASIN loop impedances (Schur complements of the total
/// sequence impedance Z_L + Z_S):
///   z_g_p = Z^pp - Z^pn Z^np / Z^nn,   z_g_n = Z^nn - Z^pn Z^np / Z^pp.
[[nodiscard]] inline std::pair<CRational, CRational> gasin_loop(const GasinInput& in) {
    const CRational tpp = in.z_load.pp + in.z_source.pp;
    const CRational tpn = in.z_load.pn + in.z_source.pn;
    const CRational tnp = in.z_load.np + in.z_source.np;
    const CRational tnn = in.z_load.nn + in.z_source.nn;
    if (tnn.is_zero() || tpp.is_zero()) {
        throw DegenerateSystemError("GASIN denominator Z_L + Z_S vanishes identically");
    }
    const CRational cross = tpn * tnp;
    return {tpp - cross / tnn, tnn - cross / tpp};
}

}  // namespace vscstab
