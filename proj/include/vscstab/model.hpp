#pragma once

// System parameters of the grid-tied converter, per-unit conventions,
// controller gain design and the steady-state operating point.
//
// Per-unit convention: an inductance l (pu) is the reactance at the base
// frequency, so in the time/Laplace domain it acts as l / omega_s (pu * s).
// Resistances and voltages are plain pu; s is in rad/s.

#include "vscstab/error.hpp"
#include "vscstab/numeric.hpp"
#include "vscstab/tf.hpp"

#include <cmath>
#include <complex>
#include <sstream>
#include <string>

namespace vscstab {

struct BaseQuantities {
    double s_base = 2.0e6;  ///< VA
    double v_base = 690.0;  ///< line-line rms, V
    double f_base = 50.0;   ///< Hz

    [[nodiscard]] double z_base() const noexcept { return v_base * v_base / s_base; }
    [[nodiscard]] double omega_s() const noexcept { return numeric::kTwoPi * f_base; }

    [[nodiscard]] double impedance_to_si(double pu) const noexcept { return pu * z_base(); }
    [[nodiscard]] double impedance_from_si(double ohm) const noexcept { return ohm / z_base(); }
    /// pu reactance at f_base -> henry.
    [[nodiscard]] double inductance_to_si(double l_pu) const noexcept { return l_pu * z_base() / omega_s(); }
    [[nodiscard]] double inductance_from_si(double henry) const noexcept { return henry * omega_s() / z_base(); }

    void validate() const {
        if (!(s_base > 0.0) || !(v_base > 0.0) || !(f_base > 0.0)) {
            throw ParameterError("base quantities must be strictly positive");
        }
    }
};

struct CircuitParams {
    double r_filter = 0.0;
    double l_filter = 0.1;
    double r_t = 0.0;
    double l_t = 0.1;
    double r_s = 0.0;
    double l_s = 1.0 / 3.0;

    [[nodiscard]] double r_total() const noexcept { return r_filter + r_t + r_s; }
    [[nodiscard]] double l_total() const noexcept { return l_filter + l_t + l_s; }
    /// Inductance between the PLL sampling node and the grid source.
    [[nodiscard]] double l_grid_side() const noexcept { return l_t + l_s; }

    /// L_filter / (L_s + L_T): ratio of the inductive divider that places the
    /// PLL sampling node at the converter-side transformer terminal.
    [[nodiscard]] double k_m() const {
        if (!(l_grid_side() > 0.0)) throw ParameterError("k_m undefined: l_s + l_t must be > 0");
        return l_filter / l_grid_side();
    }

    void validate() const {
        for (double l : {l_filter, l_t, l_s}) {
            if (!(l >= 0.0) || !std::isfinite(l)) throw ParameterError("inductances must be finite and >= 0");
        }
        for (double r : {r_filter, r_t, r_s}) {
            if (!std::isfinite(r)) throw ParameterError("resistances must be finite");
        }
        if (!(l_total() > 0.0)) throw ParameterError("total inductance must be > 0");
    }
};

struct ControllerParams {
    double kp_cc = 0.0;   ///< current PI, proportional (1/s units before the L_filter scaling)
    double ki_cc = 0.0;   ///< current PI, integral
    double kp_pll = 0.0;  ///< rad/s per pu volt
    double ki_pll = 0.0;  ///< rad/s^2 per pu volt
    double u_s_mag = 1.0; ///< grid voltage magnitude used to normalise the PLL

    void validate() const {
        if (!(kp_cc > 0.0)) throw ParameterError("kp_cc must be > 0");
        if (!(ki_cc >= 0.0)) throw ParameterError("ki_cc must be >= 0");
        if (!(kp_pll >= 0.0) || !(ki_pll >= 0.0)) throw ParameterError("PLL gains must be >= 0");
        if (!(u_s_mag > 0.0)) throw ParameterError("u_s_mag must be > 0");
    }

    [[nodiscard]] bool pll_frozen() const noexcept { return kp_pll == 0.0 && ki_pll == 0.0; }
};

/// Bandwidth targets from which gains are designed.
struct GainTargets {
    double cc_bw = 200.0;        ///< Hz
    double pll_bw = 13.0;        ///< Hz; 0 freezes the PLL
    double pll_damping = 0.5;
    double cc_zero_ratio = 0.25; ///< PI zero as a fraction of the current-loop bandwidth
};

/// Gains from bandwidth targets.
///
/// Current loop: kp_cc = 2*pi*cc_bw so that with H_i = (kp + ki/s) L_filter
/// the loop crosses over near cc_bw; the PI zero sits at
/// cc_zero_ratio * 2*pi*cc_bw, i.e. ki_cc = kp_cc * cc_zero_ratio * 2*pi*cc_bw.
///
/// PLL: standard second-order design with w_n = 2*pi*pll_bw,
/// kp_pll = 2*zeta*w_n and ki_pll = w_n^2.
[[nodiscard]] inline ControllerParams design_gains(double cc_bw, double pll_bw, double pll_damping,
                                                   double u_s_mag = 1.0, double cc_zero_ratio = 0.25) {
    if (!(cc_bw > 0.0) || !std::isfinite(cc_bw)) throw ParameterError("current-loop bandwidth must be > 0");
    if (!(pll_bw >= 0.0) || !std::isfinite(pll_bw)) throw ParameterError("PLL bandwidth must be >= 0");
    if (!(pll_damping > 0.0)) throw ParameterError("PLL damping must be > 0");
    if (!(cc_zero_ratio >= 0.0)) throw ParameterError("cc_zero_ratio must be >= 0");
    if (!(u_s_mag > 0.0)) throw ParameterError("u_s_mag must be > 0");

    ControllerParams c;
    const double wc = numeric::kTwoPi * cc_bw;
    c.kp_cc = wc;
    c.ki_cc = wc * cc_zero_ratio * wc;
    const double wn = numeric::kTwoPi * pll_bw;
    c.kp_pll = 2.0 * pll_damping * wn;
    c.ki_pll = wn * wn;
    c.u_s_mag = u_s_mag;
    return c;
}

[[nodiscard]] inline ControllerParams design_gains(const GainTargets& t, double u_s_mag = 1.0) {
    return design_gains(t.cc_bw, t.pll_bw, t.pll_damping, u_s_mag, t.cc_zero_ratio);
}

/// Everything needed to build the small-signal model.
struct SystemParams {
    BaseQuantities base;
    CircuitParams circuit;
    ControllerParams control;
    cplx i_ref{0.5, 0.0};

    [[nodiscard]] double omega_s() const noexcept { return base.omega_s(); }
    /// L_sum in pu * s.
    [[nodiscard]] double l_total_dyn() const noexcept { return circuit.l_total() / omega_s(); }
    [[nodiscard]] double l_filter_dyn() const noexcept { return circuit.l_filter / omega_s(); }

    /// Z_sum(s) = L_sum (s + j w_s) + R_sum, the impedance seen from the
    /// converter terminal in the PLL frame.
    [[nodiscard]] CRational z_sigma() const {
        const double l = l_total_dyn();
        return CRational(CPoly{cplx{circuit.r_total(), l * omega_s()}, cplx{l, 0.0}});
    }

    void validate() const {
        base.validate();
        circuit.validate();
        control.validate();
        if (!std::isfinite(i_ref.real()) || !std::isfinite(i_ref.imag())) throw ParameterError("i_ref must be finite");
    }
};

/// Steady state in the PLL frame.
struct OperatingPoint {
    cplx i_c0;            ///< converter current (pu)
    cplx u_s0_pll;        ///< grid voltage (pu)
    double delta_pll0{};  ///< PLL angle minus grid angle (rad)
    cplx u_g0_pll;        ///< PLL sampling-node voltage (pu); imaginary part ~ 0
    cplx u_c0_pll;        ///< converter voltage (pu)
};

/// Weight of the converter voltage in the sampling-node divider:
/// u_g = u_s + w (u_c - u_s), w = l_grid_side / l_total = 1 / (1 + k_m).
[[nodiscard]] inline double sampling_node_weight(const CircuitParams& c) {
    return c.l_grid_side() / c.l_total();
}

/// Imaginary part of the sampling-node voltage in a frame displaced by
/// `delta` from the grid, at steady state with current i.
[[nodiscard]] inline double lock_residual(const CircuitParams& c, cplx i, double u_s_mag, double delta) {
    const cplx z0{c.r_total(), c.l_total()};
    const cplx ug = u_s_mag * std::exp(-kJ * delta) + sampling_node_weight(c) * z0 * i;
    return ug.imag();
}

/// Steady state: the current integrators force i_c0 = i_ref; the PLL locks
/// where Im(u_g) = 0. The lock angle is found by bisection on (-pi/2, pi/2).
[[nodiscard]] inline OperatingPoint solve_operating_point(const CircuitParams& circuit, cplx i_ref,
                                                          double u_s_mag = 1.0) {
    circuit.validate();
    if (!std::isfinite(i_ref.real()) || !std::isfinite(i_ref.imag())) throw ParameterError("i_ref must be finite");
    if (!(u_s_mag > 0.0)) throw ParameterError("u_s_mag must be > 0");

    auto f = [&](double d) { return lock_residual(circuit, i_ref, u_s_mag, d); };
    const double half = numeric::kPi / 2.0;
    // Im residual is -u_s sin(delta) + const; the open bracket has a root iff
    // |const| < u_s.
    const double lo = -half * (1.0 - 1e-15);
    const double hi = half * (1.0 - 1e-15);
    auto root = numeric::bisect(f, lo, hi, 0.0, 1e-15, 1e-12);
    if (!root || std::abs(f(*root)) >= 1e-10) {
        std::ostringstream os;
        os << "no PLL lock angle in (-pi/2, pi/2): grid cannot carry i_ref = " << i_ref.real()
           << (i_ref.imag() < 0 ? "-" : "+") << std::abs(i_ref.imag()) << "j pu";
        throw InfeasibleOperatingPoint(os.str());
    }

    OperatingPoint op;
    op.delta_pll0 = *root;
    op.i_c0 = i_ref;
    op.u_s0_pll = u_s_mag * std::exp(-kJ * op.delta_pll0);
    const cplx z0{circuit.r_total(), circuit.l_total()};
    op.u_c0_pll = op.u_s0_pll + z0 * i_ref;
    op.u_g0_pll = op.u_s0_pll + sampling_node_weight(circuit) * z0 * i_ref;
    return op;
}

[[nodiscard]] inline OperatingPoint solve_operating_point(const SystemParams& p) {
    return solve_operating_point(p.circuit, p.i_ref, p.control.u_s_mag);
}

}  // namespace vscstab
