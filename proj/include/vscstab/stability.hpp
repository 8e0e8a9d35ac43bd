#pragma once

// Stability verdicts from the augmented sequence loop impedance (Argument
// Principle), the minor-loop eigenvalues (generalized Nyquist) and the
// generalized ASIN, plus IOP search, parameter sweeps and critical-value
// bisection.
//
// All encirclement counts use the full D-contour (see locus.hpp). For a
// loop function with P right-half-plane poles and counterclockwise winding W
// about the critical point, the number of closed-loop right-half-plane
// poles is Z = P - W. The loop impedances of this model do have RHP poles
// for fast PLLs (roots of conj_coeff(H_i + Z_grid^p)), so P is counted from
// the denominator along the same contour instead of being assumed zero.

#include "vscstab/error.hpp"
#include "vscstab/locus.hpp"
#include "vscstab/model.hpp"
#include "vscstab/numeric.hpp"
#include "vscstab/sequence.hpp"
#include "vscstab/tf.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace vscstab {

enum class Method { ap, gnc, gasin, sim };
enum class Stability { stable, unstable, marginal, inconclusive };

[[nodiscard]] inline const char* to_string(Method m) {
    switch (m) {
        case Method::ap: return "AP";
        case Method::gnc: return "GNC";
        case Method::gasin: return "GASIN";
        case Method::sim: return "SIM";
    }
    return "?";
}

[[nodiscard]] inline const char* to_string(Stability s) {
    switch (s) {
        case Stability::stable: return "stable";
        case Stability::unstable: return "unstable";
        case Stability::marginal: return "marginal";
        case Stability::inconclusive: return "inconclusive";
    }
    return "?";
}

struct AnalysisSettings {
    double f_min = 0.1;          ///< Hz
    double f_max = 1000.0;       ///< Hz
    std::size_t n_points = 2000; ///< log-spaced base grid
    double marginal_eps = 1e-3;  ///< pu

    void validate() const {
        if (!(f_min > 0.0) || !(f_max > f_min)) throw ParameterError("analysis band needs 0 < f_min < f_max");
        if (n_points < 16) throw ParameterError("analysis grid needs at least 16 points");
        if (!(marginal_eps > 0.0)) throw ParameterError("marginal_eps must be > 0");
    }
};

struct StabilityVerdict {
    Method method = Method::ap;
    Stability stable = Stability::inconclusive;
    int winding_p = 0;                 ///< ccw turns about the critical point, positive-sequence curve
    int winding_n = 0;
    int open_loop_rhp = 0;             ///< P
    int closed_loop_rhp = 0;           ///< Z = P - W
    std::optional<double> iop_hz;
    double damping = std::numeric_limits<double>::quiet_NaN();
    std::string detail;
};

struct Iop {
    double f_hz;
    double damping;  ///< Re at the IOP (pu)
};

/// Zero crossings of Im x(j 2 pi f) on (f_min, f_max], bracketed on a
/// log grid and bisected to 1e-6 relative. Crossings through a pole (Im
/// jumping through infinity) are discarded.
template <class F>
[[nodiscard]] std::vector<Iop> find_iop_fn(F&& x, double f_min, double f_max, std::size_t n = 2000) {
    if (!(f_min > 0.0) || !(f_max > f_min)) throw ParameterError("find_iop requires 0 < f_min < f_max");
    auto at = [&](double hz) { return x(kJ * (numeric::kTwoPi * hz)); };
    std::vector<Iop> out;
    const std::vector<double> grid = numeric::logspace(f_min, f_max, std::max<std::size_t>(n, 16));
    cplx prev = at(grid[0]);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const cplx cur = at(grid[k]);
        if ((prev.imag() < 0.0) != (cur.imag() < 0.0)) {
            const double lo = grid[k - 1], hi = grid[k];
            const auto root = numeric::bisect([&](double hz) { return at(hz).imag(); }, lo, hi, 1e-6);
            if (root) {
                const cplx v = at(*root);
                const double bound = 1e3 * std::max({std::abs(prev), std::abs(cur), 1e-12});
                if (std::abs(v) <= bound) out.push_back({*root, v.real()});
            }
        }
        prev = cur;
    }
    return out;
}

[[nodiscard]] inline std::vector<Iop> find_iop(const CRational& x, double f_min, double f_max,
                                               std::size_t n = 2000) {
    return find_iop_fn([&x](cplx s) { return x(s); }, f_min, f_max, n);
}

namespace detail {

/// Most critical IOP: the one with the smallest (signed) damping.
inline void attach_iop(StabilityVerdict& v, const std::vector<Iop>& iops) {
    if (iops.empty()) return;
    const auto it = std::min_element(iops.begin(), iops.end(),
                                     [](const Iop& a, const Iop& b) { return a.damping < b.damping; });
    v.iop_hz = it->f_hz;
    v.damping = it->damping;
}

inline void classify(StabilityVerdict& v, double eps) {
    if (v.closed_loop_rhp < 0) {
        v.stable = Stability::inconclusive;
    } else if (v.iop_hz && std::abs(v.damping) < eps) {
        v.stable = Stability::marginal;
    } else {
        v.stable = v.closed_loop_rhp == 0 ? Stability::stable : Stability::unstable;
    }
}

struct LoopCount {
    int winding;
    int poles;
};

inline LoopCount count_loop(const CRational& x, const ContourSpec& spec) {
    const int w = contour_winding([&x](cplx s) { return x(s); }, spec);
    return {w, rhp_root_count(x.den(), spec)};
}

inline ContourSpec model_contour(const SequenceModel& m) {
    const auto& p = m.polys;
    return contour_for({&p.k_cc, &p.zs, &p.cd, &p.cn, &p.p, &p.q, &p.gamma_den, &p.loop_num});
}

/// Shared by the AP and GASIN verdicts: a pair of mirrored scalar loops.
inline StabilityVerdict scalar_verdict(Method method, const CRational& zp, const CRational& zn,
                                       const ContourSpec& spec, const AnalysisSettings& a) {
    a.validate();
    StabilityVerdict v;
    v.method = method;
    const LoopCount cp = count_loop(zp, spec);
    const LoopCount cn = count_loop(zn, spec);
    v.winding_p = cp.winding;
    v.winding_n = cn.winding;
    v.open_loop_rhp = cp.poles;
    const int zp_rhp = cp.poles - cp.winding;
    const int zn_rhp = cn.poles - cn.winding;
    v.closed_loop_rhp = zp_rhp;
    attach_iop(v, find_iop(zp, a.f_min, a.f_max, a.n_points));
    std::ostringstream os;
    os << "p: W=" << cp.winding << " P=" << cp.poles << " Z=" << zp_rhp << "; n: W=" << cn.winding
       << " P=" << cn.poles << " Z=" << zn_rhp;
    v.detail = os.str();
    if (zp_rhp != zn_rhp) {
        v.closed_loop_rhp = -1;
        v.detail += "; sequence counts disagree";
    }
    classify(v, a.marginal_eps);
    return v;
}

}  // namespace detail

/// Argument Principle on the ASIN loop impedances z_loop_p and z_loop_n.
[[nodiscard]] inline StabilityVerdict ap_verdict(const SequenceModel& m, const AnalysisSettings& a = {}) {
    return detail::scalar_verdict(Method::ap, m.z_loop_p, m.z_loop_n, detail::model_contour(m), a);
}

/// Argument Principle on the generalized ASIN loop impedances built from the
/// coupled source matrix and diag(H_i, H_i*).
[[nodiscard]] inline StabilityVerdict gasin_verdict(const SequenceModel& m, const AnalysisSettings& a = {}) {
    const auto [zp, zn] = gasin_loop(gasin_input(m));
    ContourSpec spec = detail::model_contour(m);
    const ContourSpec own = contour_for({&zp.num(), &zp.den()});
    spec.eps = std::min(spec.eps, own.eps);
    spec.radius = std::max(spec.radius, own.radius);
    return detail::scalar_verdict(Method::gasin, zp, zn, spec, a);
}

/// Crossing of an eigenvalue locus with the negative real axis.
struct EigenCrossing {
    double f_hz;
    double margin;  ///< 1 + Re(lambda): distance from -1 along the real axis
};

namespace detail {

/// Pairs the eigenvalues at s with the previous pair by minimal distance.
inline std::pair<cplx, cplx> track(const std::pair<cplx, cplx>& prev, const std::pair<cplx, cplx>& cur) {
    const double keep = std::abs(cur.first - prev.first) + std::abs(cur.second - prev.second);
    const double swap = std::abs(cur.second - prev.first) + std::abs(cur.first - prev.second);
    return keep <= swap ? cur : std::pair<cplx, cplx>{cur.second, cur.first};
}

inline std::pair<cplx, cplx> eig_at(const SequenceModel& m, cplx s) {
    const GncEigenvalues e = gnc_eigenvalues(m, s);
    return {e.lambda1, e.lambda2};
}

}  // namespace detail

/// Eigenvalue loci on j 2 pi f over the analysis band, branch-tracked.
struct EigenLoci {
    std::vector<double> freqs;
    std::vector<cplx> lambda1;
    std::vector<cplx> lambda2;
};

[[nodiscard]] inline EigenLoci sample_eigen_loci(const SequenceModel& m, double f_min, double f_max,
                                                 std::size_t n) {
    EigenLoci out;
    std::pair<cplx, cplx> prev;
    bool first = true;
    for (double hz : numeric::logspace(f_min, f_max, n)) {
        auto cur = detail::eig_at(m, kJ * (numeric::kTwoPi * hz));
        if (!first) cur = detail::track(prev, cur);
        first = false;
        out.freqs.push_back(hz);
        out.lambda1.push_back(cur.first);
        out.lambda2.push_back(cur.second);
        prev = cur;
    }
    return out;
}

/// Negative-real-axis crossings of both eigenvalue loci in the band.
[[nodiscard]] inline std::vector<EigenCrossing> eigen_crossings(const SequenceModel& m, double f_min, double f_max,
                                                                std::size_t n) {
    const EigenLoci loci = sample_eigen_loci(m, f_min, f_max, n);
    std::vector<EigenCrossing> out;
    auto scan = [&](const std::vector<cplx>& lam) {
        for (std::size_t k = 1; k < lam.size(); ++k) {
            const cplx a = lam[k - 1], b = lam[k];
            if ((a.imag() < 0.0) == (b.imag() < 0.0)) continue;
            if (a.real() >= 0.0 && b.real() >= 0.0) continue;
            // inside the bracket, follow the eigenvalue closest to both ends
            auto branch_value = [&](double hz) {
                const auto e = detail::eig_at(m, kJ * (numeric::kTwoPi * hz));
                const double d1 = std::abs(e.first - a) + std::abs(e.first - b);
                const double d2 = std::abs(e.second - a) + std::abs(e.second - b);
                return d1 <= d2 ? e.first : e.second;
            };
            const auto root = numeric::bisect([&](double hz) { return branch_value(hz).imag(); }, loci.freqs[k - 1],
                                              loci.freqs[k], 1e-6);
            if (!root) continue;
            const cplx v = branch_value(*root);
            if (v.real() < 0.0) out.push_back({*root, 1.0 + v.real()});
        }
    };
    scan(loci.lambda1);
    scan(loci.lambda2);
    std::sort(out.begin(), out.end(), [](const EigenCrossing& x, const EigenCrossing& y) { return x.f_hz < y.f_hz; });
    return out;
}

/// Generalized Nyquist criterion on the minor loop Z_source Z_conv^-1: the
/// eigenvalue loci are tracked along the D-contour and their encirclements
/// of -1 are summed. Open-loop RHP poles are the RHP roots of the coupling
/// denominator 1 - D D* and (twice) of the current-controller zero.
[[nodiscard]] inline StabilityVerdict gnc_verdict(const SequenceModel& m, const AnalysisSettings& a = {}) {
    a.validate();
    const ContourSpec spec = detail::model_contour(m);
    StabilityVerdict v;
    v.method = Method::gnc;

    // Each eigenvalue branch is followed separately; the images are refined on
    // det(I + M) so that both branches are resolved.
    const ContourImage img = nyquist_image(
        [&m](cplx s) {
            const FreqMatrix2 ml = minor_loop_matrix(m, s);
            return (1.0 + ml(0, 0)) * (1.0 + ml(1, 1)) - ml(0, 1) * ml(1, 0);
        },
        spec, cplx{});
    std::vector<cplx> b1, b2;
    b1.reserve(img.s.size());
    b2.reserve(img.s.size());
    std::pair<cplx, cplx> prev;
    for (std::size_t k = 0; k < img.s.size(); ++k) {
        auto cur = detail::eig_at(m, img.s[k]);
        if (k > 0) cur = detail::track(prev, cur);
        b1.push_back(1.0 + cur.first);
        b2.push_back(1.0 + cur.second);
        prev = cur;
    }
    const int w_total = winding_number(img.values, cplx{}, true);
    // The branches may exchange along the contour; branch 1 is reported and
    // branch 2 carries the remainder of the total.
    double turns1 = 0.0;
    for (std::size_t k = 0; k + 1 < b1.size(); ++k) turns1 += std::arg(b1[k + 1] / b1[k]);
    v.winding_p = static_cast<int>(std::lround(turns1 / numeric::kTwoPi));
    v.winding_n = w_total - v.winding_p;

    v.open_loop_rhp = rhp_root_count(m.polys.gamma_den, spec) + 2 * rhp_root_count(m.polys.k_cc, spec);
    v.closed_loop_rhp = v.open_loop_rhp - w_total;

    const auto crossings = eigen_crossings(m, a.f_min, a.f_max, a.n_points);
    if (!crossings.empty()) {
        const auto it = std::min_element(crossings.begin(), crossings.end(),
                                         [](const EigenCrossing& x, const EigenCrossing& y) { return x.margin < y.margin; });
        v.iop_hz = it->f_hz;
        v.damping = it->margin;
    }
    std::ostringstream os;
    os << "W=" << w_total << " P=" << v.open_loop_rhp << " Z=" << v.closed_loop_rhp << " crossings=" << crossings.size();
    v.detail = os.str();
    detail::classify(v, a.marginal_eps);
    return v;
}

[[nodiscard]] inline StabilityVerdict verdict(Method method, const SequenceModel& m, const AnalysisSettings& a = {}) {
    switch (method) {
        case Method::ap: return ap_verdict(m, a);
        case Method::gnc: return gnc_verdict(m, a);
        case Method::gasin: return gasin_verdict(m, a);
        case Method::sim: break;
    }
    throw ParameterError("frequency-domain verdict requested for the simulator");
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParam { pll_bw, scr, resistance, cc_bw };

[[nodiscard]] inline const char* to_string(SweepParam p) {
    switch (p) {
        case SweepParam::pll_bw: return "pll_bw";
        case SweepParam::scr: return "scr";
        case SweepParam::resistance: return "resistance";
        case SweepParam::cc_bw: return "cc_bw";
    }
    return "?";
}

[[nodiscard]] inline SweepParam parse_sweep_param(const std::string& s) {
    if (s == "pll_bw") return SweepParam::pll_bw;
    if (s == "scr") return SweepParam::scr;
    if (s == "resistance") return SweepParam::resistance;
    if (s == "cc_bw") return SweepParam::cc_bw;
    throw ParameterError("unknown sweep parameter '" + s + "' (pll_bw|scr|resistance|cc_bw)");
}

/// Base case of a sweep: circuit and operating point plus the gain targets
/// from which the controller is designed at every point. With `redesign`
/// off the gains in `system.control` are used as given and bandwidth
/// sweeps are rejected.
struct SweepBase {
    SystemParams system;
    GainTargets targets;
    AnalysisSettings analysis;
    bool redesign = true;

    SweepBase() { system.control = design_gains(targets); }
};

/// Parameters with one quantity replaced. `resistance` is the total series
/// resistance, placed in the grid branch.
[[nodiscard]] inline SystemParams apply_sweep_value(const SweepBase& base, SweepParam p, double value) {
    SystemParams sp = base.system;
    GainTargets t = base.targets;
    if (!base.redesign && (p == SweepParam::pll_bw || p == SweepParam::cc_bw)) {
        throw ParameterError(std::string("cannot sweep ") + to_string(p) + " with explicit controller gains");
    }
    switch (p) {
        case SweepParam::pll_bw: t.pll_bw = value; break;
        case SweepParam::cc_bw: t.cc_bw = value; break;
        case SweepParam::scr:
            if (!(value > 0.0)) throw ParameterError("scr must be > 0");
            sp.circuit.l_s = 1.0 / value;
            break;
        case SweepParam::resistance:
            sp.circuit.r_filter = 0.0;
            sp.circuit.r_t = 0.0;
            sp.circuit.r_s = value;
            break;
    }
    if (base.redesign) sp.control = design_gains(t, sp.control.u_s_mag);
    return sp;
}

struct SweepRow {
    double value;
    std::vector<StabilityVerdict> verdicts;
};

/// One model build and the requested verdicts per value. Points run
/// concurrently; rows come back in input order.
[[nodiscard]] inline std::vector<SweepRow> sweep(const SweepBase& base, SweepParam p, const std::vector<double>& values,
                                                 const std::vector<Method>& methods) {
    std::vector<std::future<SweepRow>> jobs;
    jobs.reserve(values.size());
    for (double value : values) {
        jobs.push_back(std::async(std::launch::async, [&base, p, value, &methods] {
            const SequenceModel m = build_model(apply_sweep_value(base, p, value));
            SweepRow row{value, {}};
            for (Method method : methods) row.verdicts.push_back(verdict(method, m, base.analysis));
            return row;
        }));
    }
    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (auto& j : jobs) rows.push_back(j.get());
    return rows;
}

/// Closed-loop stability by the Argument Principle count alone (no marginal
/// band), used to locate boundaries.
[[nodiscard]] inline bool is_stable_ap(const SweepBase& base, SweepParam p, double value) {
    const SequenceModel m = build_model(apply_sweep_value(base, p, value));
    const detail::LoopCount c = detail::count_loop(m.z_loop_p, detail::model_contour(m));
    const int z = c.poles - c.winding;
    if (z < 0) throw UnreliableWinding("negative closed-loop pole count");
    return z == 0;
}

struct CriticalResult {
    double value;
    double lo, hi;  ///< final bracket
};

/// Bisects the stable/unstable boundary of `p` in [lo, hi] to `rel_tol`.
/// The bracket is pre-scanned on `scan_points` points; more than one
/// transition raises AmbiguousBoundary listing them all.
[[nodiscard]] inline CriticalResult critical(const SweepBase& base, SweepParam p, double lo, double hi,
                                             double rel_tol = 1e-5, std::size_t scan_points = 24) {
    if (!(lo > 0.0) || !(hi > lo)) throw ParameterError("critical search needs 0 < lo < hi");
    const std::vector<double> grid = numeric::logspace(lo, hi, scan_points);
    std::vector<std::future<bool>> jobs;
    for (double x : grid) jobs.push_back(std::async(std::launch::async, [&base, p, x] { return is_stable_ap(base, p, x); }));
    std::vector<bool> st;
    for (auto& j : jobs) st.push_back(j.get());

    std::vector<std::size_t> transitions;
    for (std::size_t k = 1; k < st.size(); ++k)
        if (st[k] != st[k - 1]) transitions.push_back(k);
    if (transitions.empty()) {
        throw AmbiguousBoundary(std::string("no stability transition of ") + to_string(p) + " in the bracket");
    }
    if (transitions.size() > 1) {
        std::ostringstream os;
        os << "non-monotone stability transitions of " << to_string(p) << " near";
        for (auto k : transitions) os << " [" << grid[k - 1] << ", " << grid[k] << "]";
        throw AmbiguousBoundary(os.str());
    }
    double a = grid[transitions[0] - 1];
    double b = grid[transitions[0]];
    const bool stable_a = st[transitions[0] - 1];
    while (b - a > rel_tol * 0.5 * (a + b)) {
        const double mid = 0.5 * (a + b);
        if (is_stable_ap(base, p, mid) == stable_a) {
            a = mid;
        } else {
            b = mid;
        }
    }
    return {0.5 * (a + b), a, b};
}

}  // namespace vscstab
