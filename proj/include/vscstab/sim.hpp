#pragma once

// Nonlinear averaged time-domain model of the grid-tied converter: series
// R-L circuit to a stiff source, complex PI current controller in the PLL
// frame, and a PI PLL driven by the q-axis voltage of the sampling node.
//
// State vector: circuit current i (complex, frame rotating synchronously
// with the grid source at w_s), current-PI integrator x_cc (complex, PLL
// frame), PLL-PI integrator x_pll and the PLL angle offset
// delta = theta_pll - w_s t. In this frame the operating point is an exact
// fixed point:
//     L_sum di/dt  = u_c e^{j delta} - u_s - (R_sum + j w_s L_sum) i
//     u_c          = kp_cc L_f (i_ref - i_pll) + x_cc,   i_pll = i e^{-j delta}
//     dx_cc/dt     = ki_cc L_f (i_ref - i_pll)
//     u_g          = (u_c e^{j delta} + k_m u_s) / (1 + k_m)
//     q            = Im(u_g e^{-j delta})
//     ddelta/dt    = kp_pll q / U + x_pll,   dx_pll/dt = ki_pll q / U
// The stationary-frame current is i e^{j w_s t} = i_pll e^{j theta_pll}.

#include "vscstab/error.hpp"
#include "vscstab/model.hpp"
#include "vscstab/numeric.hpp"
#include "vscstab/tf.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace vscstab {

enum class PerturbKind { grid_voltage_step, current_ref_step, none };

struct SimConfig {
    double dt = 5e-5;          ///< s
    double t_end = 3.0;        ///< s
    double perturb_time = 0.5; ///< s
    PerturbKind perturb_kind = PerturbKind::grid_voltage_step;
    double perturb_size = 0.01; ///< pu (relative for the voltage step)
    std::size_t record_decimation = 4;
    double trip_current = 10.0; ///< pu

    void validate() const {
        if (!(dt > 0.0)) throw ParameterError("sim dt must be > 0");
        if (dt > 1e-4) throw ParameterError("sim dt must be <= 1e-4 s");
        if (!(t_end > 0.0)) throw ParameterError("sim t_end must be > 0");
        if (!(perturb_time >= 0.0) || !(perturb_time < t_end)) throw ParameterError("perturb_time must lie in [0, t_end)");
        if (record_decimation < 1) throw ParameterError("record_decimation must be >= 1");
        if (!std::isfinite(perturb_size)) throw ParameterError("perturb_size must be finite");
        if (!(trip_current > 0.0)) throw ParameterError("trip_current must be > 0");
    }
};

struct SimTrace {
    std::vector<double> t;
    std::vector<double> i_d, i_q;      ///< PLL frame, pu
    std::vector<double> theta_pll;     ///< rad, unwrapped
    std::vector<double> u_g_mag;       ///< pu
    std::vector<cplx> x_cc;
    std::vector<double> x_pll;
    double perturb_time = 0.0;
    double f1 = 50.0;                  ///< Hz, grid frequency
    bool tripped = false;
    std::optional<double> trip_time;

    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
    [[nodiscard]] double sample_period() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
};

namespace detail {

struct SimState {
    cplx i;
    cplx x_cc;
    double x_pll;
    double delta;
};

inline SimState operator+(const SimState& a, const SimState& b) {
    return {a.i + b.i, a.x_cc + b.x_cc, a.x_pll + b.x_pll, a.delta + b.delta};
}
inline SimState operator*(double k, const SimState& a) { return {k * a.i, k * a.x_cc, k * a.x_pll, k * a.delta}; }

struct SimPlant {
    double lf, ls, r, ws, km, u_nom;
    ControllerParams c;

    struct Outputs {
        cplx i_pll;
        cplx u_g;
    };

    [[nodiscard]] SimState rhs(const SimState& x, cplx i_ref, double u_s, Outputs* out = nullptr) const {
        const cplx rot = std::exp(kJ * x.delta);
        const cplx i_pll = x.i / rot;
        const cplx err = i_ref - i_pll;
        const cplx u_c = c.kp_cc * lf * err + x.x_cc;
        const cplx u_c_grid = u_c * rot;
        const cplx u_g = (u_c_grid + km * u_s) / (1.0 + km);
        const double q = (u_g / rot).imag();
        if (out) *out = {i_pll, u_g};
        SimState d;
        d.i = (u_c_grid - u_s - (r + kJ * ws * ls) * x.i) / ls;
        d.x_cc = c.ki_cc * lf * err;
        d.x_pll = c.ki_pll * q / u_nom;
        d.delta = c.kp_pll * q / u_nom + x.x_pll;
        return d;
    }
};

}  // namespace detail

/// Fixed-step RK4 run from the operating point with one step perturbation.
[[nodiscard]] inline SimTrace simulate(const SystemParams& params, const OperatingPoint& op, const SimConfig& cfg) {
    params.validate();
    cfg.validate();
    const detail::SimPlant plant{params.l_filter_dyn(), params.l_total_dyn(), params.circuit.r_total(),
                                 params.omega_s(),      params.circuit.k_m(), params.control.u_s_mag,
                                 params.control};

    detail::SimState x{params.i_ref * std::exp(kJ * op.delta_pll0), op.u_c0_pll, 0.0, op.delta_pll0};
    SimTrace tr;
    tr.perturb_time = cfg.perturb_time;
    tr.f1 = params.base.f_base;

    const auto steps = static_cast<std::int64_t>(std::llround(cfg.t_end / cfg.dt));
    const auto k_perturb = static_cast<std::int64_t>(std::llround(cfg.perturb_time / cfg.dt));
    const double u_nom = params.control.u_s_mag;

    auto record = [&](std::int64_t k, cplx i_ref, double u_s) {
        detail::SimPlant::Outputs o;
        (void)plant.rhs(x, i_ref, u_s, &o);
        const double t = static_cast<double>(k) * cfg.dt;
        tr.t.push_back(t);
        tr.i_d.push_back(o.i_pll.real());
        tr.i_q.push_back(o.i_pll.imag());
        tr.theta_pll.push_back(plant.ws * t + x.delta);
        tr.u_g_mag.push_back(std::abs(o.u_g));
        tr.x_cc.push_back(x.x_cc);
        tr.x_pll.push_back(x.x_pll);
    };

    for (std::int64_t k = 0; k <= steps; ++k) {
        const bool after = k >= k_perturb && cfg.perturb_kind != PerturbKind::none;
        const double u_s =
            after && cfg.perturb_kind == PerturbKind::grid_voltage_step ? u_nom * (1.0 + cfg.perturb_size) : u_nom;
        const cplx i_ref =
            after && cfg.perturb_kind == PerturbKind::current_ref_step ? params.i_ref + cfg.perturb_size : params.i_ref;

        const bool finite = std::isfinite(x.i.real()) && std::isfinite(x.i.imag()) && std::isfinite(x.delta) &&
                            std::isfinite(x.x_pll) && std::isfinite(x.x_cc.real()) && std::isfinite(x.x_cc.imag());
        if (!finite || std::abs(x.i) > cfg.trip_current) {
            tr.tripped = true;
            tr.trip_time = static_cast<double>(k) * cfg.dt;
            break;
        }
        if (k % static_cast<std::int64_t>(cfg.record_decimation) == 0) record(k, i_ref, u_s);
        if (k == steps) break;

        const double h = cfg.dt;
        const detail::SimState k1 = plant.rhs(x, i_ref, u_s);
        const detail::SimState k2 = plant.rhs(x + (0.5 * h) * k1, i_ref, u_s);
        const detail::SimState k3 = plant.rhs(x + (0.5 * h) * k2, i_ref, u_s);
        const detail::SimState k4 = plant.rhs(x + h * k3, i_ref, u_s);
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return tr;
}

[[nodiscard]] inline SimTrace simulate(const SystemParams& params, const SimConfig& cfg) {
    return simulate(params, solve_operating_point(params), cfg);
}

// ---------------------------------------------------------------------------
// Trace analysis

enum class Oscillation { damped, sustained, growing };

[[nodiscard]] inline const char* to_string(Oscillation o) {
    switch (o) {
        case Oscillation::damped: return "damped";
        case Oscillation::sustained: return "sustained";
        case Oscillation::growing: return "growing";
    }
    return "?";
}

struct TraceClass {
    Oscillation kind = Oscillation::damped;
    double sigma = 0.0;    ///< fitted envelope growth rate, 1/s
    bool quiet = false;    ///< no oscillation above 1e-6 pu
    std::size_t windows = 0;
};

namespace detail {

/// Indices [first, last) of samples with t in [t0, t1).
inline std::pair<std::size_t, std::size_t> span(const SimTrace& tr, double t0, double t1) {
    const auto a = std::lower_bound(tr.t.begin(), tr.t.end(), t0);
    const auto b = std::lower_bound(tr.t.begin(), tr.t.end(), t1);
    return {static_cast<std::size_t>(a - tr.t.begin()), static_cast<std::size_t>(b - tr.t.begin())};
}

/// Peak amplitude of x minus its least-squares line over [a, b).
inline double detrended_amplitude(const std::vector<double>& t, const std::vector<double>& x, std::size_t a,
                                  std::size_t b) {
    const double n = static_cast<double>(b - a);
    double st = 0, sx = 0, stt = 0, stx = 0;
    for (std::size_t k = a; k < b; ++k) {
        st += t[k];
        sx += x[k];
        stt += t[k] * t[k];
        stx += t[k] * x[k];
    }
    const double den = n * stt - st * st;
    const double slope = den != 0.0 ? (n * stx - st * sx) / den : 0.0;
    const double icpt = (sx - slope * st) / n;
    double ss = 0.0;
    for (std::size_t k = a; k < b; ++k) {
        const double r = x[k] - (icpt + slope * t[k]);
        ss += r * r;
    }
    return std::sqrt(2.0 * ss / n);
}

inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sx += x[k];
        sy += y[k];
        sxx += x[k] * x[k];
        sxy += x[k] * y[k];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct EnvelopeFit {
    double sigma = 0.0;
    double max_amp = 0.0;
    std::size_t windows = 0;
};

inline EnvelopeFit fit_envelope(const SimTrace& tr, double t0, double t1, double window) {
    std::vector<double> mids, amps;
    EnvelopeFit fit;
    for (double a = t0; a + window <= t1 + 1e-12; a += window) {
        const auto [i0, i1] = span(tr, a, a + window);
        if (i1 - i0 < 8) continue;
        const double amp = detrended_amplitude(tr.t, tr.i_d, i0, i1);
        fit.max_amp = std::max(fit.max_amp, amp);
        mids.push_back(a + 0.5 * window);
        amps.push_back(amp);
    }
    // windows that have decayed into round-off carry no envelope information
    const double floor = std::max(1e-8 * fit.max_amp, 1e-13);
    std::vector<double> centers, logs;
    for (std::size_t k = 0; k < amps.size(); ++k) {
        if (amps[k] > floor) {
            centers.push_back(mids[k]);
            logs.push_back(std::log(amps[k]));
        }
    }
    fit.windows = centers.size();
    if (centers.size() >= 2) fit.sigma = ls_slope(centers, logs);
    return fit;
}

}  // namespace detail

/// Envelope growth of the detrended i_d oscillation over consecutive windows
/// after the perturbation. The first window after the step is skipped so
/// that fast transients do not bias the fit.
[[nodiscard]] inline TraceClass classify_trace(const SimTrace& tr, double window, double tol = 0.5) {
    if (!(window > 0.0)) throw ParameterError("classification window must be > 0");
    TraceClass out;
    if (tr.t.empty()) throw ParameterError("empty trace");
    const double t0 = tr.perturb_time + window;
    const double t1 = tr.t.back();
    if (tr.tripped) {
        // growth rate from whatever whole windows precede the trip
        out.kind = Oscillation::growing;
        const detail::EnvelopeFit fit = detail::fit_envelope(tr, t0, t1, window);
        out.windows = fit.windows;
        out.sigma = fit.windows >= 2 ? fit.sigma : std::numeric_limits<double>::infinity();
        return out;
    }
    if (t1 - tr.perturb_time < 3.0 * window) throw ParameterError("trace must span at least 3 windows after the perturbation");
    const detail::EnvelopeFit fit = detail::fit_envelope(tr, t0, t1, window);
    out.windows = fit.windows;
    if (fit.max_amp < 1e-6 || fit.windows < 2) {
        out.quiet = true;
        out.kind = Oscillation::damped;
        return out;
    }
    out.sigma = fit.sigma;
    out.kind = fit.sigma < -tol ? Oscillation::damped : (fit.sigma > tol ? Oscillation::growing : Oscillation::sustained);
    return out;
}

struct SequenceSpectrum {
    double osc_freq = 0.0;  ///< Hz, in the dq frame
    double i_p_mag = 0.0;   ///< pu, stationary frame at f1 + osc_freq
    double i_n_mag = 0.0;   ///< pu, stationary frame at f1 - osc_freq
    double f_u = 0.0;
    double t_start = 0.0, t_stop = 0.0;  ///< analysis window actually used
};

namespace detail {

/// Magnitude of the Hann-windowed DTFT of the mean-removed signal at f.
inline double dtft_mag(const std::vector<double>& t, const std::vector<double>& x, std::size_t a, std::size_t b,
                       double mean, double f) {
    const double n = static_cast<double>(b - a);
    cplx acc{};
    for (std::size_t k = a; k < b; ++k) {
        const double w = 0.5 - 0.5 * std::cos(numeric::kTwoPi * static_cast<double>(k - a) / (n - 1.0));
        acc += w * (x[k] - mean) * std::exp(-kJ * (numeric::kTwoPi * f * t[k]));
    }
    return std::abs(acc);
}

/// Dominant oscillation frequency of i_d over [a, b): coarse scan of the
/// windowed spectrum, then Brent refinement around the best bin.
inline double dominant_frequency(const SimTrace& tr, std::size_t a, std::size_t b, double f_lo, double f_hi) {
    double mean = 0.0;
    for (std::size_t k = a; k < b; ++k) mean += tr.i_d[k];
    mean /= static_cast<double>(b - a);
    const double span_t = tr.t[b - 1] - tr.t[a];
    const double df = 0.25 / span_t;
    double best_f = f_lo, best = -1.0;
    for (double f = f_lo; f <= f_hi; f += df) {
        const double m = dtft_mag(tr.t, tr.i_d, a, b, mean, f);
        if (m > best) {
            best = m;
            best_f = f;
        }
    }
    const auto r = boost::math::tools::brent_find_minima(
        [&](double f) { return -dtft_mag(tr.t, tr.i_d, a, b, mean, f); }, std::max(f_lo, best_f - df),
        std::min(f_hi, best_f + df), 40);
    return r.first;
}

}  // namespace detail

/// Positive/negative sequence content of the oscillation.
///
/// The analysis window starts `skip` seconds after the perturbation (or
/// ends just before a trip) and is snapped to an integer number of
/// oscillation periods. The stationary current i_pll e^{j theta_pll} is
/// shifted down by the grid frequency, its window mean removed, and, for a
/// growing or decaying envelope, divided by e^{sigma t}; single-bin
/// projections at +osc and -osc then give i_p and i_n.
[[nodiscard]] inline SequenceSpectrum sequence_spectrum(const SimTrace& tr, double window, double skip = 0.2,
                                                        double f_lo = 1.0, double f_hi = 500.0) {
    if (!(window > 0.0)) throw ParameterError("spectrum window must be > 0");
    if (tr.t.size() < 16) throw WindowQualityError("trace too short for spectral analysis");
    double t0 = tr.perturb_time + skip;
    double t_last = tr.t.back();
    if (tr.tripped && tr.trip_time) {
        // stay in the small-signal part of a diverging run
        const double t_trip = *tr.trip_time;
        std::size_t k_big = tr.t.size();
        const double base = std::abs(cplx(tr.i_d.front(), tr.i_q.front()));
        for (std::size_t k = 0; k < tr.t.size(); ++k) {
            if (tr.t[k] > tr.perturb_time && std::abs(cplx(tr.i_d[k], tr.i_q[k])) > base + 0.5) {
                k_big = k;
                break;
            }
        }
        t_last = std::min(t_trip, k_big < tr.t.size() ? tr.t[k_big] : t_trip);
        t0 = std::max(tr.perturb_time + 0.5 * skip, t_last - window);
    }
    if (t0 + window > t_last + 1e-12) t0 = std::max(tr.perturb_time, t_last - window);
    auto [a, b] = detail::span(tr, t0, std::min(t0 + window, t_last));
    if (b - a < 16) throw WindowQualityError("analysis window holds too few samples");

    const double fo = detail::dominant_frequency(tr, a, b, f_lo, f_hi);
    const double periods = std::floor((tr.t[b - 1] - tr.t[a]) * fo);
    if (periods < 2.0) throw WindowQualityError("analysis window shorter than two oscillation periods");
    const double t_stop = tr.t[a] + periods / fo;
    b = detail::span(tr, tr.t[a], t_stop).second;

    // envelope of the oscillation inside the window
    const double sub = std::min(0.5 * (t_stop - tr.t[a]), std::max(2.0 / fo, (t_stop - tr.t[a]) / 4.0));
    const detail::EnvelopeFit env = detail::fit_envelope(tr, tr.t[a], t_stop, sub);
    if (env.max_amp < 1e-6) throw WindowQualityError("no oscillation detected in the analysis window");
    const double sigma = env.windows >= 2 ? env.sigma : 0.0;

    const double w1 = numeric::kTwoPi * tr.f1;
    const double tc = tr.t[a];
    std::vector<cplx> z(b - a);
    cplx mean{};
    for (std::size_t k = a; k < b; ++k) {
        const cplx i_stat = cplx(tr.i_d[k], tr.i_q[k]) * std::exp(kJ * tr.theta_pll[k]);
        z[k - a] = i_stat * std::exp(-kJ * (w1 * tr.t[k]));
        mean += z[k - a];
    }
    mean /= static_cast<double>(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        z[k] = (z[k] - mean) * std::exp(-sigma * (tr.t[a + k] - tc));
    }
    // detrend again after compensation
    cplx mean2{};
    for (const auto& v : z) mean2 += v;
    mean2 /= static_cast<double>(z.size());
    for (auto& v : z) v -= mean2;

    const double n = static_cast<double>(z.size());
    auto bin = [&](double f) {
        cplx acc{};
        for (std::size_t k = 0; k < z.size(); ++k) acc += z[k] * std::exp(-kJ * (numeric::kTwoPi * f * (tr.t[a + k] - tc)));
        return std::abs(acc) / n;
    };
    SequenceSpectrum out;
    out.osc_freq = fo;
    out.i_p_mag = bin(fo);
    out.i_n_mag = bin(-fo);
    out.t_start = tr.t[a];
    out.t_stop = t_stop;
    if (!(out.i_p_mag > 0.0)) throw WindowQualityError("no positive-sequence oscillation content");
    out.f_u = out.i_n_mag / out.i_p_mag;

    const double span_t = t_stop - tr.t[a];
    const double peak = std::max(out.i_p_mag, out.i_n_mag);
    double side = 0.0;
    for (double f : {fo - 1.0 / span_t, fo + 1.0 / span_t, -fo - 1.0 / span_t, -fo + 1.0 / span_t}) {
        side = std::max(side, bin(f));
    }
    if (side > 0.2 * peak) {
        std::ostringstream os;
        os << "spectral leakage: side bin " << side << " exceeds 20% of peak " << peak;
        throw WindowQualityError(os.str());
    }
    return out;
}

inline void write_trace_csv(std::ostream& os, const SimTrace& tr) {
    os << "t,i_d,i_q,theta_pll,u_g_mag\n";
    char buf[256];
    for (std::size_t k = 0; k < tr.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g\n", tr.t[k], tr.i_d[k], tr.i_q[k],
                      tr.theta_pll[k], tr.u_g_mag[k]);
        os << buf;
    }
}

}  // namespace vscstab
