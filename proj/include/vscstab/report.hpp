#pragma once

// Time-domain verdicts and the CSV artifacts written by the command-line
// front end. Numbers use 12 significant digits; NaN and missing values are
// written as empty fields.

#include "vscstab/config.hpp"
#include "vscstab/locus.hpp"
#include "vscstab/sequence.hpp"
#include "vscstab/sim.hpp"
#include "vscstab/stability.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace vscstab {

[[nodiscard]] inline std::string csv_num(double x) {
    if (std::isnan(x)) return {};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

[[nodiscard]] inline std::string csv_num(const std::optional<double>& x) { return x ? csv_num(*x) : std::string{}; }

// ---------------------------------------------------------------------------
// Simulator verdict

struct SimResult {
    SimTrace trace;
    TraceClass cls;
    std::optional<SequenceSpectrum> spectrum;
    std::string spectrum_error;  ///< why the spectrum is missing, if it is
    StabilityVerdict verdict;
};

[[nodiscard]] inline Stability to_stability(Oscillation o) {
    switch (o) {
        case Oscillation::damped: return Stability::stable;
        case Oscillation::sustained: return Stability::marginal;
        case Oscillation::growing: return Stability::unstable;
    }
    return Stability::inconclusive;
}

/// Simulates the perturbed system and classifies the envelope: damped is
/// stable, sustained is marginal, growing is unstable. The oscillation
/// frequency (dq frame) is reported as the IOP frequency; the damping
/// column stays empty and the fitted growth rate goes to `detail`.
[[nodiscard]] inline SimResult run_simulation(const SystemParams& params, const SimSettings& s) {
    SimResult r;
    r.trace = simulate(params, s.config);
    r.cls = classify_trace(r.trace, s.window, s.tol);
    r.verdict.method = Method::sim;
    r.verdict.stable = to_stability(r.cls.kind);
    if (!r.cls.quiet) {
        try {
            r.spectrum = sequence_spectrum(r.trace, s.spectrum_window, s.spectrum_skip);
            r.verdict.iop_hz = r.spectrum->osc_freq;
        } catch (const WindowQualityError& e) {
            r.spectrum_error = e.what();
        }
    }
    std::ostringstream os;
    os << "sigma=" << csv_num(r.cls.sigma) << " windows=" << r.cls.windows;
    if (r.trace.tripped && r.trace.trip_time) os << " tripped_at=" << csv_num(*r.trace.trip_time);
    if (r.cls.quiet) os << " quiet";
    if (!r.spectrum_error.empty()) os << " spectrum: " << r.spectrum_error;
    r.verdict.detail = os.str();
    return r;
}

// ---------------------------------------------------------------------------
// CSV writers

/// `f_hz,re,im,curve`
inline void write_curve_header(std::ostream& os) { os << "f_hz,re,im,curve\n"; }

inline void write_curve_row(std::ostream& os, double f_hz, std::optional<cplx> v, const std::string& curve) {
    if (v) {
        os << csv_num(f_hz) << ',' << csv_num(v->real()) << ',' << csv_num(v->imag()) << ',' << curve << '\n';
    } else {
        os << csv_num(f_hz) << ",,," << curve << '\n';
    }
}

inline void write_locus(std::ostream& os, const Locus& l) {
    for (std::size_t k = 0; k < l.freqs.size(); ++k) write_curve_row(os, l.freqs[k], l.values[k], l.label);
}

/// Frequency responses of every rational member of the model on a log grid.
/// Values at poles are written as empty fields.
inline void write_impedance_csv(std::ostream& os, const SequenceModel& m, const AnalysisSettings& a) {
    const std::pair<const char*, const CRational*> members[] = {
        {"h_i", &m.h_i},         {"h_pll", &m.h_pll},       {"g_pll", &m.g_pll},       {"c_pll", &m.c_pll},
        {"z_sigma", &m.z_sigma}, {"z_grid_p", &m.z_grid_p}, {"z_grid_n", &m.z_grid_n}, {"d_pll", &m.d_pll},
        {"z_c_p", &m.z_c_p},     {"z_c_n", &m.z_c_n},       {"r", &m.r},               {"gamma", &m.gamma},
        {"z_loop_p", &m.z_loop_p}, {"z_loop_n", &m.z_loop_n},
    };
    const std::vector<double> grid = numeric::logspace(a.f_min, a.f_max, a.n_points);
    write_curve_header(os);
    for (const auto& [name, x] : members) {
        for (double hz : grid) {
            std::optional<cplx> v;
            try {
                v = (*x)(kJ * (numeric::kTwoPi * hz));
            } catch (const PoleError&) {
            }
            write_curve_row(os, hz, v, name);
        }
    }
}

/// AP loci (z_loop_p, z_loop_n about the origin) and GNC eigenvalue loci.
inline void write_loci_csv(std::ostream& os, const SequenceModel& m, const AnalysisSettings& a) {
    write_curve_header(os);
    write_locus(os, sample_locus(m.z_loop_p, a.f_min, a.f_max, a.n_points, {}, "ap_p"));
    write_locus(os, sample_locus(m.z_loop_n, a.f_min, a.f_max, a.n_points, {}, "ap_n"));
    const EigenLoci e = sample_eigen_loci(m, a.f_min, a.f_max, a.n_points);
    for (std::size_t k = 0; k < e.freqs.size(); ++k) write_curve_row(os, e.freqs[k], e.lambda1[k], "gnc_1");
    for (std::size_t k = 0; k < e.freqs.size(); ++k) write_curve_row(os, e.freqs[k], e.lambda2[k], "gnc_2");
}

/// `param,value,method,stable,winding_p,winding_n,iop_hz,damping_pu`
inline void write_verdict_header(std::ostream& os) {
    os << "param,value,method,stable,winding_p,winding_n,iop_hz,damping_pu\n";
}

inline void write_verdict_row(std::ostream& os, const std::string& param, double value, const StabilityVerdict& v) {
    os << param << ',' << csv_num(value) << ',' << to_string(v.method) << ',' << to_string(v.stable) << ','
       << v.winding_p << ',' << v.winding_n << ',' << csv_num(v.iop_hz) << ',' << csv_num(v.damping) << '\n';
}

/// `osc_freq_hz,i_p_pu,i_n_pu,f_u`
inline void write_spectrum_csv(std::ostream& os, const std::optional<SequenceSpectrum>& s) {
    os << "osc_freq_hz,i_p_pu,i_n_pu,f_u\n";
    if (s) os << csv_num(s->osc_freq) << ',' << csv_num(s->i_p_mag) << ',' << csv_num(s->i_n_mag) << ',' << csv_num(s->f_u) << '\n';
}

/// `param,value,lo,hi`
inline void write_critical_csv(std::ostream& os, SweepParam p, const CriticalResult& c) {
    os << "param,value,lo,hi\n"
       << to_string(p) << ',' << csv_num(c.value) << ',' << csv_num(c.lo) << ',' << csv_num(c.hi) << '\n';
}

/// `param,value,AP,GNC,GASIN,SIM,agree`
inline void write_agreement_header(std::ostream& os) { os << "param,value,AP,GNC,GASIN,SIM,agree\n"; }

inline void write_agreement_row(std::ostream& os, const std::string& param, double value,
                                const std::vector<StabilityVerdict>& v) {
    os << param << ',' << csv_num(value);
    bool agree = !v.empty();
    for (const auto& x : v) {
        os << ',' << to_string(x.stable);
        agree = agree && x.stable == v.front().stable && x.stable != Stability::inconclusive;
    }
    os << ',' << (agree ? "true" : "false") << '\n';
}

}  // namespace vscstab
