#include "vscstab/report.hpp"
#include "vscstab/sim.hpp"
#include "vscstab/stability.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <functional>
#include <sstream>

using namespace vscstab;

namespace {

SystemParams params_at(double pll_bw) { return apply_sweep_value(SweepBase{}, SweepParam::pll_bw, pll_bw); }

double critical_pll_bw() {
    static const double value = critical(SweepBase{}, SweepParam::pll_bw, 2.0, 40.0).value;
    return value;
}

/// Trace sampled at 2 kHz with dq current i(t) and a PLL running at f1.
SimTrace synthetic(const std::function<cplx(double)>& i_dq, double t_end = 3.0, double perturb = 0.5) {
    SimTrace tr;
    tr.perturb_time = perturb;
    tr.f1 = 50.0;
    const double dt = 5e-4;
    for (double t = 0.0; t <= t_end + 1e-12; t += dt) {
        const cplx i = i_dq(t);
        tr.t.push_back(t);
        tr.i_d.push_back(i.real());
        tr.i_q.push_back(i.imag());
        tr.theta_pll.push_back(numeric::kTwoPi * tr.f1 * t);
        tr.u_g_mag.push_back(1.0);
        tr.x_cc.push_back({});
        tr.x_pll.push_back(0.0);
    }
    return tr;
}

SimTrace ringing(double sigma, double amp = 1e-3, double f = 20.0) {
    return synthetic([=](double t) {
        if (t < 0.5) return cplx{0.5, 0.0};
        return cplx{0.5 + amp * std::exp(sigma * (t - 0.5)) * std::sin(numeric::kTwoPi * f * (t - 0.5)), 0.0};
    });
}

}  // namespace

TEST(Simulate, OperatingPointIsAFixedPoint) {
    SimConfig cfg;
    cfg.perturb_kind = PerturbKind::none;
    cfg.t_end = 1.0;
    const SystemParams p = params_at(13.0);
    const SimTrace tr = simulate(p, cfg);
    ASSERT_FALSE(tr.tripped);
    double drift = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        drift = std::max(drift, std::abs(cplx(tr.i_d[k], tr.i_q[k]) - p.i_ref));
        drift = std::max(drift, std::abs(tr.theta_pll[k] - numeric::kTwoPi * 50.0 * tr.t[k] - tr.theta_pll[0]));
    }
    EXPECT_LT(drift, 1e-8);
}

TEST(Simulate, RejectsInvalidSettings) {
    SimConfig cfg;
    cfg.dt = 0.0;
    EXPECT_THROW((void)simulate(params_at(13.0), cfg), ParameterError);
    cfg = SimConfig{};
    cfg.perturb_time = 5.0;
    EXPECT_THROW((void)simulate(params_at(13.0), cfg), ParameterError);
}

TEST(Simulate, DecimationKeepsEveryNthSample) {
    SimConfig cfg;
    cfg.t_end = 1.0;
    cfg.record_decimation = 10;
    const SimTrace tr = simulate(params_at(5.0), cfg);
    ASSERT_EQ(tr.size(), 2001u);
    EXPECT_NEAR(tr.sample_period(), 10 * cfg.dt, 1e-15);
}

TEST(Simulate, FastPllTripsAndGrows) {
    const SimTrace tr = simulate(params_at(30.0), SimConfig{});
    EXPECT_TRUE(tr.tripped);
    ASSERT_TRUE(tr.trip_time.has_value());
    EXPECT_GT(*tr.trip_time, 0.5);
    EXPECT_EQ(classify_trace(tr, 0.2).kind, Oscillation::growing);
}

TEST(Simulate, SlowPllSettles) {
    const TraceClass c = classify_trace(simulate(params_at(5.0), SimConfig{}), 0.2);
    EXPECT_EQ(c.kind, Oscillation::damped);
}

TEST(Simulate, GrowthRateIsStepSizeIndependent) {
    const SystemParams p = params_at(0.8 * critical_pll_bw());
    SimConfig a, b;
    b.dt = a.dt / 2.0;
    b.record_decimation = 2 * a.record_decimation;
    const TraceClass ca = classify_trace(simulate(p, a), 0.2);
    const TraceClass cb = classify_trace(simulate(p, b), 0.2);
    ASSERT_FALSE(ca.quiet);
    EXPECT_NEAR(ca.sigma, cb.sigma, 0.02 * std::abs(cb.sigma));
}

TEST(Simulate, AgreesWithArgumentPrinciple) {
    const double fc = critical_pll_bw();
    const std::pair<double, Oscillation> cases[] = {
        {0.8 * fc, Oscillation::damped}, {fc, Oscillation::sustained}, {1.5 * fc, Oscillation::growing}};
    for (const auto& [bw, expected] : cases) {
        EXPECT_EQ(classify_trace(simulate(params_at(bw), SimConfig{}), 0.2).kind, expected) << "pll_bw " << bw;
    }
}

TEST(Simulate, OscillationFrequencyMatchesIop) {
    const double fc = critical_pll_bw();
    const SimTrace tr = simulate(params_at(fc), SimConfig{});
    const SequenceSpectrum s = sequence_spectrum(tr, 0.5);
    const StabilityVerdict v = ap_verdict(build_model(params_at(fc)));
    ASSERT_TRUE(v.iop_hz.has_value());
    EXPECT_NEAR(s.osc_freq, *v.iop_hz, 0.1 * *v.iop_hz);
    EXPECT_GT(s.f_u, 0.0);
}

// ---------------------------------------------------------------------------
// classification of synthetic traces

TEST(ClassifyTrace, DecayingRingIsDamped) {
    const TraceClass c = classify_trace(ringing(-5.0), 0.2);
    EXPECT_EQ(c.kind, Oscillation::damped);
    EXPECT_NEAR(c.sigma, -5.0, 0.25);
}

TEST(ClassifyTrace, ConstantRingIsSustained) {
    const TraceClass c = classify_trace(ringing(0.0), 0.2);
    EXPECT_EQ(c.kind, Oscillation::sustained);
    EXPECT_NEAR(c.sigma, 0.0, 0.05);
}

TEST(ClassifyTrace, GrowingRingIsGrowing) {
    const TraceClass c = classify_trace(ringing(3.0), 0.2);
    EXPECT_EQ(c.kind, Oscillation::growing);
    EXPECT_NEAR(c.sigma, 3.0, 0.15);
}

TEST(ClassifyTrace, FlatTraceIsQuiet) {
    const TraceClass c = classify_trace(synthetic([](double) { return cplx{0.5, 0.0}; }), 0.2);
    EXPECT_TRUE(c.quiet);
    EXPECT_EQ(c.kind, Oscillation::damped);
}

TEST(ClassifyTrace, TrippedRunIsGrowing) {
    SimTrace tr = ringing(2.0);
    tr.tripped = true;
    tr.trip_time = 2.0;
    EXPECT_EQ(classify_trace(tr, 0.2).kind, Oscillation::growing);
}

TEST(ClassifyTrace, ShortTraceIsRejected) {
    EXPECT_THROW((void)classify_trace(ringing(0.0), 1.0), ParameterError);
    EXPECT_THROW((void)classify_trace(ringing(0.0), 0.0), ParameterError);
}

// ---------------------------------------------------------------------------
// sequence spectrum

TEST(SequenceSpectrum, PositiveSequenceOnlyHasNoUnbalance) {
    // stationary current I0 e^{j w1 t} + a e^{j (w1 + wo) t}
    const SimTrace tr = synthetic([](double t) {
        return cplx{0.5, 0.0} + (t < 0.5 ? cplx{} : 0.01 * std::exp(kJ * (numeric::kTwoPi * 23.0 * t)));
    });
    const SequenceSpectrum s = sequence_spectrum(tr, 1.0);
    EXPECT_NEAR(s.osc_freq, 23.0, 1e-3);
    EXPECT_NEAR(s.i_p_mag, 0.01, 1e-4);
    EXPECT_LT(s.f_u, 1e-3);
}

TEST(SequenceSpectrum, MixedSequenceRecoversRatio) {
    const SimTrace tr = synthetic([](double t) {
        if (t < 0.5) return cplx{0.5, 0.0};
        const double w = numeric::kTwoPi * 17.0;
        return cplx{0.5, 0.0} + 0.02 * std::exp(kJ * (w * t)) + 0.006 * std::exp(-kJ * (w * t + 0.4));
    });
    const SequenceSpectrum s = sequence_spectrum(tr, 1.0);
    EXPECT_NEAR(s.osc_freq, 17.0, 1e-3);
    EXPECT_NEAR(s.f_u, 0.3, 3e-3);
}

TEST(SequenceSpectrum, GrowingEnvelopeIsCompensated) {
    const SimTrace tr = synthetic([](double t) {
        if (t < 0.5) return cplx{0.5, 0.0};
        const double w = numeric::kTwoPi * 25.0;
        const double env = std::exp(2.0 * (t - 0.5));
        return cplx{0.5, 0.0} + env * (0.01 * std::exp(kJ * (w * t)) + 0.005 * std::exp(-kJ * (w * t)));
    });
    const SequenceSpectrum s = sequence_spectrum(tr, 1.0);
    EXPECT_NEAR(s.f_u, 0.5, 0.02);
}

TEST(SequenceSpectrum, QuietTraceIsRejected) {
    const SimTrace tr = synthetic([](double) { return cplx{0.5, 0.0}; });
    EXPECT_THROW((void)sequence_spectrum(tr, 1.0), WindowQualityError);
}

TEST(SequenceSpectrum, UnbalanceRisesWithPllBandwidth) {
    const double fc = critical_pll_bw();
    const SequenceSpectrum lo = sequence_spectrum(simulate(params_at(fc), SimConfig{}), 0.5);
    const SequenceSpectrum hi = sequence_spectrum(simulate(params_at(2.3 * fc), SimConfig{}), 0.5);
    EXPECT_GT(hi.f_u, lo.f_u);
}

TEST(SequenceSpectrum, UnbalanceMatchesClosedLoopMode) {
    // closed-loop pole near the IOP by Newton on det(Z_source + Z_conv); the
    // null vector of the 2x2 impedance gives the sequence current ratio
    const double fc = critical_pll_bw();
    const SequenceModel m = build_model(params_at(fc));
    auto z = [&m](cplx s) {
        const FreqMatrix2 a = source_matrix(m, s), b = converter_matrix(m, s);
        return std::array<cplx, 4>{a(0, 0) + b(0, 0), a(0, 1) + b(0, 1), a(1, 0) + b(1, 0), a(1, 1) + b(1, 1)};
    };
    auto det = [&z](cplx s) {
        const auto k = z(s);
        return k[0] * k[3] - k[1] * k[2];
    };
    cplx s = kJ * (numeric::kTwoPi * *ap_verdict(m).iop_hz);
    for (int it = 0; it < 50; ++it) {
        const cplx h = 1e-6 * (1.0 + std::abs(s));
        s -= det(s) * (2.0 * h) / (det(s + h) - det(s - h));
    }
    ASSERT_LT(std::abs(s.real()), 1e-2);
    const auto k = z(s);
    const double ratio = std::abs(k[0]) / std::abs(k[1]);

    const SequenceSpectrum sp = sequence_spectrum(simulate(params_at(fc), SimConfig{}), 0.5);
    EXPECT_NEAR(sp.osc_freq, s.imag() / numeric::kTwoPi, 0.02 * s.imag() / numeric::kTwoPi);
    EXPECT_NEAR(sp.f_u, ratio, 0.15 * ratio);
    RecordProperty("f_u_sim", csv_num(sp.f_u));
    RecordProperty("f_u_mode", csv_num(ratio));
}

TEST(TraceCsv, HeaderAndFormatting) {
    SimTrace tr = synthetic([](double) { return cplx{0.5, -0.125}; }, 0.001);
    std::ostringstream os;
    write_trace_csv(os, tr);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,i_d,i_q,theta_pll,u_g_mag");
    std::getline(in, line);
    EXPECT_EQ(line, "0,0.5,-0.125,0,1");
}
