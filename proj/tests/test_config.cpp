#include "vscstab/config.hpp"
#include "vscstab/report.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace vscstab;

namespace {

const char* kMinimal = R"(
[circuit]
scr = 3

[control]
cc_bw = 200
pll_bw = 13
)";

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

/// Parses `text` expecting a ConfigError and returns it.
ConfigError config_error(const std::string& text) {
    try {
        (void)parse(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "expected ConfigError for:\n" << text;
    return ConfigError("", 0, "");
}

}  // namespace

TEST(Config, ShippedBaseCaseParses) {
    const RunConfig cfg = parse_config(std::string(VSCSTAB_CONFIG_DIR) + "/table1.ini");
    EXPECT_NEAR(cfg.system().circuit.l_s, 1.0 / 3.0, 1e-15);
    EXPECT_EQ(cfg.system().i_ref, cplx(0.5, 0.0));
    EXPECT_TRUE(cfg.base.redesign);
    ASSERT_TRUE(cfg.sweep.has_value());
    EXPECT_EQ(cfg.sweep->param, SweepParam::pll_bw);
    EXPECT_TRUE(cfg.sweep->critical);
}

TEST(Config, ScrSetsGridInductance) {
    EXPECT_NEAR(parse(kMinimal).system().circuit.l_s, 0.333333333333, 1e-12);
}

TEST(Config, DefaultsApplied) {
    const RunConfig cfg = parse(kMinimal);
    const SystemParams& p = cfg.system();
    EXPECT_EQ(p.base.f_base, 50.0);
    EXPECT_EQ(p.circuit.l_filter, 0.1);
    EXPECT_EQ(p.circuit.l_t, 0.1);
    EXPECT_EQ(p.circuit.r_total(), 0.0);
    EXPECT_EQ(cfg.base.targets.pll_damping, 0.5);
    EXPECT_EQ(cfg.base.analysis.f_min, 0.1);
    EXPECT_EQ(cfg.base.analysis.f_max, 1000.0);
    EXPECT_EQ(cfg.base.analysis.n_points, 2000u);
    EXPECT_EQ(cfg.methods.size(), 3u);
    EXPECT_FALSE(cfg.sweep.has_value());
    EXPECT_EQ(p.control.kp_pll, design_gains(200.0, 13.0, 0.5).kp_pll);
}

TEST(Config, EmptyControlListsRequiredKeys) {
    const ConfigError e = config_error("[circuit]\nscr = 3\n[control]\n");
    const std::string what = e.what();
    for (const char* key : {"cc_bw", "pll_bw", "kp_cc", "ki_cc", "kp_pll", "ki_pll"}) {
        EXPECT_NE(what.find(key), std::string::npos) << key << " missing from: " << what;
    }
}

TEST(Config, BothGridInductanceAndScrContradict) {
    const ConfigError e = config_error("[circuit]\nl_s = 0.3\nscr = 3\n[control]\ncc_bw = 200\npll_bw = 13\n");
    EXPECT_EQ(e.key(), "scr");
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("l_s"), std::string::npos);
}

TEST(Config, NeitherGridInductanceNorScr) {
    EXPECT_EQ(config_error("[circuit]\nl_t = 0.1\n[control]\ncc_bw = 200\npll_bw = 13\n").key(), "l_s");
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
    const ConfigError e = config_error(std::string(kMinimal) + "gain = 4\n");
    EXPECT_EQ(e.key(), "gain");
    EXPECT_EQ(e.line(), 8);
}

TEST(Config, UnknownSectionRejected) {
    EXPECT_EQ(config_error("[plant]\nscr = 3\n").line(), 1);
}

TEST(Config, DuplicateKeyRejected) {
    EXPECT_EQ(config_error("[circuit]\nscr = 3\nscr = 2\n").line(), 3);
}

TEST(Config, MalformedNumberRejected) {
    const ConfigError e = config_error("[circuit]\nscr = three\n[control]\ncc_bw = 200\npll_bw = 13\n");
    EXPECT_EQ(e.key(), "scr");
    EXPECT_EQ(e.line(), 2);
}

TEST(Config, CommentsAndWhitespaceIgnored) {
    const RunConfig cfg = parse("# header\n [circuit] \n  scr=2   ; inline\n\n[control]\ncc_bw = 200 # x\npll_bw = 5\n");
    EXPECT_DOUBLE_EQ(cfg.system().circuit.l_s, 0.5);
}

TEST(Config, ExplicitGainsDisableRedesign) {
    const RunConfig cfg =
        parse("[circuit]\nscr = 3\n[control]\nkp_cc = 300\nki_cc = 1e5\nkp_pll = 50\nki_pll = 1500\n");
    EXPECT_FALSE(cfg.base.redesign);
    EXPECT_EQ(cfg.system().control.kp_cc, 300.0);
    EXPECT_EQ(cfg.system().control.ki_pll, 1500.0);
}

TEST(Config, PartialExplicitGainsRejected) {
    EXPECT_EQ(config_error("[circuit]\nscr = 3\n[control]\nkp_cc = 300\nki_cc = 1e5\n").key(), "kp_pll");
}

TEST(Config, BandwidthsAndGainsAreExclusive) {
    (void)config_error("[circuit]\nscr = 3\n[control]\ncc_bw = 200\npll_bw = 13\nkp_cc = 1\n");
}

TEST(Config, BandwidthSweepNeedsTargets) {
    const std::string text =
        "[circuit]\nscr = 3\n[control]\nkp_cc = 300\nki_cc = 1e5\nkp_pll = 50\nki_pll = 1500\n"
        "[sweep]\nparam = pll_bw\nvalues = 5, 10\n";
    EXPECT_EQ(config_error(text).key(), "param");
}

TEST(Config, SweepValuesAndRanges) {
    RunConfig cfg = parse(std::string(kMinimal) + "[sweep]\nparam = scr\nvalues = 5, 3, 2\n");
    ASSERT_TRUE(cfg.sweep);
    EXPECT_EQ(cfg.sweep->param, SweepParam::scr);
    EXPECT_EQ(cfg.sweep->values, (std::vector<double>{5, 3, 2}));

    cfg = parse(std::string(kMinimal) + "[sweep]\nparam = pll_bw\nstart = 2\nstop = 80\ncount = 5\nspacing = log\n");
    ASSERT_EQ(cfg.sweep->values.size(), 5u);
    EXPECT_DOUBLE_EQ(cfg.sweep->values.front(), 2.0);
    EXPECT_DOUBLE_EQ(cfg.sweep->values.back(), 80.0);
    EXPECT_NEAR(cfg.sweep->values[1] / cfg.sweep->values[0], cfg.sweep->values[4] / cfg.sweep->values[3], 1e-12);

    (void)config_error(std::string(kMinimal) + "[sweep]\nparam = pll_bw\n");
    (void)config_error(std::string(kMinimal) + "[sweep]\nparam = gain\nvalues = 1\n");
    (void)config_error(std::string(kMinimal) + "[sweep]\nparam = scr\nvalues = 1\nstart = 1\n");
}

TEST(Config, MethodsAndOverrides) {
    RunConfig cfg = parse(std::string(kMinimal) + "[analysis]\nmethods = gnc, sim\nf_max = 500\n");
    EXPECT_EQ(cfg.methods, (std::vector<Method>{Method::gnc, Method::sim}));
    EXPECT_EQ(cfg.base.analysis.f_max, 500.0);
    cfg = parse(std::string(kMinimal) + "[analysis]\nmethods = all\n");
    EXPECT_EQ(cfg.methods.size(), 4u);
    EXPECT_EQ(config_error(std::string(kMinimal) + "[analysis]\nmethods = bode\n").key(), "methods");
    (void)config_error(std::string(kMinimal) + "[analysis]\nf_min = 10\nf_max = 1\n");
}

TEST(Config, SimSection) {
    const RunConfig cfg = parse(std::string(kMinimal) +
                                "[sim]\ndt = 1e-5\nt_end = 2\nperturb_kind = current_ref_step\nrecord_decimation = 8\n");
    EXPECT_EQ(cfg.sim.config.dt, 1e-5);
    EXPECT_EQ(cfg.sim.config.perturb_kind, PerturbKind::current_ref_step);
    EXPECT_EQ(cfg.sim.config.record_decimation, 8u);
    (void)config_error(std::string(kMinimal) + "[sim]\nperturb_kind = impulse\n");
    (void)config_error(std::string(kMinimal) + "[sim]\nrecord_decimation = 1.5\n");
    (void)config_error(std::string(kMinimal) + "[sim]\ndt = -1\n");
}

TEST(Config, InfeasibleOperatingPointIsAConfigError) {
    EXPECT_EQ(config_error(std::string(kMinimal) + "[operating]\ni_ref_d = 5\n").key(), "i_ref_d");
}

TEST(Config, MissingFile) {
    EXPECT_THROW((void)parse_config(std::string("/nonexistent/run.ini")), ConfigError);
}

// ---------------------------------------------------------------------------
// CSV formatting

TEST(Report, NumbersUseTwelveDigitsAndEmptyNan) {
    EXPECT_EQ(csv_num(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(csv_num(1e-20), "1e-20");
    EXPECT_EQ(csv_num(std::numeric_limits<double>::quiet_NaN()), "");
    EXPECT_EQ(csv_num(std::optional<double>{}), "");
}

TEST(Report, VerdictRow) {
    StabilityVerdict v;
    v.method = Method::gnc;
    v.stable = Stability::unstable;
    v.winding_p = -1;
    v.winding_n = -1;
    v.iop_hz = 45.5;
    v.damping = -0.25;
    std::ostringstream os;
    write_verdict_header(os);
    write_verdict_row(os, "pll_bw", 50.0, v);
    EXPECT_EQ(os.str(),
              "param,value,method,stable,winding_p,winding_n,iop_hz,damping_pu\n"
              "pll_bw,50,GNC,unstable,-1,-1,45.5,-0.25\n");
}

TEST(Report, AgreementRow) {
    StabilityVerdict a, b;
    a.stable = b.stable = Stability::stable;
    std::ostringstream os;
    write_agreement_row(os, "pll_bw", 5.0, {a, b});
    EXPECT_EQ(os.str(), "pll_bw,5,stable,stable,true\n");
    b.stable = Stability::marginal;
    os.str("");
    write_agreement_row(os, "pll_bw", 5.0, {a, b});
    EXPECT_EQ(os.str(), "pll_bw,5,stable,marginal,false\n");
}

TEST(Report, SpectrumRowOmittedWhenMissing) {
    std::ostringstream os;
    write_spectrum_csv(os, std::nullopt);
    EXPECT_EQ(os.str(), "osc_freq_hz,i_p_pu,i_n_pu,f_u\n");
}
