#pragma once

// INI-style run configuration.
//
//   [base]       s_base, v_base, f_base
//   [circuit]    r_filter, l_filter, r_t, l_t, r_s, and exactly one of l_s / scr
//   [control]    cc_bw, pll_bw (+ pll_damping, cc_zero_ratio)
//                or explicit kp_cc, ki_cc, kp_pll, ki_pll
//   [operating]  i_ref_d, i_ref_q, u_s
//   [analysis]   f_min, f_max, n_points, marginal_eps, methods
//   [sweep]      param, values | (start, stop, count, spacing), critical, critical_lo, critical_hi
//   [sim]        dt, t_end, perturb_time, perturb_kind, perturb_size, record_decimation,
//                window, spectrum_window, spectrum_skip, tol
//
// Lines are `key = value`; `#` and `;` start comments. Unknown sections and
// keys, duplicates and malformed numbers are errors carrying the line number.

#include "vscstab/error.hpp"
#include "vscstab/model.hpp"
#include "vscstab/numeric.hpp"
#include "vscstab/sim.hpp"
#include "vscstab/stability.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace vscstab {

struct SweepSpec {
    SweepParam param = SweepParam::pll_bw;
    std::vector<double> values;
    bool critical = false;
    double critical_lo = 2.0;
    double critical_hi = 40.0;
};

struct SimSettings {
    SimConfig config;
    double window = 0.2;           ///< classification window, s
    double spectrum_window = 0.5;  ///< s
    double spectrum_skip = 0.2;    ///< s after the perturbation
    double tol = 0.5;              ///< 1/s
};

struct RunConfig {
    SweepBase base;
    std::vector<Method> methods{Method::ap, Method::gnc, Method::gasin};
    std::optional<SweepSpec> sweep;
    SimSettings sim;

    [[nodiscard]] const SystemParams& system() const noexcept { return base.system; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct IniEntry {
    std::string value;
    int line;
};

using IniSection = std::map<std::string, IniEntry>;

struct Ini {
    std::map<std::string, IniSection> sections;
    std::map<std::string, int> section_lines;
};

inline const std::map<std::string, std::set<std::string>>& ini_schema() {
    static const std::map<std::string, std::set<std::string>> schema{
        {"base", {"s_base", "v_base", "f_base"}},
        {"circuit", {"r_filter", "l_filter", "r_t", "l_t", "r_s", "l_s", "scr"}},
        {"control", {"cc_bw", "pll_bw", "pll_damping", "cc_zero_ratio", "kp_cc", "ki_cc", "kp_pll", "ki_pll"}},
        {"operating", {"i_ref_d", "i_ref_q", "u_s"}},
        {"analysis", {"f_min", "f_max", "n_points", "marginal_eps", "methods"}},
        {"sweep", {"param", "values", "start", "stop", "count", "spacing", "critical", "critical_lo", "critical_hi"}},
        {"sim",
         {"dt", "t_end", "perturb_time", "perturb_kind", "perturb_size", "record_decimation", "window",
          "spectrum_window", "spectrum_skip", "tol"}},
    };
    return schema;
}

inline Ini parse_ini(std::istream& in) {
    Ini ini;
    std::string line;
    std::string section;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find_first_of("#;");
        const std::string text = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError(text, n, "malformed section header at line " + std::to_string(n));
            section = trim(text.substr(1, text.size() - 2));
            if (!ini_schema().count(section)) {
                throw ConfigError(section, n, "unknown section [" + section + "] at line " + std::to_string(n));
            }
            if (ini.section_lines.count(section)) {
                throw ConfigError(section, n, "duplicate section [" + section + "] at line " + std::to_string(n));
            }
            ini.section_lines[section] = n;
            ini.sections[section];
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError(text, n, "expected key = value at line " + std::to_string(n));
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (section.empty()) throw ConfigError(key, n, "key '" + key + "' outside any section at line " + std::to_string(n));
        if (!ini_schema().at(section).count(key)) {
            throw ConfigError(key, n, "unknown key '" + key + "' in [" + section + "] at line " + std::to_string(n));
        }
        auto& sec = ini.sections[section];
        if (sec.count(key)) throw ConfigError(key, n, "duplicate key '" + key + "' at line " + std::to_string(n));
        sec[key] = {value, n};
    }
    return ini;
}

class SectionReader {
public:
    SectionReader(const Ini& ini, const std::string& name) : name_(name) {
        const auto it = ini.sections.find(name);
        if (it != ini.sections.end()) sec_ = &it->second;
    }

    [[nodiscard]] bool present() const noexcept { return sec_ != nullptr; }
    [[nodiscard]] bool has(const std::string& key) const { return sec_ && sec_->count(key); }
    [[nodiscard]] int line(const std::string& key) const { return has(key) ? sec_->at(key).line : 0; }

    [[nodiscard]] std::optional<std::string> text(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return sec_->at(key).value;
    }

    [[nodiscard]] std::optional<double> number(const std::string& key) const {
        const auto t = text(key);
        if (!t) return std::nullopt;
        return to_number(key, *t);
    }

    void read(const std::string& key, double& out) const {
        if (auto v = number(key)) out = *v;
    }

    [[nodiscard]] std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        const auto t = text(key);
        if (!t) return out;
        std::stringstream ss(*t);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(to_number(key, trim(item)));
        return out;
    }

    [[nodiscard]] bool flag(const std::string& key, bool def) const {
        const auto t = text(key);
        if (!t) return def;
        if (*t == "true" || *t == "yes" || *t == "1") return true;
        if (*t == "false" || *t == "no" || *t == "0") return false;
        throw error(key, "expected a boolean for '" + key + "'");
    }

    [[nodiscard]] ConfigError error(const std::string& key, const std::string& what) const {
        const int l = line(key);
        return ConfigError(key, l, "[" + name_ + "] " + what + (l ? " at line " + std::to_string(l) : std::string{}));
    }

private:
    [[nodiscard]] double to_number(const std::string& key, const std::string& t) const {
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
            throw error(key, "malformed number '" + t + "' for '" + key + "'");
        }
        return v;
    }

    std::string name_;
    const IniSection* sec_ = nullptr;
};

inline std::vector<Method> parse_methods(const std::string& s) {
    if (s == "all") return {Method::ap, Method::gnc, Method::gasin, Method::sim};
    std::vector<Method> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item == "ap") out.push_back(Method::ap);
        else if (item == "gnc") out.push_back(Method::gnc);
        else if (item == "gasin") out.push_back(Method::gasin);
        else if (item == "sim") out.push_back(Method::sim);
        else throw ParameterError("unknown method '" + item + "' (ap|gnc|gasin|sim|all)");
    }
    if (out.empty()) throw ParameterError("empty method list");
    return out;
}

inline PerturbKind parse_perturb_kind(const std::string& s) {
    if (s == "grid_voltage_step") return PerturbKind::grid_voltage_step;
    if (s == "current_ref_step") return PerturbKind::current_ref_step;
    if (s == "none") return PerturbKind::none;
    throw ParameterError("unknown perturb_kind '" + s + "' (grid_voltage_step|current_ref_step|none)");
}

/// Wraps a validation failure into a config error tied to `key`.
template <class F>
void checked(const SectionReader& r, const std::string& key, F&& f) {
    try {
        f();
    } catch (const ParameterError& e) {
        throw r.error(key, e.what());
    }
}

}  // namespace detail

[[nodiscard]] inline RunConfig parse_config(std::istream& in) {
    const detail::Ini ini = detail::parse_ini(in);
    RunConfig cfg;
    SystemParams& sys = cfg.base.system;

    const detail::SectionReader base(ini, "base");
    base.read("s_base", sys.base.s_base);
    base.read("v_base", sys.base.v_base);
    base.read("f_base", sys.base.f_base);
    detail::checked(base, "f_base", [&] { sys.base.validate(); });

    const detail::SectionReader circuit(ini, "circuit");
    if (!circuit.present()) throw ConfigError("circuit", 0, "missing section [circuit]");
    circuit.read("r_filter", sys.circuit.r_filter);
    circuit.read("l_filter", sys.circuit.l_filter);
    circuit.read("r_t", sys.circuit.r_t);
    circuit.read("l_t", sys.circuit.l_t);
    circuit.read("r_s", sys.circuit.r_s);
    if (circuit.has("l_s") && circuit.has("scr")) {
        throw circuit.error("scr", "both 'l_s' and 'scr' given; set exactly one");
    }
    if (!circuit.has("l_s") && !circuit.has("scr")) {
        throw ConfigError("l_s", 0, "[circuit] one of 'l_s' or 'scr' is required");
    }
    if (auto scr = circuit.number("scr")) {
        if (!(*scr > 0.0)) throw circuit.error("scr", "'scr' must be > 0");
        sys.circuit.l_s = 1.0 / *scr;
    }
    circuit.read("l_s", sys.circuit.l_s);
    detail::checked(circuit, circuit.has("l_s") ? "l_s" : "scr", [&] { sys.circuit.validate(); });

    const detail::SectionReader op(ini, "operating");
    double id = sys.i_ref.real(), iq = sys.i_ref.imag(), us = 1.0;
    op.read("i_ref_d", id);
    op.read("i_ref_q", iq);
    op.read("u_s", us);
    sys.i_ref = {id, iq};
    if (!(us > 0.0)) throw op.error("u_s", "'u_s' must be > 0");

    const detail::SectionReader control(ini, "control");
    const bool any_bw = control.has("cc_bw") || control.has("pll_bw");
    const std::vector<std::string> gain_keys{"kp_cc", "ki_cc", "kp_pll", "ki_pll"};
    const bool any_gain = std::any_of(gain_keys.begin(), gain_keys.end(), [&](const auto& k) { return control.has(k); });
    if (any_bw && any_gain) {
        throw control.error(control.has("kp_cc") ? "kp_cc" : "ki_cc", "bandwidth targets and explicit gains are mutually exclusive");
    }
    if (any_gain) {
        for (const auto& k : gain_keys) {
            if (!control.has(k)) throw ConfigError(k, 0, "[control] explicit gains need all of kp_cc, ki_cc, kp_pll, ki_pll; missing '" + k + "'");
        }
        if (control.has("pll_damping") || control.has("cc_zero_ratio")) {
            throw control.error(control.has("pll_damping") ? "pll_damping" : "cc_zero_ratio",
                                "design parameters given together with explicit gains");
        }
        ControllerParams c;
        control.read("kp_cc", c.kp_cc);
        control.read("ki_cc", c.ki_cc);
        control.read("kp_pll", c.kp_pll);
        control.read("ki_pll", c.ki_pll);
        c.u_s_mag = us;
        detail::checked(control, "kp_cc", [&] { c.validate(); });
        sys.control = c;
        cfg.base.redesign = false;
    } else {
        if (!control.has("cc_bw") || !control.has("pll_bw")) {
            throw ConfigError(control.has("cc_bw") ? "pll_bw" : "cc_bw", 0,
                              "[control] required keys: cc_bw and pll_bw (optional pll_damping, cc_zero_ratio), "
                              "or kp_cc, ki_cc, kp_pll, ki_pll");
        }
        GainTargets& t = cfg.base.targets;
        control.read("cc_bw", t.cc_bw);
        control.read("pll_bw", t.pll_bw);
        control.read("pll_damping", t.pll_damping);
        control.read("cc_zero_ratio", t.cc_zero_ratio);
        detail::checked(control, "pll_bw", [&] { sys.control = design_gains(t, us); });
    }

    const detail::SectionReader analysis(ini, "analysis");
    AnalysisSettings& a = cfg.base.analysis;
    analysis.read("f_min", a.f_min);
    analysis.read("f_max", a.f_max);
    if (auto n = analysis.number("n_points")) {
        if (!(*n >= 16) || *n != std::floor(*n)) throw analysis.error("n_points", "'n_points' must be an integer >= 16");
        a.n_points = static_cast<std::size_t>(*n);
    }
    analysis.read("marginal_eps", a.marginal_eps);
    detail::checked(analysis, "f_min", [&] { a.validate(); });
    if (auto m = analysis.text("methods")) {
        detail::checked(analysis, "methods", [&] { cfg.methods = detail::parse_methods(*m); });
    }

    const detail::SectionReader sweep(ini, "sweep");
    if (sweep.present()) {
        SweepSpec s;
        if (!sweep.has("param")) throw ConfigError("param", 0, "[sweep] missing 'param'");
        detail::checked(sweep, "param", [&] { s.param = parse_sweep_param(*sweep.text("param")); });
        const bool range = sweep.has("start") || sweep.has("stop") || sweep.has("count");
        if (sweep.has("values") && range) throw sweep.error("values", "'values' and start/stop/count are mutually exclusive");
        if (sweep.has("values")) {
            s.values = sweep.list("values");
        } else if (range) {
            for (const char* k : {"start", "stop", "count"}) {
                if (!sweep.has(k)) throw ConfigError(k, 0, std::string("[sweep] range needs start, stop and count; missing '") + k + "'");
            }
            const double a0 = *sweep.number("start"), a1 = *sweep.number("stop"), cnt = *sweep.number("count");
            if (!(cnt >= 2) || cnt != std::floor(cnt)) throw sweep.error("count", "'count' must be an integer >= 2");
            const std::string spacing = sweep.text("spacing").value_or("lin");
            if (spacing == "log") {
                if (!(a0 > 0.0) || !(a1 > 0.0)) throw sweep.error("start", "log spacing needs positive start and stop");
                s.values = numeric::logspace(a0, a1, static_cast<std::size_t>(cnt));
            } else if (spacing == "lin") {
                s.values = numeric::linspace(a0, a1, static_cast<std::size_t>(cnt));
            } else {
                throw sweep.error("spacing", "'spacing' must be lin or log");
            }
        }
        s.critical = sweep.flag("critical", false);
        sweep.read("critical_lo", s.critical_lo);
        sweep.read("critical_hi", s.critical_hi);
        if (s.values.empty() && !s.critical) throw ConfigError("values", 0, "[sweep] needs values, a start/stop/count range, or critical = true");
        if (s.critical && !(s.critical_lo > 0.0 && s.critical_hi > s.critical_lo)) {
            throw sweep.error("critical_lo", "critical bracket needs 0 < critical_lo < critical_hi");
        }
        if (!cfg.base.redesign && (s.param == SweepParam::pll_bw || s.param == SweepParam::cc_bw)) {
            throw sweep.error("param", "bandwidth sweeps need bandwidth targets in [control], not explicit gains");
        }
        cfg.sweep = s;
    }

    const detail::SectionReader sim(ini, "sim");
    SimSettings& ss = cfg.sim;
    sim.read("dt", ss.config.dt);
    sim.read("t_end", ss.config.t_end);
    sim.read("perturb_time", ss.config.perturb_time);
    sim.read("perturb_size", ss.config.perturb_size);
    if (auto k = sim.text("perturb_kind")) {
        detail::checked(sim, "perturb_kind", [&] { ss.config.perturb_kind = detail::parse_perturb_kind(*k); });
    }
    if (auto d = sim.number("record_decimation")) {
        if (!(*d >= 1) || *d != std::floor(*d)) throw sim.error("record_decimation", "'record_decimation' must be an integer >= 1");
        ss.config.record_decimation = static_cast<std::size_t>(*d);
    }
    sim.read("window", ss.window);
    sim.read("spectrum_window", ss.spectrum_window);
    sim.read("spectrum_skip", ss.spectrum_skip);
    sim.read("tol", ss.tol);
    detail::checked(sim, "dt", [&] { ss.config.validate(); });
    if (!(ss.window > 0.0) || !(ss.spectrum_window > 0.0) || !(ss.spectrum_skip >= 0.0) || !(ss.tol > 0.0)) {
        throw sim.error("window", "window, spectrum_window, tol must be > 0 and spectrum_skip >= 0");
    }

    // the operating point must exist for every analysis
    try {
        (void)solve_operating_point(sys);
    } catch (const InfeasibleOperatingPoint& e) {
        throw ConfigError("i_ref_d", op.line("i_ref_d"), e.what());
    }
    return cfg;
}

[[nodiscard]] inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot read config file '" + path + "'");
    return parse_config(in);
}

}  // namespace vscstab
