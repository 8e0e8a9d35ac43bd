// Command-line front end: reads an INI configuration, runs one analysis and
// writes CSV artifacts into the output directory.
//
//   vscstab_cli <impedance|locus|verdict|sweep|simulate|compare> --config run.ini [--out dir]
//               [--fmin Hz] [--fmax Hz] [--npoints n] [--method ap|gnc|gasin|sim|all]
//
// Exit status: 0 success, 2 configuration error, 3 numerical error,
// 4 inconclusive verdict. Errors are reported on stderr as one line:
//   error kind=<kind> message="<text>"

#include "vscstab/config.hpp"
#include "vscstab/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace vscstab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInconclusive = 4;

struct Options {
    std::string config;
    std::string out = ".";
    std::optional<double> fmin, fmax;
    std::optional<std::size_t> npoints;
    std::optional<std::string> method;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

int report_error(const std::string& kind, const std::string& what, int code) {
    std::cerr << "error kind=" << kind << " message=\"" << escape(what) << "\"\n";
    return code;
}

std::ofstream open_out(const Options& o, const std::string& name) {
    const fs::path p = fs::path(o.out) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write '" + p.string() + "'");
    return f;
}

RunConfig load(const Options& o) {
    RunConfig cfg = parse_config(o.config);
    AnalysisSettings& a = cfg.base.analysis;
    if (o.fmin) a.f_min = *o.fmin;
    if (o.fmax) a.f_max = *o.fmax;
    if (o.npoints) a.n_points = *o.npoints;
    try {
        a.validate();
    } catch (const ParameterError& e) {
        throw ConfigError("fmin", 0, std::string("command-line override: ") + e.what());
    }
    if (o.method) {
        try {
            cfg.methods = detail::parse_methods(*o.method);
        } catch (const ParameterError& e) {
            throw ConfigError("method", 0, e.what());
        }
    }
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw IoError("cannot create output directory '" + o.out + "': " + ec.message());
    return cfg;
}

/// Label of a single-point run in verdict tables.
std::pair<std::string, double> point_label(const RunConfig& cfg) {
    if (cfg.base.redesign) return {"pll_bw", cfg.base.targets.pll_bw};
    return {"config", std::numeric_limits<double>::quiet_NaN()};
}

std::vector<StabilityVerdict> run_methods(const SystemParams& sp, const RunConfig& cfg) {
    std::vector<StabilityVerdict> out;
    std::optional<SequenceModel> m;
    for (Method method : cfg.methods) {
        if (method == Method::sim) {
            out.push_back(run_simulation(sp, cfg.sim).verdict);
            continue;
        }
        if (!m) m = build_model(sp);
        out.push_back(verdict(method, *m, cfg.base.analysis));
    }
    return out;
}

bool any_inconclusive(const std::vector<StabilityVerdict>& v) {
    for (const auto& x : v)
        if (x.stable == Stability::inconclusive) return true;
    return false;
}

void print_verdicts(const std::string& param, double value, const std::vector<StabilityVerdict>& vs) {
    for (const auto& v : vs) {
        std::cout << param << '=' << csv_num(value) << ' ' << to_string(v.method) << ' ' << to_string(v.stable)
                  << " iop_hz=" << csv_num(v.iop_hz) << " damping=" << csv_num(v.damping) << " (" << v.detail << ")\n";
    }
}

int cmd_impedance(const Options& o) {
    const RunConfig cfg = load(o);
    auto f = open_out(o, "impedance.csv");
    write_impedance_csv(f, build_model(cfg.system()), cfg.base.analysis);
    std::cout << "wrote " << (fs::path(o.out) / "impedance.csv").string() << '\n';
    return 0;
}

int cmd_locus(const Options& o) {
    const RunConfig cfg = load(o);
    auto f = open_out(o, "loci.csv");
    write_loci_csv(f, build_model(cfg.system()), cfg.base.analysis);
    std::cout << "wrote " << (fs::path(o.out) / "loci.csv").string() << '\n';
    return 0;
}

int cmd_verdict(const Options& o) {
    const RunConfig cfg = load(o);
    const auto [param, value] = point_label(cfg);
    const auto vs = run_methods(cfg.system(), cfg);
    auto f = open_out(o, "verdict.csv");
    write_verdict_header(f);
    for (const auto& v : vs) write_verdict_row(f, param, value, v);
    print_verdicts(param, value, vs);
    return any_inconclusive(vs) ? kExitInconclusive : 0;
}

int cmd_sweep(const Options& o) {
    const RunConfig cfg = load(o);
    if (!cfg.sweep) throw ConfigError("sweep", 0, "the sweep subcommand needs a [sweep] section");
    const SweepSpec& s = *cfg.sweep;
    bool inconclusive = false;

    if (!s.values.empty()) {
        std::vector<Method> fd;
        bool with_sim = false;
        for (Method m : cfg.methods) {
            if (m == Method::sim) {
                with_sim = true;
            } else {
                fd.push_back(m);
            }
        }
        std::vector<SweepRow> rows = sweep(cfg.base, s.param, s.values, fd);
        if (with_sim) {
            std::vector<std::future<StabilityVerdict>> jobs;
            for (double x : s.values) {
                jobs.push_back(std::async(std::launch::async, [&cfg, &s, x] {
                    return run_simulation(apply_sweep_value(cfg.base, s.param, x), cfg.sim).verdict;
                }));
            }
            for (std::size_t k = 0; k < rows.size(); ++k) rows[k].verdicts.push_back(jobs[k].get());
        }
        auto f = open_out(o, "sweep.csv");
        write_verdict_header(f);
        for (const auto& row : rows) {
            for (const auto& v : row.verdicts) write_verdict_row(f, to_string(s.param), row.value, v);
            print_verdicts(to_string(s.param), row.value, row.verdicts);
            inconclusive = inconclusive || any_inconclusive(row.verdicts);
        }
    }
    if (s.critical) {
        const CriticalResult c = critical(cfg.base, s.param, s.critical_lo, s.critical_hi);
        auto f = open_out(o, "critical.csv");
        write_critical_csv(f, s.param, c);
        std::cout << "critical " << to_string(s.param) << '=' << csv_num(c.value) << " bracket=[" << csv_num(c.lo)
                  << ", " << csv_num(c.hi) << "]\n";
    }
    return inconclusive ? kExitInconclusive : 0;
}

int cmd_simulate(const Options& o) {
    const RunConfig cfg = load(o);
    const SimResult r = run_simulation(cfg.system(), cfg.sim);
    {
        auto f = open_out(o, "trace.csv");
        write_trace_csv(f, r.trace);
    }
    {
        auto f = open_out(o, "spectrum.csv");
        write_spectrum_csv(f, r.spectrum);
    }
    std::cout << "SIM " << to_string(r.verdict.stable) << " (" << r.verdict.detail << ")\n";
    if (r.spectrum) {
        std::cout << "osc_freq_hz=" << csv_num(r.spectrum->osc_freq) << " f_u=" << csv_num(r.spectrum->f_u) << '\n';
    }
    return 0;
}

int cmd_compare(const Options& o) {
    RunConfig cfg = load(o);
    cfg.methods = {Method::ap, Method::gnc, Method::gasin, Method::sim};
    const auto [param, value] = point_label(cfg);
    const auto vs = run_methods(cfg.system(), cfg);
    {
        auto f = open_out(o, "compare.csv");
        write_agreement_header(f);
        write_agreement_row(f, param, value, vs);
    }
    {
        auto f = open_out(o, "compare_verdicts.csv");
        write_verdict_header(f);
        for (const auto& v : vs) write_verdict_row(f, param, value, v);
    }
    print_verdicts(param, value, vs);
    return any_inconclusive(vs) ? kExitInconclusive : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Small-signal stability analysis of a grid-tied converter"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "INI configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
        sub->add_option("--fmin", o.fmin, "analysis band lower edge, Hz");
        sub->add_option("--fmax", o.fmax, "analysis band upper edge, Hz");
        sub->add_option("--npoints", o.npoints, "log-spaced base grid size");
        sub->add_option("--method", o.method, "ap|gnc|gasin|sim|all or a comma list");
    };

    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Sub subs[] = {
        {"impedance", "frequency responses of all model transfer functions", cmd_impedance},
        {"locus", "AP and GNC loci", cmd_locus},
        {"verdict", "stability verdicts at the configured point", cmd_verdict},
        {"sweep", "verdict table over the [sweep] values and optional critical value", cmd_sweep},
        {"simulate", "time-domain trace and sequence spectrum", cmd_simulate},
        {"compare", "AP, GNC, GASIN and SIM verdicts with an agreement flag", cmd_compare},
    };
    int (*chosen)(const Options&) = nullptr;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        add_common(sub);
        sub->callback([&chosen, run = s.run] { chosen = run; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage", e.what(), kExitConfig);
    }

    try {
        return chosen(o);
    } catch (const ConfigError& e) {
        return report_error(e.kind(), e.what(), kExitConfig);
    } catch (const IoError& e) {
        return report_error(e.kind(), e.what(), kExitConfig);
    } catch (const ParameterError& e) {
        return report_error(e.kind(), e.what(), kExitConfig);
    } catch (const InfeasibleOperatingPoint& e) {
        return report_error(e.kind(), e.what(), kExitConfig);
    } catch (const Error& e) {
        return report_error(e.kind(), e.what(), kExitNumerical);
    } catch (const std::exception& e) {
        return report_error("internal", e.what(), kExitNumerical);
    }
}
