#include "nnmstab/config.hpp"
#include "nnmstab/floquet.hpp"
#include "nnmstab/integrate.hpp"
#include "nnmstab/melnikov.hpp"
#include "nnmstab/orbits.hpp"
#include "nnmstab/stability.hpp"
#include "nnmstab/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#ifndef NNMSTAB_VERSION
#define NNMSTAB_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nnmstab;

namespace {

enum Exit { ok = 0, config_error = 2, numerical_failure = 3, partial = 4 };

struct Flags {
    std::string config;
    std::string out;
    int threads = 1;
    std::string seed_orbit;
    std::string epsilon;
    std::vector<std::string> overrides;
};

void warn(const std::string& msg) { std::cerr << "nnmstab: warning: " << msg << '\n'; }

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--epsilon: '" + item + "' is not a number");
        }
    }
    return v;
}

// Flags that mirror config keys only fill in what the config leaves unset.
ScenarioConfig load(const Flags& f) {
    std::string text = read_file(f.config);
    for (const auto& o : f.overrides) text = apply_override(text, o);
    ScenarioConfig cfg = parse_config(text);
    const json raw = json::parse(text);
    if (!f.out.empty()) {
        if (raw.contains("output") && raw["output"] != f.out)
            warn("config sets output = " + raw["output"].dump() + "; ignoring --out " + f.out);
        else
            cfg.output = f.out;
    }
    if (!f.epsilon.empty()) {
        const std::vector<double> eps = parse_list(f.epsilon);
        if (raw.contains("epsilon") && raw["epsilon"] != json(eps))
            warn("config sets epsilon = " + raw["epsilon"].dump() + "; ignoring --epsilon " + f.epsilon);
        else
            cfg.epsilon = eps;
    }
    return cfg;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Owns the output directory for one run: lock file, atomic writes, manifest.
class RunDir {
public:
    RunDir(const ScenarioConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {
        dir_ = cfg.output;
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("output: cannot create '" + dir_.string() + "': " + ec.message());
        lock_ = dir_ / ".nnmstab.lock";
        const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) throw ConfigError("output: '" + dir_.string() + "' is locked by another run (" + lock_.string() + ")");
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        json tol = json::parse(dump_config(cfg))["tolerances"];
        header_ = "# nnmstab " + std::string(NNMSTAB_VERSION) + "\n# config_hash " + config_hash(cfg) +
                  "\n# tolerances " + tol.dump() + "\n";
    }
    ~RunDir() {
        std::error_code ec;
        fs::remove(lock_, ec);
    }
    RunDir(const RunDir&) = delete;
    RunDir& operator=(const RunDir&) = delete;

    void write_csv(const std::string& name, const std::string& body) { write(name, header_ + body); }

    void write(const std::string& name, const std::string& content) {
        const fs::path target = dir_ / name;
        const fs::path tmp = dir_ / (name + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw ConfigError("output: cannot write '" + tmp.string() + "'");
            out << content;
            if (!out) throw ConfigError("output: write failed for '" + tmp.string() + "'");
        }
        fs::rename(tmp, target);
        std::ostringstream h;
        h << std::hex << fnv1a(content);
        files_.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a", h.str()}});
    }

    void finish(int code, const json& summary, const std::vector<std::string>& warnings) {
        json m;
        m["tool"] = "nnmstab";
        m["version"] = NNMSTAB_VERSION;
        m["command"] = command_;
        m["config_hash"] = config_hash(cfg_);
        m["config"] = json::parse(dump_config(cfg_));
        m["status"] = code == Exit::ok ? "ok" : (code == Exit::partial ? "partial" : "failed");
        m["exit_code"] = code;
        m["files"] = files_;
        m["warnings"] = warnings;
        m["summary"] = summary;
        write("manifest-" + command_ + ".json", m.dump(2) + "\n");
    }

private:
    const ScenarioConfig& cfg_;
    std::string command_;
    fs::path dir_;
    fs::path lock_;
    std::string header_;
    json files_ = json::array();
};

struct Setup {
    ScenarioConfig cfg;
    HamiltonianSystem sys;
    OrbitFamily family;
};

Setup setup(const ScenarioConfig& cfg) {
    Setup s{cfg, build_system(cfg.system), {}};
    s.family = build_family(cfg, s.sys);
    return s;
}

PeriodicOrbit chosen_orbit(const Setup& s, const Flags& f) {
    if (f.seed_orbit.empty()) return select_orbit(s.cfg, s.family);
    json j;
    try {
        j = json::parse(read_file(f.seed_orbit));
    } catch (const json::parse_error& e) {
        throw ConfigError("--seed-orbit: " + std::string(e.what()));
    }
    if (!j.contains("z") || !j.contains("tau")) throw ConfigError("--seed-orbit: needs 'z' and 'tau'");
    const auto z = j["z"].get<std::vector<double>>();
    if (static_cast<int>(z.size()) != s.sys.dim()) throw ConfigError("--seed-orbit: 'z' has the wrong dimension");
    const double tau = j["tau"].get<double>();
    const PeriodicOrbit o = find_periodic_orbit(s.sys, Eigen::Map<const Vec>(z.data(), s.sys.dim()), tau,
                                                ShootingConstraint::period(tau), shooting_options(s.cfg));
    return s.cfg.m == 1 ? o : with_cycles(s.sys, o, s.cfg.m, s.cfg.tolerances.integration);
}

json orbit_json(const PeriodicOrbit& o) {
    return {{"h", o.h}, {"tau", o.tau}, {"m", o.m}, {"omega", o.omega()}, {"residual", o.residual}};
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

template <typename Fn>
std::string render(Fn&& fn) {
    std::ostringstream os;
    fn(os);
    return os.str();
}

// ---------------------------------------------------------------------------

int cmd_backbone(const Flags& f) {
    const ScenarioConfig cfg = load(f);
    RunDir out(cfg, "backbone");
    const Setup s = setup(cfg);
    out.write_csv("backbone.csv", render([&](std::ostream& os) { write_backbone_csv(os, s.family); }));
    out.write_csv("multipliers.csv", render([&](std::ostream& os) {
                      write_multiplier_csv(os, s.family, floquet_tolerances(cfg));
                  }));
    json summary;
    const double T0 = reference_period(cfg, s.sys);
    const Vec eq = cfg.family.equilibrium.empty()
                       ? Vec::Zero(s.sys.dim())
                       : Vec(Eigen::Map<const Vec>(cfg.family.equilibrium.data(), s.sys.dim()));
    summary["linear_frequencies"] = to_std(linearized_frequencies(s.sys, eq).frequencies);
    summary["reference_period"] = T0;
    summary["orbits"] = s.family.size();
    summary["h_range"] = {s.family.h_min(), s.family.h_max()};
    json events = json::array();
    for (const auto& e : s.family.events())
        events.push_back({{"kind", e.kind}, {"index", e.index}, {"h", s.family.orbits()[e.index].h}});
    summary["events"] = events;
    const int code = s.family.stalled() ? Exit::partial : Exit::ok;
    std::vector<std::string> warnings;
    if (s.family.stalled()) warnings.push_back("continuation stalled; backbone is partial");
    out.finish(code, summary, warnings);
    for (const auto& w : warnings) warn(w);
    return code;
}

SweepOptions sweep_options(const Setup& s, const Flags& f) {
    if (!s.cfg.sweep) throw ConfigError("sweep: section required");
    const SweepConfig& sc = *s.cfg.sweep;
    SweepOptions o;
    o.l = s.cfg.l;
    o.params = sc.values;
    o.reference_period = reference_period(s.cfg, s.sys);
    o.omega_bar_min = sc.omega_bar_min;
    o.omega_bar_max = sc.omega_bar_max;
    o.rows = sc.rows;
    o.theta_samples = sc.theta_samples;
    o.quadrature_samples = sc.quadrature_samples;
    o.melnikov = melnikov_options(s.cfg);
    o.floquet = floquet_tolerances(s.cfg);
    o.threads = f.threads;
    return o;
}

json level_summary(const SweepResult& res, const LevelSet& L) {
    json folds = json::array();
    for (const auto& fe : L.folds) folds.push_back({{"omega_bar", fe.omega_bar}, {"theta", fe.theta}, {"zeros", fe.zeros}});
    return {{"param", L.param},
            {"components", L.components},
            {"onset", L.onset ? json(*L.onset) : json(nullptr)},
            {"termination", L.termination ? json(*L.termination) : json(nullptr)},
            {"row_counts", compressed_counts(L.zero_counts)},
            {"stage_sequence", stage_sequence(res, L)},
            {"folds", folds}};
}

// Level sets, written to `out`; returns the sweep and whether rows are missing.
std::pair<SweepResult, bool> run_sweep(const Setup& s, const Flags& f, RunDir& out, json& summary,
                                      std::vector<std::string>& warnings) {
    const SweepOptions o = sweep_options(s, f);
    SweepResult res = family_sweep(s.family, perturbation_builder(s.cfg), o);
    out.write_csv("levelset.csv", render([&](std::ostream& os) { write_levelset_csv(os, res); }));
    out.write_csv("contours.csv", render([&](std::ostream& os) { write_contour_csv(os, res); }));
    json levels = json::array();
    for (const auto& L : res.levels) levels.push_back(level_summary(res, L));
    summary["levels"] = levels;
    summary["rows"] = res.rows.size();
    const bool missing = o.rows > 0 && static_cast<int>(res.rows.size()) < o.rows;
    if (missing)
        warnings.push_back(std::to_string(o.rows - static_cast<int>(res.rows.size())) +
                           " sweep rows have no orbit on the family");
    return {std::move(res), missing};
}

int cmd_sweep(const Flags& f) {
    const ScenarioConfig cfg = load(f);
    if (!cfg.sweep) throw ConfigError("sweep: section required");
    RunDir out(cfg, "sweep");
    const Setup s = setup(cfg);
    json summary;
    std::vector<std::string> warnings;
    const bool missing = run_sweep(s, f, out, summary, warnings).second;
    const int code = missing ? Exit::partial : Exit::ok;
    out.finish(code, summary, warnings);
    for (const auto& w : warnings) warn(w);
    return code;
}

int cmd_melnikov(const Flags& f) {
    const ScenarioConfig cfg = load(f);
    RunDir out(cfg, "melnikov");
    const Setup s = setup(cfg);
    const PeriodicOrbit o = chosen_orbit(s, f);
    const ResonanceSpec spec = ResonanceSpec::for_orbit(o, cfg.l);
    const PerturbationField g = build_perturbation(cfg, spec.delta);
    const MelnikovCurve c = melnikov(s.sys, o, g, spec, melnikov_options(cfg));
    out.write_csv("melnikov.csv", render([&](std::ostream& os) { write_melnikov_csv(os, c); }));
    const HarmonicFit fit = fit_harmonic(c, 2.0 * std::numbers::pi / spec.delta);
    json summary;
    summary["orbit"] = orbit_json(o);
    summary["delta"] = spec.delta;
    summary["fit"] = {{"amplitude", fit.amplitude}, {"offset", fit.offset}, {"A", fit.A}, {"B", fit.B},
                      {"rms_residual", fit.rms_residual}};
    summary["max"] = c.values.size() ? c.values.maxCoeff() : 0.0;
    summary["min"] = c.values.size() ? c.values.minCoeff() : 0.0;
    summary["error_estimate"] = c.error_estimate;
    json zeros = json::array();
    for (const auto& z : c.zeros) zeros.push_back({{"s", z.s}, {"derivative", z.derivative}, {"type", to_string(z.type)}});
    summary["zeros"] = zeros;
    std::vector<std::string> warnings = c.warnings;
    bool missing = false;
    if (cfg.sweep) missing = run_sweep(s, f, out, summary, warnings).second;
    const int code = missing ? Exit::partial : Exit::ok;
    out.finish(code, summary, warnings);
    for (const auto& w : warnings) warn(w);
    return code;
}

struct ZeroSet {
    PeriodicOrbit orbit;
    ResonanceSpec spec;
    PerturbationField g;
    MelnikovCurve curve;
    PeriodDerivative slope;
    std::vector<ZeroAnalysis> analyses;
};

ZeroSet analyse_orbit(const Setup& s, const Flags& f) {
    const ScenarioConfig& cfg = s.cfg;
    PeriodicOrbit o = chosen_orbit(s, f);
    const ResonanceSpec spec = ResonanceSpec::for_orbit(o, cfg.l);
    ZeroSet z{o, spec, build_perturbation(cfg, spec.delta), {}, {}, {}};
    z.curve = melnikov(s.sys, o, z.g, spec, melnikov_options(cfg));
    z.slope = period_derivative_report(s.family, o.h);
    for (const auto& zero : z.curve.zeros)
        z.analyses.push_back(analyse_zero(s.sys, z.curve, z.g, zero, z.slope.value, floquet_tolerances(cfg),
                                          cfg.tolerances.integration));
    return z;
}

json verdict_json(const ZeroAnalysis& a) {
    return {{"s0", a.zero.s},
            {"dM_ds", a.zero.derivative},
            {"type", to_string(a.zero.type)},
            {"verdict", to_string(a.verdict.verdict)},
            {"clause", a.verdict.clause},
            {"flags", a.verdict.flags},
            {"C_T", a.verdict.C_T},
            {"C_N", a.verdict.C_N}};
}

int cmd_classify(const Flags& f) {
    const ScenarioConfig cfg = load(f);
    RunDir out(cfg, "classify");
    const Setup s = setup(cfg);
    json summary;
    std::vector<std::string> warnings;
    const ZeroSet z = analyse_orbit(s, f);
    const double eps = cfg.epsilon.empty() ? 0.0 : cfg.epsilon.front();
    out.write_csv("verdicts.csv", render([&](std::ostream& os) {
                      write_verdict_csv(os, z.analyses, eps, epsilon_policy(cfg));
                  }));
    summary["orbit"] = orbit_json(z.orbit);
    summary["period_slope"] = z.slope.value;
    summary["period_slope_sign_stable"] = z.slope.sign_stable;
    if (!z.slope.sign_stable) warnings.push_back("sign of T' changes between difference steps");
    json verdicts = json::array();
    for (const auto& a : z.analyses) verdicts.push_back(verdict_json(a));
    summary["verdicts"] = verdicts;
    if (z.analyses.empty()) summary["note"] = "no zeros of M: no periodic response persists from this orbit";

    bool missing = false;
    if (cfg.sweep) {
        const auto [res, miss] = run_sweep(s, f, out, summary, warnings);
        missing = miss;
        StripOptions so;
        so.l = cfg.l;
        so.floquet = floquet_tolerances(cfg);
        so.integration_tol = cfg.tolerances.integration;
        so.threads = f.threads;
        const std::vector<StripPoint> strips = verdict_strips(s.sys, res, perturbation_builder(cfg), so);
        out.write_csv("strips.csv", render([&](std::ostream& os) { write_strip_csv(os, strips); }));
        json counts = json::object();
        for (const auto& p : strips) {
            const std::string key = p.applicable ? to_string(p.analysis.verdict.verdict) : "not-applicable";
            counts[key] = counts.value(key, 0) + 1;
        }
        summary["strip_counts"] = counts;
    }
    const int code = missing ? Exit::partial : Exit::ok;
    out.finish(code, summary, warnings);
    for (const auto& w : warnings) warn(w);
    return code;
}

std::vector<double> predicted_moduli(const MultiplierPrediction& mp) {
    std::vector<double> v;
    for (const auto& m : mp.multipliers) {
        v.push_back(m.modulus);
        v.push_back(m.kind == SubspaceKind::tangent ? m.partner_modulus : m.modulus);
    }
    return v;
}

bool agrees(Verdict v, MeasuredLabel l) {
    return (v == Verdict::asymptotically_stable && l == MeasuredLabel::stable) ||
           (v == Verdict::unstable && l == MeasuredLabel::unstable);
}

int cmd_verify(const Flags& f) {
    const ScenarioConfig cfg = load(f);
    if (cfg.epsilon.empty()) throw ConfigError("epsilon: verify needs at least one value");
    RunDir out(cfg, "verify");
    const Setup s = setup(cfg);
    const ZeroSet z = analyse_orbit(s, f);
    std::vector<VerificationRecord> records;
    std::vector<std::string> warnings;
    json summary;
    summary["orbit"] = orbit_json(z.orbit);
    bool missing = false;

    VerifyConfig vc;
    vc.forcing_period = z.spec.delta;
    vc.cycles_l = cfg.l;
    vc.newton_tol = cfg.tolerances.newton;
    vc.max_iter = cfg.tolerances.newton_max_iter;
    vc.integration_tol = cfg.tolerances.integration;
    vc.persistence_radius = cfg.tolerances.persistence_radius;

    json per_zero = json::array();
    for (std::size_t k = 0; k < z.analyses.size(); ++k) {
        const ZeroAnalysis& a = z.analyses[k];
        std::vector<ScoreRow> rows;
        for (double eps : cfg.epsilon) {
            vc.epsilon = eps;
            vc.seed = a.anchored.z;
            VerificationRecord rec;
            rec.epsilon = eps;
            rec.zero = static_cast<int>(k);
            rec.predicted_verdict = to_string(a.verdict.verdict);
            try {
                rec.predicted = predicted_moduli(predict_multipliers(a.inputs, eps, epsilon_policy(cfg)));
            } catch (const PreconditionError& e) {
                warnings.push_back(std::string(e.what()));
            }
            const Persistence p = check_persistence(s.sys, z.g, vc, z.orbit);
            rec.converged = p.converged && p.persists;
            if (p.orbit && p.persists) {
                const MeasuredMultipliers mm = measured_multipliers(*p.orbit, cfg.tolerances.dead_band);
                rec.period = p.orbit->period;
                rec.measured = to_std(mm.moduli);
                rec.measured_label = to_string(mm.label);
                rec.agrees = agrees(a.verdict.verdict, mm.label);
                if (!rec.predicted.empty()) {
                    const ScoreRow sr = score_row(eps, rec.predicted, rec.measured, rec.agrees);
                    rec.error = sr.error;
                    rows.push_back(sr);
                }
            } else {
                rec.measured_label = "none";
                if (a.zero.type == MelnikovZero::Type::simple) {
                    missing = true;
                    warnings.push_back("zero " + std::to_string(k) + " at eps " + std::to_string(eps) +
                                       ": no persisting orbit (" + p.reason + ")");
                }
            }
            records.push_back(rec);
        }
        const ScoreReport rep = score(rows);
        json errs = json::array();
        for (const auto& r : rep.rows) errs.push_back({{"epsilon", r.epsilon}, {"error", r.error}});
        per_zero.push_back({{"zero", k},
                            {"verdict", to_string(a.verdict.verdict)},
                            {"errors", errs},
                            {"orders", rep.orders},
                            {"mean_order", rep.mean_order()}});
    }
    summary["zeros"] = per_zero;

    if (z.analyses.empty()) {
        // no zeros: look for any orbit persisting from phases along the seed
        const int phases = 8;
        bool any = false;
        for (double eps : cfg.epsilon) {
            vc.epsilon = eps;
            for (int k = 0; k < phases; ++k) {
                const PeriodicOrbit seed = rebase(s.sys, z.orbit, z.orbit.period() * k / phases,
                                                  cfg.tolerances.integration);
                vc.seed = seed.z;
                const Persistence p = check_persistence(s.sys, z.g, vc, z.orbit);
                VerificationRecord rec;
                rec.epsilon = eps;
                rec.zero = -1;
                rec.converged = p.converged && p.persists;
                rec.predicted_verdict = "no-zero";
                rec.measured_label = "none";
                if (p.orbit && p.persists) {
                    any = true;
                    const MeasuredMultipliers mm = measured_multipliers(*p.orbit, cfg.tolerances.dead_band);
                    rec.period = p.orbit->period;
                    rec.measured = to_std(mm.moduli);
                    rec.measured_label = to_string(mm.label);
                }
                records.push_back(rec);
            }
        }
        summary["persisting_orbit_found"] = any;
    }
    out.write_csv("verification.csv", render([&](std::ostream& os) { write_verification_csv(os, records); }));
    const int code = missing ? Exit::partial : Exit::ok;
    out.finish(code, summary, warnings);
    for (const auto& w : warnings) warn(w);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stability of forced-damped periodic orbits near conservative families"};
    app.set_version_flag("--version", std::string(NNMSTAB_VERSION));
    app.require_subcommand(1);

    Flags f;
    auto add_flags = [&f](CLI::App* sub) {
        sub->add_option("--config", f.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", f.out, "Output directory (config key: output)");
        sub->add_option("--threads", f.threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
        sub->add_option("--seed-orbit", f.seed_orbit, "JSON file with z and tau of the conservative orbit")
            ->check(CLI::ExistingFile);
        sub->add_option("--epsilon", f.epsilon, "Comma-separated epsilon values (config key: epsilon)");
        sub->add_option("--override", f.overrides, "KEY=VAL applied to the config, dotted keys");
    };

    int code = Exit::ok;
    const std::vector<std::pair<std::string, std::pair<std::string, int (*)(const Flags&)>>> cmds = {
        {"backbone", {"Continue the orbit family; backbone and multiplier CSVs", cmd_backbone}},
        {"melnikov", {"Melnikov curve of the selected orbit (and level sets with a sweep)", cmd_melnikov}},
        {"classify", {"Stability verdicts at the zeros (and along sweep contours)", cmd_classify}},
        {"verify", {"Perturbed orbits by Newton iteration; measured vs predicted multipliers", cmd_verify}},
        {"sweep", {"Level sets of the Melnikov function over the family", cmd_sweep}},
    };
    for (const auto& [name, info] : cmds) {
        CLI::App* sub = app.add_subcommand(name, info.first);
        add_flags(sub);
        const auto fn = info.second;
        sub->callback([&code, &f, fn, name] {
            try {
                code = fn(f);
            } catch (const ConfigError& e) {
                std::cerr << "nnmstab " << name << ": config error: " << e.what() << '\n';
                code = Exit::config_error;
            } catch (const SpecError& e) {
                std::cerr << "nnmstab " << name << ": config error: " << e.what() << '\n';
                code = Exit::config_error;
            } catch (const std::exception& e) {
                std::cerr << "nnmstab " << name << ": numerical failure: " << e.what() << '\n';
                code = Exit::numerical_failure;
            }
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int r = app.exit(e);
        return r == 0 ? 0 : Exit::config_error;
    }
    return code;
}
