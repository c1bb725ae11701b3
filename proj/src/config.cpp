#include "nnmstab/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

namespace nnmstab {

using nlohmann::json;

namespace {

// Reads an object and remembers which keys were consumed so leftovers can be
// reported as unknown.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <typename T>
    T get(const std::string& key, const T& fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    template <typename T>
    std::optional<T> optional(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
        return get<T>(key, T{});
    }

    Reader child(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Reader(j_.contains(key) ? j_.at(key) : empty, where(key));
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

SystemConfig read_system(Reader r) {
    SystemConfig s;
    s.kind = r.get<std::string>("kind", s.kind);
    Reader p = r.child("params");
    if (s.kind == "gyroscopic") {
        s.gyroscopic.Omega = p.get("Omega", s.gyroscopic.Omega);
        s.gyroscopic.l0 = p.get("l0", s.gyroscopic.l0);
        const auto k = p.get<std::vector<double>>(
            "k", std::vector<double>(s.gyroscopic.k.begin(), s.gyroscopic.k.end()));
        require(k.size() == 4, p.where("k") + ": four stiffnesses required");
        std::copy(k.begin(), k.end(), s.gyroscopic.k.begin());
        require(s.gyroscopic.l0 > 0.0, p.where("l0") + ": must be positive");
    } else if (s.kind == "parametric_chain") {
        s.chain.k = p.get("k", s.chain.k);
        s.chain.a = p.get("a", s.chain.a);
        s.chain.b = p.get("b", s.chain.b);
    } else if (s.kind == "duffing") {
        s.duffing_linear = p.get("linear", s.duffing_linear);
        s.duffing_cubic = p.get("cubic", s.duffing_cubic);
    } else if (s.kind == "linear_oscillator") {
        s.frequencies = p.get("frequencies", s.frequencies);
        require(!s.frequencies.empty(), p.where("frequencies") + ": empty");
    } else if (s.kind == "polynomial") {
        const auto K = p.get<std::vector<std::vector<double>>>("stiffness", {});
        require(!K.empty(), p.where("stiffness") + ": required");
        const auto n = static_cast<Eigen::Index>(K.size());
        s.stiffness.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            require(static_cast<Eigen::Index>(K[i].size()) == n, p.where("stiffness") + ": not square");
            for (Eigen::Index j = 0; j < n; ++j) s.stiffness(i, j) = K[i][j];
        }
        if (p.has("terms")) {
            const json& terms = p.raw("terms");
            require(terms.is_array(), p.where("terms") + ": expected an array");
            for (std::size_t i = 0; i < terms.size(); ++i) {
                Reader t(terms[i], p.where("terms") + "[" + std::to_string(i) + "]");
                models::PolynomialTerm term;
                term.coeff = t.get("coeff", 0.0);
                term.powers = t.get<std::vector<int>>("powers", {});
                require(static_cast<Eigen::Index>(term.powers.size()) == n,
                        t.where("powers") + ": one exponent per degree of freedom");
                t.finish();
                s.terms.push_back(term);
            }
        }
    } else {
        throw ConfigError(r.where("kind") + ": unknown system '" + s.kind + "'");
    }
    p.finish();
    r.finish();
    return s;
}

PerturbationConfig read_perturbation(Reader r) {
    PerturbationConfig c;
    c.kind = r.get<std::string>("kind", c.kind);
    Reader p = r.child("params");
    if (c.kind == "gyroscopic") {
        c.gyroscopic.alpha = p.get("alpha", c.gyroscopic.alpha);
        c.gyroscopic.beta = p.get("beta", c.gyroscopic.beta);
        c.gyroscopic.e = p.get("e", c.gyroscopic.e);
    } else if (c.kind == "parametric_square_wave") {
        c.square_wave.alpha = p.get("alpha", c.square_wave.alpha);
        c.square_wave.harmonics = p.get("harmonics", c.square_wave.harmonics);
        c.square_wave.dof_index = p.get("dof_index", c.square_wave.dof_index);
        c.square_wave.amplitude = p.get("amplitude", c.square_wave.amplitude);
        require(c.square_wave.harmonics >= 1, p.where("harmonics") + ": must be positive");
    } else if (c.kind == "harmonic") {
        c.alpha = p.get("alpha", c.alpha);
        if (p.has("terms")) {
            const json& terms = p.raw("terms");
            require(terms.is_array(), p.where("terms") + ": expected an array");
            for (std::size_t i = 0; i < terms.size(); ++i) {
                Reader t(terms[i], p.where("terms") + "[" + std::to_string(i) + "]");
                models::HarmonicTerm h;
                h.dof_index = t.get("dof_index", h.dof_index);
                h.amplitude = t.get("amplitude", h.amplitude);
                h.harmonic = t.get("harmonic", h.harmonic);
                h.phase = t.get("phase", h.phase);
                h.parametric_dof = t.get("parametric_dof", h.parametric_dof);
                t.finish();
                c.harmonics.push_back(h);
            }
        }
    } else if (c.kind != "none") {
        throw ConfigError(r.where("kind") + ": unknown perturbation '" + c.kind + "'");
    }
    p.finish();
    r.finish();
    return c;
}

json system_json(const SystemConfig& s) {
    json p = json::object();
    if (s.kind == "gyroscopic") {
        p["Omega"] = s.gyroscopic.Omega;
        p["l0"] = s.gyroscopic.l0;
        p["k"] = std::vector<double>(s.gyroscopic.k.begin(), s.gyroscopic.k.end());
    } else if (s.kind == "parametric_chain") {
        p["k"] = s.chain.k;
        p["a"] = s.chain.a;
        p["b"] = s.chain.b;
    } else if (s.kind == "duffing") {
        p["linear"] = s.duffing_linear;
        p["cubic"] = s.duffing_cubic;
    } else if (s.kind == "linear_oscillator") {
        p["frequencies"] = s.frequencies;
    } else if (s.kind == "polynomial") {
        json K = json::array();
        for (Eigen::Index i = 0; i < s.stiffness.rows(); ++i) {
            std::vector<double> row(s.stiffness.cols());
            for (Eigen::Index j = 0; j < s.stiffness.cols(); ++j) row[j] = s.stiffness(i, j);
            K.push_back(row);
        }
        p["stiffness"] = K;
        json terms = json::array();
        for (const auto& t : s.terms) terms.push_back({{"coeff", t.coeff}, {"powers", t.powers}});
        p["terms"] = terms;
    }
    return {{"kind", s.kind}, {"params", p}};
}

json perturbation_json(const PerturbationConfig& c) {
    json p = json::object();
    if (c.kind == "gyroscopic") {
        p = {{"alpha", c.gyroscopic.alpha}, {"beta", c.gyroscopic.beta}, {"e", c.gyroscopic.e}};
    } else if (c.kind == "parametric_square_wave") {
        p = {{"alpha", c.square_wave.alpha},
             {"harmonics", c.square_wave.harmonics},
             {"dof_index", c.square_wave.dof_index},
             {"amplitude", c.square_wave.amplitude}};
    } else if (c.kind == "harmonic") {
        json terms = json::array();
        for (const auto& h : c.harmonics)
            terms.push_back({{"dof_index", h.dof_index},
                             {"amplitude", h.amplitude},
                             {"harmonic", h.harmonic},
                             {"phase", h.phase},
                             {"parametric_dof", h.parametric_dof}});
        p = {{"alpha", c.alpha}, {"terms", terms}};
    }
    return {{"kind", c.kind}, {"params", p}};
}

json to_json(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    j["system"] = system_json(c.system);
    j["perturbation"] = perturbation_json(c.perturbation);
    const FamilyConfig& f = c.family;
    j["family"] = {{"equilibrium", f.equilibrium},
                   {"mode", f.mode},
                   {"amplitude", f.amplitude},
                   {"initial_step", f.initial_step},
                   {"min_step", f.min_step},
                   {"max_step", f.max_step},
                   {"max_steps", f.max_steps},
                   {"parametrization", f.parametrization},
                   {"stop_at_bifurcation", f.stop_at_bifurcation},
                   {"stop_omega_bar", f.stop_omega_bar ? json(*f.stop_omega_bar) : json(nullptr)}};
    j["orbit"] = {{"by", c.orbit.by}, {"value", c.orbit.value}, {"branch", c.orbit.branch}};
    j["resonance"] = {{"m", c.m}, {"l", c.l}};
    if (c.sweep) {
        const SweepConfig& s = *c.sweep;
        j["sweep"] = {{"parameter", s.parameter},
                      {"values", s.values},
                      {"omega_bar_min", s.omega_bar_min},
                      {"omega_bar_max", s.omega_bar_max},
                      {"rows", s.rows},
                      {"theta_samples", s.theta_samples},
                      {"quadrature_samples", s.quadrature_samples}};
    }
    j["epsilon"] = c.epsilon;
    const ToleranceConfig& t = c.tolerances;
    j["tolerances"] = {{"integration", t.integration},
                       {"closure", t.closure},
                       {"melnikov_grid", t.melnikov_grid},
                       {"melnikov_integration", t.melnikov_integration},
                       {"zero_type", t.zero_type},
                       {"polish", t.polish},
                       {"cluster", t.cluster},
                       {"rank", t.rank},
                       {"unit_circle", t.unit_circle},
                       {"weak_separation", t.weak_separation},
                       {"eps_warn", t.eps_warn},
                       {"eps_refuse", t.eps_refuse},
                       {"newton", t.newton},
                       {"newton_max_iter", t.newton_max_iter},
                       {"persistence_radius", t.persistence_radius},
                       {"dead_band", t.dead_band}};
    j["output"] = c.output;
    return j;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    Reader r(j, "");
    ScenarioConfig c;
    c.name = r.get<std::string>("name", c.name);
    c.system = read_system(r.child("system"));
    c.perturbation = read_perturbation(r.child("perturbation"));

    {
        Reader f = r.child("family");
        FamilyConfig& F = c.family;
        F.equilibrium = f.get("equilibrium", F.equilibrium);
        F.mode = f.get("mode", F.mode);
        F.amplitude = f.get("amplitude", F.amplitude);
        F.initial_step = f.get("initial_step", F.initial_step);
        F.min_step = f.get("min_step", F.min_step);
        F.max_step = f.get("max_step", F.max_step);
        F.max_steps = f.get("max_steps", F.max_steps);
        F.parametrization = f.get("parametrization", F.parametrization);
        F.stop_at_bifurcation = f.get("stop_at_bifurcation", F.stop_at_bifurcation);
        F.stop_omega_bar = f.optional<double>("stop_omega_bar");
        require(F.parametrization == "energy" || F.parametrization == "period",
                f.where("parametrization") + ": energy or period");
        require(F.min_step > 0.0 && F.min_step <= F.initial_step && F.initial_step <= F.max_step,
                f.where("initial_step") + ": need 0 < min_step <= initial_step <= max_step");
        f.finish();
    }
    {
        Reader o = r.child("orbit");
        c.orbit.by = o.get("by", c.orbit.by);
        c.orbit.value = o.get("value", c.orbit.value);
        c.orbit.branch = o.get("branch", c.orbit.branch);
        require(c.orbit.by == "omega" || c.orbit.by == "omega_bar" || c.orbit.by == "period" || c.orbit.by == "energy",
                o.where("by") + ": omega, omega_bar, period or energy");
        o.finish();
    }
    {
        Reader res = r.child("resonance");
        c.m = res.get("m", c.m);
        c.l = res.get("l", c.l);
        require(c.m >= 1 && c.l >= 1, res.where("l") + ": m and l must be positive");
        res.finish();
    }
    if (r.has("sweep")) {
        Reader s = r.child("sweep");
        SweepConfig S;
        S.parameter = s.get("parameter", S.parameter);
        S.values = s.get("values", S.values);
        S.omega_bar_min = s.get("omega_bar_min", S.omega_bar_min);
        S.omega_bar_max = s.get("omega_bar_max", S.omega_bar_max);
        S.rows = s.get("rows", S.rows);
        S.theta_samples = s.get("theta_samples", S.theta_samples);
        S.quadrature_samples = s.get("quadrature_samples", S.quadrature_samples);
        require(!S.values.empty(), s.where("values") + ": at least one value");
        s.finish();
        c.sweep = S;
    }
    c.epsilon = r.get("epsilon", c.epsilon);
    for (double e : c.epsilon) require(e >= 0.0, "epsilon: values must be non-negative");
    {
        Reader t = r.child("tolerances");
        ToleranceConfig& T = c.tolerances;
        T.integration = t.get("integration", T.integration);
        T.closure = t.get("closure", T.closure);
        T.melnikov_grid = t.get("melnikov_grid", T.melnikov_grid);
        T.melnikov_integration = t.get("melnikov_integration", T.melnikov_integration);
        T.zero_type = t.get("zero_type", T.zero_type);
        T.polish = t.get("polish", T.polish);
        T.cluster = t.get("cluster", T.cluster);
        T.rank = t.get("rank", T.rank);
        T.unit_circle = t.get("unit_circle", T.unit_circle);
        T.weak_separation = t.get("weak_separation", T.weak_separation);
        T.eps_warn = t.get("eps_warn", T.eps_warn);
        T.eps_refuse = t.get("eps_refuse", T.eps_refuse);
        T.newton = t.get("newton", T.newton);
        T.newton_max_iter = t.get("newton_max_iter", T.newton_max_iter);
        T.persistence_radius = t.get("persistence_radius", T.persistence_radius);
        T.dead_band = t.get("dead_band", T.dead_band);
        require(T.integration >= 1e-14 && T.integration <= 1e-4, t.where("integration") + ": outside [1e-14, 1e-4]");
        require(T.melnikov_grid >= 64, t.where("melnikov_grid") + ": at least 64");
        t.finish();
    }
    c.output = r.get("output", c.output);
    r.finish();
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ScenarioConfig& cfg) { return to_json(cfg).dump(2); }

std::string apply_override(const std::string& text, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected KEY=VALUE");
    const std::string key = assignment.substr(0, eq);
    const std::string val = assignment.substr(eq + 1);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    json v;
    try {
        v = json::parse(val);
    } catch (const json::parse_error&) {
        v = val;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
        if (!node->is_object()) throw ConfigError("override '" + assignment + "': '" + part + "' is not in an object");
        if (dot == std::string::npos) {
            (*node)[part] = v;
            break;
        }
        // missing sections are created; unknown keys still fail in parsing
        if (!node->contains(part)) (*node)[part] = json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
    return j.dump(2);
}

std::string config_hash(const ScenarioConfig& cfg) {
    // FNV-1a over the canonical compact dump; the output directory does not
    // affect results and is left out
    json j = to_json(cfg);
    j.erase("output");
    const std::string s = j.dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

HamiltonianSystem build_system(const SystemConfig& c) {
    if (c.kind == "gyroscopic") return models::gyroscopic(c.gyroscopic);
    if (c.kind == "parametric_chain") return models::parametric_chain(c.chain);
    if (c.kind == "duffing") return models::duffing(c.duffing_linear, c.duffing_cubic);
    if (c.kind == "linear_oscillator") return models::linear_oscillator(c.frequencies);
    if (c.kind == "polynomial") return models::polynomial(c.stiffness, c.terms);
    throw ConfigError("system: unknown kind '" + c.kind + "'");
}

PerturbationField build_perturbation(const ScenarioConfig& c, double delta, std::optional<double> value) {
    const int n = build_system(c.system).dof();
    PerturbationConfig p = c.perturbation;
    const std::string key = c.sweep ? c.sweep->parameter : "alpha";
    auto set = [&](double& field, const char* name) {
        if (value && key == name) field = *value;
    };
    if (p.kind == "gyroscopic") {
        require(c.system.kind == "gyroscopic", "perturbation: gyroscopic forcing needs the gyroscopic system");
        set(p.gyroscopic.alpha, "alpha");
        set(p.gyroscopic.beta, "beta");
        set(p.gyroscopic.e, "e");
        return models::gyroscopic_perturbation(c.system.gyroscopic, p.gyroscopic, delta);
    }
    if (p.kind == "parametric_square_wave") {
        set(p.square_wave.alpha, "alpha");
        set(p.square_wave.amplitude, "amplitude");
        require(p.square_wave.dof_index >= 0 && p.square_wave.dof_index < n, "perturbation: dof_index out of range");
        return models::parametric_square_wave(n, p.square_wave, delta);
    }
    if (p.kind == "harmonic") {
        set(p.alpha, "alpha");
        for (const auto& h : p.harmonics)
            require(h.dof_index >= 0 && h.dof_index < n && h.parametric_dof < n,
                    "perturbation: harmonic term index out of range");
        return models::damped_harmonic(n, p.alpha, p.harmonics, delta);
    }
    return zero_perturbation(n, delta);
}

PerturbationBuilder perturbation_builder(const ScenarioConfig& c) {
    return [c](double value, double delta) { return build_perturbation(c, delta, value); };
}

ShootingOptions shooting_options(const ScenarioConfig& c) {
    ShootingOptions o;
    o.integration_tol = c.tolerances.integration;
    o.closure_tol = c.tolerances.closure;
    o.plus_one_tol = c.tolerances.cluster;
    return o;
}

MelnikovOptions melnikov_options(const ScenarioConfig& c) {
    MelnikovOptions o;
    o.grid_size = c.tolerances.melnikov_grid;
    o.integration_tol = c.tolerances.melnikov_integration;
    o.zero_type_tol = c.tolerances.zero_type;
    o.polish_tol = c.tolerances.polish;
    return o;
}

FloquetTolerances floquet_tolerances(const ScenarioConfig& c) {
    FloquetTolerances f;
    f.cluster = c.tolerances.cluster;
    f.rank = c.tolerances.rank;
    f.unit_circle = c.tolerances.unit_circle;
    f.weak_separation = c.tolerances.weak_separation;
    return f;
}

EpsilonPolicy epsilon_policy(const ScenarioConfig& c) { return {c.tolerances.eps_warn, c.tolerances.eps_refuse}; }

namespace {

Vec equilibrium_of(const ScenarioConfig& c, const HamiltonianSystem& sys) {
    if (c.family.equilibrium.empty()) return Vec::Zero(sys.dim());
    if (static_cast<int>(c.family.equilibrium.size()) != sys.dim())
        throw ConfigError("family.equilibrium: expected " + std::to_string(sys.dim()) + " entries");
    return Eigen::Map<const Vec>(c.family.equilibrium.data(), sys.dim());
}

}  // namespace

double reference_period(const ScenarioConfig& c, const HamiltonianSystem& sys) {
    const LinearizationReport lin = linearized_frequencies(sys, equilibrium_of(c, sys));
    if (c.family.mode < 0 || c.family.mode >= lin.frequencies.size())
        throw ConfigError("family.mode: no such linear mode");
    return 2.0 * std::numbers::pi / lin.frequencies[c.family.mode];
}

OrbitFamily build_family(const ScenarioConfig& c, const HamiltonianSystem& sys) {
    const Vec eq = equilibrium_of(c, sys);
    const OrbitGuess g = linear_mode_guess(sys, eq, c.family.mode, c.family.amplitude);
    const ShootingOptions sh = shooting_options(c);
    const PeriodicOrbit seed =
        find_periodic_orbit(sys, g.z, g.tau, ShootingConstraint::energy(sys.hamiltonian(g.z)), sh);
    ContinuationOptions opt;
    opt.initial_step = c.family.initial_step;
    opt.min_step = c.family.min_step;
    opt.max_step = c.family.max_step;
    opt.max_steps = c.family.max_steps;
    opt.parametrization =
        c.family.parametrization == "energy" ? Parametrization::energy : Parametrization::period;
    opt.stop_at_bifurcation = c.family.stop_at_bifurcation;
    opt.shooting = sh;
    if (c.family.stop_omega_bar) {
        const double T0 = reference_period(c, sys);
        const double stop = *c.family.stop_omega_bar;
        opt.stop = [T0, stop](const PeriodicOrbit& o) { return T0 / o.tau > stop; };
    }
    return continue_family(sys, seed, opt);
}

PeriodicOrbit select_orbit(const ScenarioConfig& c, const OrbitFamily& family) {
    const HamiltonianSystem& sys = family.system();
    std::vector<PeriodicOrbit> found;
    const double v = c.orbit.value;
    if (c.orbit.by == "energy") {
        const PeriodicOrbit& near = family.nearest(v);
        found.push_back(find_periodic_orbit(sys, near.z, near.tau, ShootingConstraint::energy(v), family.shooting()));
    } else {
        double tau = v;
        if (c.orbit.by == "omega") tau = 2.0 * std::numbers::pi / v;
        if (c.orbit.by == "omega_bar") tau = reference_period(c, sys) / v;
        found = family.orbits_with_period(tau);
    }
    if (c.orbit.branch < 0 || c.orbit.branch >= static_cast<int>(found.size()))
        throw PreconditionError("orbit: " + std::to_string(found.size()) + " orbits match '" + c.orbit.by +
                                "', branch " + std::to_string(c.orbit.branch) + " requested");
    PeriodicOrbit o = found[c.orbit.branch];
    if (c.m != 1) o = with_cycles(sys, o, c.m, c.tolerances.integration);
    return o;
}

}  // namespace nnmstab
