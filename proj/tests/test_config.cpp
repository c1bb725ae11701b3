#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace nnmstab;
using namespace nnmstab::testing;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kConfigs[] = {"duffing.json",
                          "linear_oscillator.json",
                          "gyroscopic_mass_damping.json",
                          "gyroscopic_stiffness_damping.json",
                          "gyroscopic_low_energy.json",
                          "chain_parametric.json"};

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, ExampleConfigsRoundTrip) {
    for (const char* name : kConfigs) {
        const ScenarioConfig c = load_config(config_path(name));
        const std::string once = dump_config(c);
        const std::string twice = dump_config(parse_config(once));
        EXPECT_EQ(once, twice) << name;
        EXPECT_EQ(config_hash(c), config_hash(parse_config(once))) << name;
    }
}

TEST(Config, HashIsSixteenHexDigitsAndTracksContent) {
    const std::string text = read_file(config_path("duffing.json"));
    const ScenarioConfig a = parse_config(text);
    const std::string h = config_hash(a);
    EXPECT_EQ(h.size(), 16u);
    EXPECT_EQ(h.find_first_not_of("0123456789abcdef"), std::string::npos);
    EXPECT_EQ(h, config_hash(parse_config(text)));
    EXPECT_NE(h, config_hash(parse_config(apply_override(text, "perturbation.params.alpha=0.06"))));
    EXPECT_EQ(h, config_hash(parse_config(apply_override(text, "output=elsewhere"))));
}

TEST(Config, UnknownKeysNameTheirPath) {
    const std::string text = read_file(config_path("duffing.json"));
    EXPECT_NE(error_of(apply_override(text, "family.bogus=1")).find("family.bogus"), std::string::npos);
    EXPECT_NE(error_of(apply_override(text, "extra=true")).find("extra"), std::string::npos);
}

TEST(Config, InvalidValuesAreConfigErrors) {
    const std::string text = read_file(config_path("duffing.json"));
    EXPECT_NE(error_of(apply_override(text, "system.kind=nope")).find("system.kind"), std::string::npos);
    EXPECT_NE(error_of(apply_override(text, "perturbation.kind=nope")), "");
    EXPECT_NE(error_of(apply_override(text, "orbit.by=nope")), "");
    EXPECT_NE(error_of("{not json"), "");
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, OverridesParseJsonThenFallBackToStrings) {
    const std::string text = read_file(config_path("duffing.json"));
    const ScenarioConfig a = parse_config(apply_override(text, "epsilon=[0.02,0.01]"));
    EXPECT_EQ(a.epsilon, (std::vector<double>{0.02, 0.01}));
    const ScenarioConfig b = parse_config(apply_override(text, "output=some/dir"));
    EXPECT_EQ(b.output, "some/dir");
    const ScenarioConfig c = parse_config(apply_override(text, "orbit.value=1.1"));
    EXPECT_DOUBLE_EQ(c.orbit.value, 1.1);
    const ScenarioConfig d = parse_config(apply_override(text, "tolerances.dead_band=1e-6"));
    EXPECT_DOUBLE_EQ(d.tolerances.dead_band, 1e-6);
    EXPECT_THROW(apply_override(text, "no_equals_sign"), ConfigError);
    EXPECT_THROW(apply_override(text, "name.inner=1"), ConfigError);
}

TEST(Config, DefaultsAreFilledIn) {
    const ScenarioConfig c = load_config(config_path("duffing.json"));
    EXPECT_EQ(c.m, 1);
    EXPECT_EQ(c.l, 1);
    EXPECT_FALSE(c.sweep.has_value());
    EXPECT_DOUBLE_EQ(c.tolerances.integration, 1e-12);
    EXPECT_DOUBLE_EQ(c.tolerances.persistence_radius, 0.1);
    EXPECT_EQ(c.tolerances.melnikov_grid, 128);
}

TEST(Config, OrbitSelectionBranchOutOfRange) {
    const std::string text = read_file(config_path("duffing.json"));
    const ScenarioConfig c = parse_config(apply_override(text, "orbit.branch=7"));
    const HamiltonianSystem sys = build_system(c.system);
    const OrbitFamily fam = build_family(c, sys);
    EXPECT_THROW(select_orbit(c, fam), PreconditionError);
    const ScenarioConfig ok = parse_config(text);
    const PeriodicOrbit o = select_orbit(ok, fam);
    EXPECT_NEAR(o.omega(), 1.2, 1e-6);
}

std::string exact(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

TEST(Config, OrbitSelectionByEnergyAndPeriod) {
    const std::string text = read_file(config_path("duffing.json"));
    const ScenarioConfig base = parse_config(text);
    const HamiltonianSystem sys = build_system(base.system);
    const OrbitFamily fam = build_family(base, sys);
    const double h = 0.5;
    const PeriodicOrbit by_h = select_orbit(
        parse_config(apply_override(apply_override(text, "orbit.by=energy"), "orbit.value=" + exact(h))), fam);
    EXPECT_NEAR(by_h.h, h, 1e-8);
    EXPECT_NEAR(by_h.tau, duffing_period(h), 1e-4 * duffing_period(h));
    const double T = by_h.tau;
    const PeriodicOrbit by_T = select_orbit(
        parse_config(apply_override(apply_override(text, "orbit.by=period"), "orbit.value=" + exact(T))),
        fam);
    EXPECT_NEAR(by_T.tau, T, 1e-5);
}

TEST(Config, BuildersHonourTheConfig) {
    const ScenarioConfig c = load_config(config_path("gyroscopic_mass_damping.json"));
    const HamiltonianSystem sys = build_system(c.system);
    EXPECT_EQ(sys.dim(), 4);
    EXPECT_EQ(c.l, 3);
    const PerturbationField g = build_perturbation(c, 2.0);
    EXPECT_DOUBLE_EQ(g.period(), 2.0);
    const MelnikovOptions mo = melnikov_options(c);
    EXPECT_EQ(mo.grid_size, c.tolerances.melnikov_grid);
    const EpsilonPolicy ep = epsilon_policy(c);
    EXPECT_DOUBLE_EQ(ep.warn, 0.1);
    EXPECT_DOUBLE_EQ(ep.refuse, 0.5);
}
