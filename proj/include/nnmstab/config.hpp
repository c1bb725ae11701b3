#pragma once

// Scenario configuration: system, perturbation, family continuation, orbit
// selection, resonance, sweep and tolerances. Stored as JSON; unknown keys are
// rejected and a parsed config serializes back to an equivalent document.

#include "nnmstab/melnikov.hpp"
#include "nnmstab/models.hpp"
#include "nnmstab/stability.hpp"
#include "nnmstab/verify.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nnmstab {

struct SystemConfig {
    std::string kind = "gyroscopic";  ///< gyroscopic | parametric_chain | duffing | linear_oscillator | polynomial
    models::GyroscopicParams gyroscopic;
    models::ChainParams chain;
    double duffing_linear = 1.0;
    double duffing_cubic = 1.0;
    std::vector<double> frequencies{1.0};
    Mat stiffness;
    std::vector<models::PolynomialTerm> terms;
};

struct PerturbationConfig {
    std::string kind = "none";  ///< gyroscopic | parametric_square_wave | harmonic | none
    models::GyroscopicForcing gyroscopic;
    models::SquareWaveParametric square_wave;
    double alpha = 0.0;  ///< damping of the harmonic kind
    std::vector<models::HarmonicTerm> harmonics;
};

struct FamilyConfig {
    std::vector<double> equilibrium;  ///< empty means the origin
    int mode = 0;
    double amplitude = 0.01;
    double initial_step = 0.02;
    double min_step = 1e-7;
    double max_step = 0.2;
    int max_steps = 300;
    std::string parametrization = "energy";  ///< energy | period
    bool stop_at_bifurcation = true;
    std::optional<double> stop_omega_bar;  ///< stop once T(0)/T(h) exceeds this
};

/// Orbit of the family used by melnikov / classify / verify.
struct OrbitSelection {
    std::string by = "omega";  ///< omega | omega_bar | period | energy
    double value = 1.0;
    int branch = 0;  ///< index among the matching orbits, ascending in h
};

struct SweepConfig {
    std::string parameter = "alpha";  ///< perturbation key varied across levels
    std::vector<double> values;
    double omega_bar_min = 1.0;
    double omega_bar_max = 1.0;
    int rows = 0;
    int theta_samples = 200;
    int quadrature_samples = 64;
};

struct ToleranceConfig {
    double integration = 1e-12;
    double closure = 1e-10;
    int melnikov_grid = 128;
    double melnikov_integration = 1e-11;
    double zero_type = 1e-6;
    double polish = 1e-10;
    double cluster = 1e-5;
    double rank = 1e-7;
    double unit_circle = 1e-6;
    double weak_separation = 1e-2;
    double eps_warn = 0.1;
    double eps_refuse = 0.5;
    double newton = 1e-10;
    int newton_max_iter = 30;
    double persistence_radius = 0.1;
    double dead_band = 1e-7;
};

struct ScenarioConfig {
    std::string name = "scenario";
    SystemConfig system;
    PerturbationConfig perturbation;
    FamilyConfig family;
    OrbitSelection orbit;
    int m = 1;
    int l = 1;
    std::optional<SweepConfig> sweep;
    std::vector<double> epsilon;
    ToleranceConfig tolerances;
    std::string output = "out";
};

/// Throws ConfigError with the offending key path.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
std::string dump_config(const ScenarioConfig& cfg);

/// Applies KEY=VALUE (dotted path into the JSON document) before parsing.
/// VALUE is read as JSON, falling back to a string.
std::string apply_override(const std::string& json_text, const std::string& assignment);

/// 16 hex digits identifying the canonical form of the config, output
/// directory excluded.
std::string config_hash(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

HamiltonianSystem build_system(const SystemConfig& c);
/// Perturbation with forcing period delta; `override_value` replaces the
/// sweep parameter when given.
PerturbationField build_perturbation(const ScenarioConfig& c, double delta,
                                     std::optional<double> override_value = std::nullopt);
PerturbationBuilder perturbation_builder(const ScenarioConfig& c);

ShootingOptions shooting_options(const ScenarioConfig& c);
MelnikovOptions melnikov_options(const ScenarioConfig& c);
FloquetTolerances floquet_tolerances(const ScenarioConfig& c);
EpsilonPolicy epsilon_policy(const ScenarioConfig& c);

/// Seed orbit from the linear mode, then continuation.
OrbitFamily build_family(const ScenarioConfig& c, const HamiltonianSystem& sys);
/// Reference period T(0) of the continued linear mode.
double reference_period(const ScenarioConfig& c, const HamiltonianSystem& sys);
/// Orbit picked by c.orbit, with m cycles. Throws PreconditionError when none matches.
PeriodicOrbit select_orbit(const ScenarioConfig& c, const OrbitFamily& family);

}  // namespace nnmstab
