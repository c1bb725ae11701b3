#pragma once

// Direct computation of forced-damped periodic orbits by Newton iteration on
// the period map, their measured multipliers, and scoring of predictions.

#include "nnmstab/dynsys.hpp"
#include "nnmstab/stability.hpp"

#include <iosfwd>
#include <optional>

namespace nnmstab {

struct VerifyConfig {
    double epsilon = 0.0;
    double forcing_period = 0.0;  ///< delta
    int cycles_l = 1;             ///< orbit period is l delta
    Vec seed;
    double newton_tol = 1e-10;  ///< relative to the system scale
    int max_iter = 30;
    double integration_tol = 1e-12;
    /// Converged orbits farther than this fraction of the seed orbit size
    /// from the seed do not count as persisting from it.
    double persistence_radius = 0.1;
    /// When Newton fails at eps, eps is halved up to this many times until
    /// it converges, and the orbit is then continued back up to eps.
    int epsilon_halvings = 6;
};

struct PerturbedOrbit {
    PhaseState initial_condition;
    double period = 0.0;
    Mat monodromy;  ///< P(eps)
    CVec multipliers;
    double residual = 0.0;
    int iterations = 0;
    std::vector<double> residual_history;
};

/// Fixed point of the time-l delta map. The Jacobian P - I comes from the
/// eps-perturbed variational flow. Throws NoConvergence on divergence after
/// continuation in eps.
PerturbedOrbit find_perturbed_orbit(const HamiltonianSystem& sys, const PerturbationField& g,
                                    const VerifyConfig& cfg);

enum class MeasuredLabel { stable, unstable, marginal };
std::string to_string(MeasuredLabel l);

struct MeasuredMultipliers {
    CVec mu;
    Vec moduli;  ///< descending
    MeasuredLabel label = MeasuredLabel::marginal;
};

/// Eigenvalues of P(eps); stable when every |mu| < 1 - band, unstable when
/// some |mu| > 1 + band.
MeasuredMultipliers measured_multipliers(const PerturbedOrbit& po, double dead_band = 1e-7);

struct Persistence {
    bool converged = false;
    bool persists = false;
    double distance = 0.0;  ///< |xi - seed|
    double radius = 0.0;    ///< acceptance radius used
    std::optional<PerturbedOrbit> orbit;
    std::string reason;
};

/// Newton from the seed; persistence means convergence within the
/// acceptance radius around the seed (radius = persistence_radius times the
/// largest excursion |x0(t)| along seed_orbit).
Persistence check_persistence(const HamiltonianSystem& sys, const PerturbationField& g, const VerifyConfig& cfg,
                              const PeriodicOrbit& seed_orbit);

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct ScoreRow {
    double epsilon = 0.0;
    std::vector<double> predicted;  ///< moduli
    std::vector<double> measured;
    double error = 0.0;             ///< max |pred - meas| after matching
    bool verdict_agrees = true;
};

struct ScoreReport {
    std::vector<ScoreRow> rows;  ///< in the order given
    /// log(e_i / e_{i+1}) / log(eps_i / eps_{i+1}) for consecutive rows.
    std::vector<double> orders;
    double mean_order() const;
};

/// Each measured modulus is matched to the closest unused predicted one.
ScoreRow score_row(double eps, const std::vector<double>& predicted, const std::vector<double>& measured,
                   bool verdict_agrees = true);
ScoreReport score(std::vector<ScoreRow> rows);

/// Verification CSV: epsilon, zero id, converged, period, measured and
/// predicted moduli, error, verdict agreement.
struct VerificationRecord {
    double epsilon = 0.0;
    int zero = 0;
    bool converged = false;
    double period = 0.0;
    std::vector<double> measured;
    std::vector<double> predicted;
    double error = 0.0;
    std::string predicted_verdict;
    std::string measured_label;
    bool agrees = false;
};
void write_verification_csv(std::ostream& os, const std::vector<VerificationRecord>& rows);

}  // namespace nnmstab
