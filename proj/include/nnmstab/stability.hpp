#pragma once

// Volume contractions of a perturbation along a conservative orbit, the
// resulting stability verdicts for persisting orbits, and first-order
// predictions of the perturbed multiplier moduli.

#include "nnmstab/floquet.hpp"
#include "nnmstab/melnikov.hpp"

#include <iosfwd>
#include <optional>

namespace nnmstab {

/// Psi_g = int_0^{m tau} X0^{-1} d_x g(x0(t), t) X0 dt.
struct PullbackIntegral {
    Mat Psi;
    double error = 0.0;  ///< max absolute quadrature error estimate over the entries
};

/// Forcing period is spec.delta; the orbit anchor is the phase origin of g.
PullbackIntegral pullback_integral(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                                   const PerturbationField& g, const ResonanceSpec& spec, double tol = 1e-12);

/// C_V = -trace(S_V Psi_g R_V) / (m tau v). Throws StaleSubspace when V is not
/// invariant for the orbit's monodromy (residual above 1e-6).
double volume_contraction(const PeriodicOrbit& orbit, const PullbackIntegral& psi, const InvariantSubspace& V);
double volume_contraction(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                          const ResonanceSpec& spec, const InvariantSubspace& V, double tol = 1e-12);

struct SubspaceContraction {
    SubspaceKind kind = SubspaceKind::custom;
    double C = 0.0;
    double error = 0.0;
};

struct ContractionReport {
    std::vector<SubspaceContraction> subspaces;  ///< tangent first, then normal pairs
    double full = 0.0;                           ///< C over the whole phase space
    std::optional<double> uniform_alpha;
    double error = 0.0;

    double tangent() const;
    std::vector<double> normal() const;
    /// |n C_full - (C_T + sum C_N)| / max(|n C_full|, tiny).
    double additivity_defect(int dof) const;
};

/// Contractions for every subspace of the decomposition of the orbit.
ContractionReport contractions(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                               const PerturbationField& g, const ResonanceSpec& spec,
                               const std::vector<InvariantSubspace>& subs, double tol = 1e-12);

/// alpha when d_q Q is symmetric and d_p Q = -alpha I at samples along the orbit.
std::optional<double> uniform_contraction_check(const HamiltonianSystem& sys, const PerturbationField& g,
                                                const PeriodicOrbit& orbit, int samples = 32,
                                                double tol = 1e-8);

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

enum class Verdict { unstable, asymptotically_stable, inconclusive };
std::string to_string(Verdict v);

struct PredictedMultiplier {
    SubspaceKind kind = SubspaceKind::custom;
    int index = 0;        ///< position in the decomposition
    Complex mu;           ///< first-order multiplier (representative)
    double modulus = 1.0;
    double partner_modulus = 1.0;
};

enum class EpsilonGuard { ok, warn, refuse };
std::string to_string(EpsilonGuard g);

struct StabilityInputs {
    SpectralSummary spectrum;   ///< conservative limit
    MelnikovZero zero;          ///< s0 and M'(s0)
    double period_slope = 0.0;  ///< T'(h)
    ContractionReport contractions;
    int m = 1;
    double tau = 0.0;
    double melnikov_scale = 1.0;  ///< scale of M for the dead-band on T' M'
    double separation = 0.0;      ///< min sep between decomposition blocks
};

struct StabilityVerdict {
    Verdict verdict = Verdict::inconclusive;
    std::string clause;                 ///< clause that decided the verdict
    std::vector<std::string> fired;     ///< every instability clause that fired
    std::vector<std::string> flags;     ///< missing conditions, Neimark-Sacker, degenerate spectra
    double period_slope = 0.0;
    double melnikov_derivative = 0.0;
    double C_T = 0.0;
    std::vector<double> C_N;
};

/// Decision tree: off-circle multipliers, instability clauses on the tangent
/// and normal spaces, then the stability clauses. Sign tests use a relative
/// dead-band. Throws IncompleteInput when a normal contraction is missing.
StabilityVerdict classify(const StabilityInputs& in, double dead_band = 1e-8);

struct EpsilonPolicy {
    double warn = 0.1;    ///< fraction of the min separation
    double refuse = 0.5;
};

struct MultiplierPrediction {
    double epsilon = 0.0;
    EpsilonGuard guard = EpsilonGuard::ok;
    std::vector<PredictedMultiplier> multipliers;
    std::vector<std::string> warnings;
};

/// |mu| = 1 - eps (m tau / 2) C_V for normal pairs; the tangent pair splits
/// along the real axis when a M' < 0. Throws PreconditionError when eps is
/// past the refusal threshold.
MultiplierPrediction predict_multipliers(const StabilityInputs& in, double eps, const EpsilonPolicy& policy = {});

/// Full pipeline for one zero: rebase at s0, decompose, contract, classify.
struct ZeroAnalysis {
    MelnikovZero zero;
    PeriodicOrbit anchored;  ///< conservative orbit rebased so the zero sits at s = 0
    StabilityInputs inputs;
    StabilityVerdict verdict;
};
ZeroAnalysis analyse_zero(const HamiltonianSystem& sys, const MelnikovCurve& curve, const PerturbationField& g,
                          const MelnikovZero& zero, double period_slope, const FloquetTolerances& ftol = {},
                          double tol = 1e-12);

/// One row per zero: s0, theta0, M', T', C_T, C_N..., verdict, clause, predicted moduli, guard.
void write_verdict_csv(std::ostream& os, const std::vector<ZeroAnalysis>& rows, double eps,
                       const EpsilonPolicy& policy = {});


// ---------------------------------------------------------------------------
// Verdicts along level sets
// ---------------------------------------------------------------------------

/// Verdict at one zero of a sweep row (a point of the zero contour).
struct StripPoint {
    double param = 0.0;
    std::size_t row = 0;
    double omega_bar = 0.0;
    double theta = 0.0;
    double dM_dtheta = 0.0;
    bool applicable = true;  ///< false on rows flagged by the sweep
    std::string row_flag;
    ZeroAnalysis analysis;
};

struct StripOptions {
    int l = 1;
    FloquetTolerances floquet;
    double integration_tol = 1e-12;
    int threads = 1;
};

/// Sign changes of M along theta in every row, located by linear
/// interpolation and classified with the row's T'.
std::vector<StripPoint> verdict_strips(const HamiltonianSystem& sys, const SweepResult& sweep,
                                       const PerturbationBuilder& builder, const StripOptions& opt = {});

/// Strip CSV: param, omega_bar, theta, dM/dtheta, T', C_T, C_N..., verdict, clause, row flag.
void write_strip_csv(std::ostream& os, const std::vector<StripPoint>& strips);

}  // namespace nnmstab
