#include "support.hpp"

#include "nnmstab/stability.hpp"
#include "nnmstab/verify.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace nnmstab;
using namespace nnmstab::testing;

namespace {

const double kPi = std::numbers::pi;

struct Case {
    ScenarioConfig cfg;
    HamiltonianSystem sys;
    OrbitFamily family;
    PeriodicOrbit orbit;
    ResonanceSpec spec;
    PerturbationField g;
    MelnikovCurve curve;
    double slope;

    explicit Case(const std::string& file)
        : cfg(load_config(config_path(file))),
          sys(build_system(cfg.system)),
          family(build_family(cfg, sys)),
          orbit(select_orbit(cfg, family)),
          spec(ResonanceSpec::for_orbit(orbit, cfg.l)),
          g(build_perturbation(cfg, spec.delta)),
          curve(melnikov(sys, orbit, g, spec, melnikov_options(cfg))),
          slope(period_derivative(family, orbit.h)) {}

    std::vector<ZeroAnalysis> analyses() const {
        std::vector<ZeroAnalysis> out;
        for (const auto& z : curve.zeros) out.push_back(analyse_zero(sys, curve, g, z, slope));
        return out;
    }
};

const Case& mass_damping() {
    static const Case c("gyroscopic_mass_damping.json");
    return c;
}

const Case& stiffness_damping() {
    static const Case c("gyroscopic_stiffness_damping.json");
    return c;
}

// Monodromy in (q1, q2, p1, p2) with a Jordan block at +1 on (q1, p1) and
// the given 2x2 block on (q2, p2).
Mat synthetic_monodromy(const Mat& block, double a = -0.3) {
    Mat P = Mat::Zero(4, 4);
    P(0, 0) = P(2, 2) = 1.0;
    P(0, 2) = a;
    P(1, 1) = block(0, 0);
    P(1, 3) = block(0, 1);
    P(3, 1) = block(1, 0);
    P(3, 3) = block(1, 1);
    return P;
}

Mat rotation(double t) {
    Mat R(2, 2);
    R << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    return R;
}

StabilityInputs synthetic_inputs(const Mat& block, double Tp, double Mp, double CT, std::vector<double> CN) {
    StabilityInputs in;
    in.spectrum = spectral_summary(synthetic_monodromy(block, -Tp));
    in.zero.derivative = Mp;
    in.period_slope = Tp;
    in.tau = 2.0;
    in.m = 1;
    in.melnikov_scale = 1.0;
    in.separation = 1.0;
    in.contractions.subspaces.push_back({SubspaceKind::tangent, CT, 0.0});
    double sum = CT;
    for (double c : CN) {
        in.contractions.subspaces.push_back({SubspaceKind::normal_pair, c, 0.0});
        sum += c;
    }
    in.contractions.full = sum / (1 + CN.size());
    return in;
}

}  // namespace

TEST(Contraction, InvariantUnderChangeOfBasis) {
    const auto& C = stiffness_damping();
    const std::vector<InvariantSubspace> subs = decompose(C.sys, C.orbit);
    const PullbackIntegral psi = pullback_integral(C.sys, C.orbit, C.g, C.spec);
    std::mt19937 rng(21);
    for (const auto& V : subs) {
        const double ref = volume_contraction(C.orbit, psi, V);
        for (int trial = 0; trial < 20; ++trial) {
            Mat Rc = random_matrix(rng, 2, 2);
            while (std::abs(Rc.determinant()) < 0.1) Rc = random_matrix(rng, 2, 2);
            const InvariantSubspace W = make_subspace(V.R * Rc, C.orbit.monodromy, V.kind);
            EXPECT_NEAR(volume_contraction(C.orbit, psi, W), ref, 1e-8 * std::abs(ref));
        }
    }
}

TEST(Contraction, TraceIsAdditiveOverTheDecomposition) {
    for (const Case* C : {&mass_damping(), &stiffness_damping()}) {
        const ContractionReport r =
            contractions(C->sys, C->orbit, C->g, C->spec, decompose(C->sys, C->orbit));
        EXPECT_LE(r.additivity_defect(C->sys.dof()), 1e-6);
        EXPECT_EQ(r.subspaces.front().kind, SubspaceKind::tangent);
    }
}

TEST(Contraction, MassProportionalDampingIsUniform) {
    const auto& C = mass_damping();
    const std::optional<double> alpha = uniform_contraction_check(C.sys, C.g, C.orbit);
    ASSERT_TRUE(alpha.has_value());
    EXPECT_NEAR(*alpha, 0.76376, 1e-12);
    const ContractionReport r = contractions(C.sys, C.orbit, C.g, C.spec, decompose(C.sys, C.orbit));
    EXPECT_NEAR(r.tangent(), *alpha, 1e-6);
    for (double c : r.normal()) EXPECT_NEAR(c, *alpha, 1e-6);
    EXPECT_NEAR(r.full, *alpha, 1e-6);
}

TEST(Contraction, StiffnessDampingIsNotUniform) {
    const auto& C = stiffness_damping();
    EXPECT_FALSE(uniform_contraction_check(C.sys, C.g, C.orbit).has_value());
}

TEST(Contraction, ChainDampingIsUniform) {
    const ScenarioConfig cfg = load_config(config_path("chain_parametric.json"));
    const HamiltonianSystem sys = build_system(cfg.system);
    const PeriodicOrbit o = select_orbit(cfg, build_family(cfg, sys));
    const ResonanceSpec spec = ResonanceSpec::for_orbit(o, cfg.l);
    const PerturbationField g = build_perturbation(cfg, spec.delta);
    const std::optional<double> alpha = uniform_contraction_check(sys, g, o);
    ASSERT_TRUE(alpha.has_value());
    EXPECT_NEAR(*alpha, 0.121, 1e-12);
    const ContractionReport r = contractions(sys, o, g, spec, decompose(sys, o));
    ASSERT_EQ(r.subspaces.size(), 3u);
    for (const auto& s : r.subspaces) EXPECT_NEAR(s.C, 0.121, 1e-6);
}

TEST(Contraction, ReversingTheDissipationFlipsTheSign) {
    const auto& C = stiffness_damping();
    ScenarioConfig flipped = C.cfg;
    flipped.perturbation.gyroscopic.alpha = -C.cfg.perturbation.gyroscopic.alpha;
    flipped.perturbation.gyroscopic.beta = -C.cfg.perturbation.gyroscopic.beta;
    const PerturbationField gf = build_perturbation(flipped, C.spec.delta);
    const std::vector<InvariantSubspace> subs = decompose(C.sys, C.orbit);
    const ContractionReport a = contractions(C.sys, C.orbit, C.g, C.spec, subs);
    const ContractionReport b = contractions(C.sys, C.orbit, gf, C.spec, subs);
    for (std::size_t k = 0; k < subs.size(); ++k) EXPECT_EQ(a.subspaces[k].C, -b.subspaces[k].C);
}

TEST(Contraction, ZeroPerturbationContractsNothing) {
    const auto& C = mass_damping();
    const PerturbationField g = zero_perturbation(2, C.spec.delta);
    for (const auto& V : decompose(C.sys, C.orbit))
        EXPECT_EQ(volume_contraction(C.sys, C.orbit, g, C.spec, V), 0.0);
}

TEST(Contraction, StaleSubspaceIsRejected) {
    const auto& C = mass_damping();
    const PeriodicOrbit other = C.family.orbits()[C.family.size() / 3];
    const InvariantSubspace V = decompose(C.sys, other)[1];
    EXPECT_THROW(volume_contraction(C.sys, C.orbit, C.g, C.spec, V), StaleSubspace);
}

TEST(Contraction, DeterminantResidualIsSecondOrder) {
    const auto& C = stiffness_damping();
    const PullbackIntegral psi = pullback_integral(C.sys, C.orbit, C.g, C.spec);
    const double P = C.orbit.period();
    for (const auto& V : decompose(C.sys, C.orbit)) {
        const double Cv = volume_contraction(C.orbit, psi, V);
        const int v = V.half_dim();
        double res[2];
        int k = 0;
        for (double eps : {1e-3, 1e-4}) {
            const Mat M = V.B * (Mat::Identity(2 * v, 2 * v) + eps * V.S * psi.Psi * V.R);
            res[k++] = std::abs(M.determinant() - (1.0 - eps * P * v * Cv));
        }
        const double order = std::log10(res[0] / res[1]);
        EXPECT_GT(order, 1.7) << to_string(V.kind);
        EXPECT_LT(order, 2.3) << to_string(V.kind);
    }
}

TEST(Verdict, MassDampingZerosAlternate) {
    const auto& C = mass_damping();
    EXPECT_GT(C.slope, 0.0);
    const std::vector<ZeroAnalysis> rows = C.analyses();
    ASSERT_EQ(rows.size(), 6u);
    for (const auto& a : rows) {
        if (a.zero.derivative > 0.0) {
            EXPECT_EQ(a.verdict.verdict, Verdict::asymptotically_stable);
            EXPECT_EQ(a.verdict.clause, "all-contractions-positive");
        } else {
            EXPECT_EQ(a.verdict.verdict, Verdict::unstable);
            EXPECT_EQ(a.verdict.clause, "tangent-real-split");
        }
        EXPECT_NEAR(a.verdict.C_T, 0.76376, 1e-6);
        // the rebased orbit puts the zero at s = 0
        EXPECT_LE(std::abs(melnikov_value(C.sys, a.anchored, C.g, C.spec, 0.0)), 1e-8 * C.curve.scale);
    }
}

TEST(Verdict, ConservativeInstabilityDecidesFirst) {
    Mat hyper = Mat::Zero(2, 2);
    hyper(0, 0) = 1.5;
    hyper(1, 1) = 1.0 / 1.5;
    const StabilityVerdict v = classify(synthetic_inputs(hyper, -1.0, -1.0, 0.5, {0.5}));
    EXPECT_EQ(v.verdict, Verdict::unstable);
    EXPECT_EQ(v.clause, "conservative-multiplier-off-unit-circle");
}

TEST(Verdict, InstabilityClauses) {
    const Mat rot = rotation(1.1);
    EXPECT_EQ(classify(synthetic_inputs(rot, 1.0, -1.0, 0.5, {0.5})).clause, "tangent-real-split");
    EXPECT_EQ(classify(synthetic_inputs(rot, 1.0, 1.0, -0.5, {0.5})).clause, "tangent-contraction-negative");
    EXPECT_EQ(classify(synthetic_inputs(rot, 1.0, 1.0, 0.5, {-0.5})).clause, "normal-contraction-negative");
    const StabilityVerdict all = classify(synthetic_inputs(rot, 1.0, -1.0, 0.5, {-0.5}));
    EXPECT_EQ(all.verdict, Verdict::unstable);
    EXPECT_EQ(all.fired.size(), 2u);
}

TEST(Verdict, StabilityNeedsEveryClause) {
    const Mat rot = rotation(1.1);
    const StabilityVerdict s = classify(synthetic_inputs(rot, -1.0, -1.0, 0.5, {0.5}));
    EXPECT_EQ(s.verdict, Verdict::asymptotically_stable);
    EXPECT_TRUE(s.fired.empty());
    const StabilityVerdict ns = classify(synthetic_inputs(rot, -1.0, -1.0, 0.5, {0.0}));
    EXPECT_EQ(ns.verdict, Verdict::inconclusive);
    EXPECT_EQ(ns.clause, "neimark-sacker");
    const StabilityVerdict sn = classify(synthetic_inputs(rot, -1.0, 1e-12, 0.5, {0.5}));
    EXPECT_EQ(sn.verdict, Verdict::inconclusive);
    EXPECT_EQ(sn.clause, "saddle-node-candidate");
    const StabilityVerdict flat = classify(synthetic_inputs(rot, 0.0, 1.0, 0.5, {0.5}));
    EXPECT_EQ(flat.clause, "period-slope-degenerate");
    const StabilityVerdict ct = classify(synthetic_inputs(rot, 1.0, 1.0, 0.0, {0.5}));
    EXPECT_EQ(ct.clause, "tangent-contraction-zero");
}

TEST(Verdict, MissingNormalContractionIsIncomplete) {
    StabilityInputs in = synthetic_inputs(rotation(1.1), 1.0, 1.0, 0.5, {});
    EXPECT_THROW(classify(in), IncompleteInput);
}

TEST(Verdict, OneDegreeOfFreedomMatchesTheTangentConditions) {
    // n = 1: stable exactly when T' M' > 0 and the damping is positive
    const HamiltonianSystem sys = models::duffing();
    const PeriodicOrbit o = duffing_orbit(sys, 0.5);
    const ResonanceSpec spec = ResonanceSpec::for_orbit(o, 1);
    const double Tp = duffing_period_slope(0.5);
    for (double alpha : {0.05, -0.05}) {
        const PerturbationField g = models::damped_harmonic(1, alpha, {{0, 0.2, 1, 0.0, -1}}, spec.delta);
        const MelnikovCurve c = melnikov(sys, o, g, spec);
        ASSERT_EQ(c.zeros.size(), 2u);
        for (const auto& z : c.zeros) {
            const ZeroAnalysis a = analyse_zero(sys, c, g, z, Tp);
            const bool classical_stable = Tp * z.derivative > 0.0 && alpha > 0.0;
            EXPECT_EQ(a.verdict.verdict == Verdict::asymptotically_stable, classical_stable);
            EXPECT_NE(a.verdict.verdict, Verdict::inconclusive);
            EXPECT_NEAR(a.verdict.C_T, alpha, 1e-8);
        }
    }
}

TEST(Prediction, ZeroEpsilonLeavesUnitModuli) {
    const auto& C = mass_damping();
    for (const auto& a : C.analyses()) {
        const MultiplierPrediction mp = predict_multipliers(a.inputs, 0.0);
        for (const auto& m : mp.multipliers) {
            EXPECT_EQ(m.modulus, 1.0);
            EXPECT_EQ(m.partner_modulus, 1.0);
        }
    }
}

TEST(Prediction, UniformDampingShrinksEveryPairAlike) {
    const auto& C = mass_damping();
    const double eps = 0.01;
    for (const auto& a : C.analyses()) {
        if (a.verdict.verdict != Verdict::asymptotically_stable) continue;
        const MultiplierPrediction mp = predict_multipliers(a.inputs, eps);
        const double expected = 1.0 - eps * (C.orbit.tau / 2.0) * 0.76376;
        for (const auto& m : mp.multipliers) EXPECT_NEAR(m.modulus, expected, 1e-8);
    }
}

TEST(Prediction, EpsilonGuard) {
    StabilityInputs in = synthetic_inputs(rotation(1.1), -1.0, -1.0, 0.5, {0.5});
    in.separation = 0.1;
    EXPECT_EQ(predict_multipliers(in, 0.005).guard, EpsilonGuard::ok);
    const MultiplierPrediction w = predict_multipliers(in, 0.02);
    EXPECT_EQ(w.guard, EpsilonGuard::warn);
    EXPECT_FALSE(w.warnings.empty());
    EXPECT_THROW(predict_multipliers(in, 0.05), PreconditionError);
    EXPECT_THROW(predict_multipliers(in, -0.01), DomainError);
}

TEST(Prediction, ContractionsRecoveredFromMeasuredModuli) {
    const auto& C = stiffness_damping();
    const double eps = 1e-3;
    for (const auto& a : C.analyses()) {
        if (a.verdict.verdict != Verdict::asymptotically_stable) continue;
        VerifyConfig vc;
        vc.epsilon = eps;
        vc.forcing_period = C.spec.delta;
        vc.cycles_l = C.cfg.l;
        vc.seed = a.anchored.z;
        const PerturbedOrbit po = find_perturbed_orbit(C.sys, C.g, vc);
        const MeasuredMultipliers mm = measured_multipliers(po);
        std::vector<double> recovered;
        for (Eigen::Index k = 0; k < mm.moduli.size(); ++k)
            recovered.push_back(2.0 * (1.0 - mm.moduli(k)) / (eps * C.orbit.period()));
        std::vector<double> predicted{a.verdict.C_T};
        for (double c : a.verdict.C_N) predicted.push_back(c);
        for (double p : predicted) {
            int hits = 0;
            for (double r : recovered) hits += std::abs(r - p) <= 0.05 * std::abs(p);
            EXPECT_EQ(hits, 2) << "C = " << p;
        }
        return;
    }
    FAIL() << "no stable zero";
}

TEST(Strips, ChainStripsFollowTheRowSlope) {
    ScenarioConfig cfg = load_config(config_path("chain_parametric.json"));
    cfg.sweep->values = {0.121};
    cfg.sweep->rows = 12;
    const HamiltonianSystem sys = build_system(cfg.system);
    const OrbitFamily fam = build_family(cfg, sys);
    SweepOptions so;
    so.l = cfg.l;
    so.params = cfg.sweep->values;
    so.reference_period = reference_period(cfg, sys);
    so.omega_bar_min = cfg.sweep->omega_bar_min;
    so.omega_bar_max = cfg.sweep->omega_bar_max;
    so.rows = cfg.sweep->rows;
    so.quadrature_samples = cfg.sweep->quadrature_samples;
    so.theta_samples = cfg.sweep->theta_samples;
    const SweepResult res = family_sweep(fam, perturbation_builder(cfg), so);
    const std::vector<StripPoint> strips = verdict_strips(sys, res, perturbation_builder(cfg));
    ASSERT_FALSE(strips.empty());
    for (const auto& p : strips) {
        if (!p.applicable) continue;
        // hardening rows: dM/dtheta < 0 is stable
        const Verdict expected = p.dM_dtheta < 0 ? Verdict::asymptotically_stable : Verdict::unstable;
        EXPECT_EQ(p.analysis.verdict.verdict, expected) << p.omega_bar << " " << p.theta;
    }
    std::ostringstream os;
    write_strip_csv(os, strips);
    EXPECT_NE(os.str().find("param,omega_bar,theta"), std::string::npos);
}
