#include "support.hpp"

#include "nnmstab/contour.hpp"
#include "nnmstab/melnikov.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace nnmstab;
using namespace nnmstab::testing;

namespace {

const double kPi = std::numbers::pi;

struct Duffing {
    ScenarioConfig cfg = load_config(config_path("duffing.json"));
    HamiltonianSystem sys = build_system(cfg.system);
    OrbitFamily family = build_family(cfg, sys);
    PeriodicOrbit orbit = select_orbit(cfg, family);
    ResonanceSpec spec = ResonanceSpec::for_orbit(orbit, cfg.l);
    PerturbationField g = build_perturbation(cfg, spec.delta);
};

const Duffing& duffing() {
    static const Duffing d;
    return d;
}

struct Gyro {
    ScenarioConfig cfg = load_config(config_path("gyroscopic_mass_damping.json"));
    HamiltonianSystem sys = build_system(cfg.system);
    PeriodicOrbit orbit = select_orbit(cfg, build_family(cfg, sys));
    ResonanceSpec spec = ResonanceSpec::for_orbit(orbit, cfg.l);
    PerturbationField g = build_perturbation(cfg, spec.delta);
    MelnikovCurve curve = melnikov(sys, orbit, g, spec, melnikov_options(cfg));
};

const Gyro& gyro() {
    static const Gyro g;
    return g;
}

// Trapezoid rule on an RK4 orbit with the damped harmonic force written out.
double duffing_oracle(const PeriodicOrbit& o, double alpha, double amp, double delta, double s, int nodes) {
    const DuffingSample x = duffing_rk4(o.z(0), o.z(1), o.tau, nodes);
    double sum = 0.0;
    for (int k = 0; k < nodes; ++k) {
        const double u = o.tau * k / nodes;
        const double p = x.p[k];
        sum += p * (-alpha * p + amp * std::cos(2 * kPi * (u - s) / delta));
    }
    return sum * o.tau / nodes;
}

// Curve with prescribed samples on [0, P), interpolant only.
MelnikovCurve synthetic_curve(double P, int N, const std::function<double(double)>& f) {
    MelnikovCurve c;
    c.orbit.tau = P;
    c.spec.m = 1;
    c.spec.l = 1;
    c.spec.delta = P;
    c.s.resize(N);
    c.values.resize(N);
    for (int k = 0; k < N; ++k) {
        c.s(k) = P * k / N;
        c.values(k) = f(c.s(k));
    }
    c.scale = c.values.cwiseAbs().maxCoeff();
    c.build_interpolant();
    return c;
}

}  // namespace

TEST(Melnikov, DuffingMatchesBruteForceQuadrature) {
    const auto& D = duffing();
    const MelnikovCurve c = melnikov(D.sys, D.orbit, D.g, D.spec, melnikov_options(D.cfg));
    const double alpha = D.cfg.perturbation.alpha;
    const double amp = D.cfg.perturbation.harmonics.at(0).amplitude;
    for (int k = 0; k < c.s.size(); k += 16) {
        const double oracle = duffing_oracle(D.orbit, alpha, amp, D.spec.delta, c.s(k), 100000);
        EXPECT_NEAR(c.values(k), oracle, 1e-7) << "s = " << c.s(k);
        EXPECT_NEAR(melnikov_value(D.sys, D.orbit, D.g, D.spec, c.s(k)), oracle, 1e-7);
    }
    EXPECT_LE(c.error_estimate, 1e-7);
}

TEST(Melnikov, DuffingHasTwoSimpleZerosOfOppositeSlope) {
    const auto& D = duffing();
    const MelnikovCurve c = melnikov(D.sys, D.orbit, D.g, D.spec, melnikov_options(D.cfg));
    ASSERT_EQ(c.zeros.size(), 2u);
    EXPECT_LT(c.zeros[0].derivative * c.zeros[1].derivative, 0.0);
    for (const auto& z : c.zeros) {
        EXPECT_EQ(z.type, MelnikovZero::Type::simple);
        EXPECT_LE(std::abs(c.evaluate(z.s)), 1e-10 * c.scale);
    }
}

TEST(Melnikov, EnergyFormEqualsPowerForm) {
    const auto& G = gyro();
    MelnikovOptions opt = melnikov_options(G.cfg);
    opt.grid_size = 64;
    const MelnikovCurve power = melnikov(G.sys, G.orbit, G.g, G.spec, opt);
    const MelnikovCurve work = melnikov_energy_form(G.sys, G.orbit, G.g, G.spec, opt);
    const double tol = 2.0 * std::max(power.error_estimate + work.error_estimate, opt.integration_tol);
    EXPECT_LE((power.values - work.values).cwiseAbs().maxCoeff(), tol * std::max(1.0, power.scale));
}

TEST(Melnikov, DerivativeMatchesFiniteDifferences) {
    const auto& G = gyro();
    for (int k = 0; k < G.curve.s.size(); k += 20) {
        const double s = G.curve.s(k);
        const double h = 1e-4 * G.curve.period();
        const double fd = (G.curve.evaluate(s + h) - G.curve.evaluate(s - h)) / (2 * h);
        EXPECT_NEAR(G.curve.derivatives(k), fd, 1e-6 * std::max(1.0, G.curve.scale));
        EXPECT_NEAR(G.curve.interpolate_derivative(s), G.curve.derivatives(k), 1e-6 * G.curve.scale);
    }
}

TEST(Melnikov, PhaseShiftOfTheAnchorShiftsTheCurve) {
    const auto& G = gyro();
    const double a = 0.37 * G.orbit.tau;
    const PeriodicOrbit shifted = rebase(G.sys, G.orbit, a);
    for (double s : {0.0, 0.9, 2.3}) {
        const double lhs = melnikov_value(G.sys, shifted, G.g, G.spec, s);
        const double rhs = melnikov_value(G.sys, G.orbit, G.g, G.spec, std::fmod(s + a, G.curve.period()));
        EXPECT_NEAR(lhs, rhs, 1e-8);
    }
}

TEST(Melnikov, SimpleZerosComeInPairsWithAlternatingSlopes) {
    const auto& zeros = gyro().curve.zeros;
    ASSERT_EQ(zeros.size(), 6u);
    for (std::size_t i = 0; i < zeros.size(); ++i) {
        EXPECT_EQ(zeros[i].type, MelnikovZero::Type::simple);
        EXPECT_LT(zeros[i].derivative * zeros[(i + 1) % zeros.size()].derivative, 0.0);
    }
}

TEST(Melnikov, HarmonicFitOfTheCrossingOrbit) {
    const auto& G = gyro();
    const HarmonicFit fit = fit_harmonic(G.curve, 2 * kPi / G.spec.delta);
    EXPECT_LT(fit.rms_residual, 1e-3 * fit.amplitude);
    EXPECT_NEAR(fit.amplitude, 1.4402, 0.01 * 1.4402);
}

TEST(Melnikov, ZeroPerturbationGivesZeroCurve) {
    const auto& D = duffing();
    const PerturbationField g = zero_perturbation(1, D.spec.delta);
    const MelnikovCurve c = melnikov(D.sys, D.orbit, g, D.spec);
    EXPECT_EQ(c.values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(c.zeros.empty());
    EXPECT_FALSE(c.warnings.empty());
}

TEST(Melnikov, AutonomousDampingGivesAConstantCurve) {
    const auto& D = duffing();
    const PerturbationField g = models::damped_harmonic(1, 0.3, {}, D.spec.delta);
    const MelnikovCurve c = melnikov(D.sys, D.orbit, g, D.spec);
    EXPECT_LT(c.values.maxCoeff() - c.values.minCoeff(), 1e-9);
    EXPECT_LT(c.values.maxCoeff(), 0.0);
    EXPECT_LT(c.derivatives.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_TRUE(c.zeros.empty());
}

TEST(Melnikov, DerivativeNeedsATimeDerivativeOfTheForce) {
    const auto& D = duffing();
    PerturbationField g(1, D.spec.delta, [](const Vec& x, double t, double d) {
        return Vec::Constant(1, 0.1 * std::cos(2 * kPi * t / d) - 0.05 * x(1));
    });
    EXPECT_THROW(melnikov_derivative(D.sys, D.orbit, g, D.spec, 0.3), CapabilityError);
    g.allow_fd_time_derivative(true);
    const double fd = melnikov_derivative(D.sys, D.orbit, g, D.spec, 0.3);
    EXPECT_NEAR(fd, melnikov_derivative(D.sys, D.orbit, D.g, D.spec, 0.3), 1e-6);
}

TEST(Melnikov, ResonanceValidation) {
    const auto& D = duffing();
    ResonanceSpec bad{2, 4, 0.0};
    bad.delta = bad.m * D.orbit.tau / bad.l;
    EXPECT_THROW(bad.validate(with_cycles(D.sys, D.orbit, 2)), SpecError);
    ResonanceSpec off = D.spec;
    off.delta *= 1.01;
    EXPECT_THROW(melnikov(D.sys, D.orbit, D.g, off), SpecError);
}

TEST(Melnikov, TouchingZerosAreQuadratic) {
    const double P = 5.0;
    // 1 - cos touches zero at s = 0
    const MelnikovCurve c = synthetic_curve(P, 64, [&](double s) { return 1.0 - std::cos(2 * kPi * s / P); });
    MelnikovOptions opt;
    opt.polish_exact = false;
    const std::vector<MelnikovZero> zeros = find_zeros(c, opt);
    ASSERT_EQ(zeros.size(), 1u);
    EXPECT_EQ(zeros[0].type, MelnikovZero::Type::quadratic);
    EXPECT_NEAR(std::remainder(zeros[0].s, P), 0.0, 1e-4);
}

TEST(Melnikov, SyntheticSimpleZerosAreExact) {
    const double P = 3.0;
    const MelnikovCurve c = synthetic_curve(P, 64, [&](double s) { return std::sin(4 * kPi * s / P) + 0.5; });
    MelnikovOptions opt;
    opt.polish_exact = false;
    const std::vector<MelnikovZero> zeros = find_zeros(c, opt);
    ASSERT_EQ(zeros.size(), 4u);
    for (const auto& z : zeros) {
        EXPECT_NEAR(std::sin(4 * kPi * z.s / P), -0.5, 1e-9);
        EXPECT_EQ(z.type, MelnikovZero::Type::simple);
    }
    const HarmonicFit fit = fit_harmonic(c, 4 * kPi / P);
    EXPECT_NEAR(fit.offset, 0.5, 1e-12);
    EXPECT_NEAR(fit.amplitude, 1.0, 1e-12);
}

TEST(Contour, OneBlobOneClosedLoop) {
    Mat F(40, 60);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 60; ++j) F(i, j) = std::hypot(i - 20.0, j - 30.0) - 8.3;
    const std::vector<Polyline> lines = zero_contours(F);
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_TRUE(lines[0].closed);
}

TEST(Contour, TwoBlobsTwoLoops) {
    Mat F(40, 60);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 60; ++j)
            F(i, j) = std::min(std::hypot(i - 20.0, j - 12.0), std::hypot(i - 20.0, j - 45.0)) - 6.2;
    EXPECT_EQ(zero_contours(F).size(), 2u);
}

TEST(Contour, BlobAcrossThePeriodicSeamIsOneLoop) {
    Mat F(40, 60);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 60; ++j) {
            const double dj = std::min(std::abs(j - 1.0), 60.0 - std::abs(j - 1.0));
            F(i, j) = std::hypot(i - 20.0, dj) - 7.4;
        }
    const std::vector<Polyline> lines = zero_contours(F);
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_TRUE(lines[0].closed);
}

TEST(Contour, BandAroundTheCylinderGivesTwoLines) {
    Mat F(30, 50);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 50; ++j) F(i, j) = std::abs(i - 15.0) - 5.5 + 0.5 * std::sin(2 * kPi * j / 50.0);
    const std::vector<Polyline> lines = zero_contours(F);
    EXPECT_EQ(lines.size(), 2u);
}

TEST(Sweep, CompressedCountsDropRepeats) {
    EXPECT_EQ(compressed_counts({0, 0, 2, 2, 4, 4, 2, 0, 0}), (std::vector<int>{0, 2, 4, 2, 0}));
    EXPECT_TRUE(compressed_counts({}).empty());
}

namespace {

SweepOptions duffing_sweep_options(int threads) {
    SweepOptions o;
    o.l = 1;
    o.params = {0.05, 0.2, 50.0};
    o.reference_period = 2 * kPi;
    o.omega_bar_min = 1.1;
    o.omega_bar_max = 1.6;
    o.rows = 8;
    o.theta_samples = 40;
    o.quadrature_samples = 16;
    o.threads = threads;
    return o;
}

}  // namespace

TEST(Sweep, ResultDoesNotDependOnThreadCount) {
    const auto& D = duffing();
    const SweepResult a = family_sweep(D.family, perturbation_builder(D.cfg), duffing_sweep_options(1));
    const SweepResult b = family_sweep(D.family, perturbation_builder(D.cfg), duffing_sweep_options(3));
    ASSERT_EQ(a.levels.size(), b.levels.size());
    for (std::size_t p = 0; p < a.levels.size(); ++p) {
        EXPECT_TRUE(a.levels[p].M == b.levels[p].M);
        EXPECT_EQ(a.levels[p].zero_counts, b.levels[p].zero_counts);
    }
    std::ostringstream sa, sb;
    write_levelset_csv(sa, a);
    write_levelset_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
}

TEST(Sweep, StrongDampingEmptiesTheLevelSet) {
    const auto& D = duffing();
    const SweepResult r = family_sweep(D.family, perturbation_builder(D.cfg), duffing_sweep_options(1));
    ASSERT_EQ(r.rows.size(), 8u);
    const LevelSet& weak = r.levels[0];
    const LevelSet& strong = r.levels[2];
    EXPECT_GT(*std::max_element(weak.zero_counts.begin(), weak.zero_counts.end()), 0);
    EXPECT_EQ(*std::max_element(strong.zero_counts.begin(), strong.zero_counts.end()), 0);
    EXPECT_EQ(strong.components, 0);
    EXPECT_FALSE(strong.onset.has_value());
    EXPECT_TRUE(strong.contours.empty());
    for (int c : weak.zero_counts) EXPECT_EQ(c % 2, 0);
}
