#include "support.hpp"

#include "nnmstab/floquet.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace nnmstab;
using namespace nnmstab::testing;

namespace {

const double kPi = std::numbers::pi;

// H = 1/2 y^T D y in coordinates y = T^{-1} x with T symplectic and D the
// diagonal of uncoupled oscillators. Mode k lives in the plane T (e_qk, e_pk).
struct TransformedOscillators {
    Vec w;
    Mat T, Tinv, A;
    HamiltonianSystem sys;

    TransformedOscillators(const Vec& freqs, const Mat& T_)
        : w(freqs), T(T_), Tinv(symplectic_inverse(T_)), A(make_A(freqs, Tinv)), sys(make_sys(A)) {}

    static Mat make_A(const Vec& w, const Mat& Tinv) {
        const Eigen::Index n = w.size();
        Mat D = Mat::Zero(2 * n, 2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            D(i, i) = w(i) * w(i);
            D(n + i, n + i) = 1.0;
        }
        return Tinv.transpose() * D * Tinv;
    }
    static HamiltonianSystem make_sys(const Mat& A) {
        return HamiltonianSystem(
            static_cast<int>(A.rows() / 2), [A](const Vec& x) { return 0.5 * x.dot(A * x); },
            [A](const Vec& x) { return Vec(A * x); }, [A](const Vec&) { return A; }, "transformed-oscillators");
    }

    Mat plane(int k) const {
        const Eigen::Index n = w.size();
        Mat P(2 * n, 2);
        P.col(0) = T.col(k);
        P.col(1) = T.col(n + k);
        return P;
    }

    PeriodicOrbit mode_orbit(int k, double amp) const {
        const Eigen::Index n = w.size();
        Vec y = Vec::Zero(2 * n);
        y(k) = amp;
        return make_orbit(sys, T * y, 2 * kPi / w(k));
    }
};

// Orthogonal projector onto the column span.
Mat projector(const Mat& R) {
    const Eigen::HouseholderQR<Mat> qr(R);
    const Mat Q = qr.householderQ() * Mat::Identity(R.rows(), R.cols());
    return Q * Q.transpose();
}

const TransformedOscillators& three_dof() {
    static const TransformedOscillators s = [] {
        std::mt19937 rng(11);
        Vec w(3);
        w << 1.0, std::sqrt(2.0), std::sqrt(7.0);
        return TransformedOscillators(w, random_symplectic(rng, 3, 2));
    }();
    return s;
}

struct Gyro {
    ScenarioConfig cfg = load_config(config_path("gyroscopic_mass_damping.json"));
    HamiltonianSystem sys = build_system(cfg.system);
    OrbitFamily family = build_family(cfg, sys);
    PeriodicOrbit crossing = select_orbit(cfg, family);
};

const Gyro& gyro() {
    static const Gyro g;
    return g;
}

}  // namespace

TEST(Floquet, RandomSymplecticProductPairsReciprocally) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat X = random_symplectic(rng, 3);
        ASSERT_LE(symplectic_defect(X), 1e-8 * X.norm() * X.norm());
        const SpectralSummary ss = spectral_summary(X);
        EXPECT_LE(ss.pairing_defect, 1e-6);
        EXPECT_NEAR(ss.determinant, 1.0, 1e-8);
    }
}

TEST(Floquet, SymplecticInverseAndDefect) {
    std::mt19937 rng(6);
    const Mat X = random_symplectic(rng, 2);
    EXPECT_LT((symplectic_inverse(X) * X - Mat::Identity(4, 4)).norm(), 1e-10);
    EXPECT_LT((apply_J(X) - symplectic_unit(2) * X).norm(), 1e-15);
}

TEST(Floquet, IncommensurateOscillatorsHaveATrivialAndARotationPair) {
    const double w2 = std::sqrt(2.0);
    const HamiltonianSystem sys = models::linear_oscillator({1.0, w2});
    Vec z = Vec::Zero(4);
    z(0) = 0.3;
    const PeriodicOrbit o = make_orbit(sys, z, 2 * kPi);
    const SpectralSummary ss = spectral_summary(o);
    EXPECT_EQ(ss.trivial.size(), 2u);
    ASSERT_EQ(ss.normal_pairs.size(), 1u);
    const Complex expected = std::polar(1.0, 2 * kPi * w2);
    const Complex mu = ss.normal_pairs[0].mu;
    EXPECT_LT(std::min(std::abs(mu - expected), std::abs(mu - std::conj(expected))), 1e-8);
    EXPECT_TRUE(ss.on_unit_circle);
    EXPECT_TRUE(ss.trivial_pair_ok);
}

TEST(Floquet, SemisimpleNormalityOfUncoupledModes) {
    const auto& S = three_dof();
    const PeriodicOrbit o = S.mode_orbit(0, 0.4);
    const NormalityReport nr = classify_normality(S.sys, o);
    EXPECT_EQ(nr.cls, NormalityClass::semisimple);
    EXPECT_EQ(nr.geometric_multiplicity, 2);
    EXPECT_FALSE(nr.range_test);
    EXPECT_TRUE(nr.normal());
}

TEST(Floquet, IsochronousSingleOscillatorIsFlaggedAmbiguous) {
    const HamiltonianSystem sys = models::linear_oscillator({1.0});
    Vec z(2);
    z << 1.0, 0.0;
    const PeriodicOrbit o = make_orbit(sys, z, 2 * kPi);
    const NormalityReport nr = classify_normality(sys, o);
    EXPECT_EQ(nr.geometric_multiplicity, 2);
    EXPECT_TRUE(nr.ambiguous);
    EXPECT_FALSE(nr.warnings.empty());
}

TEST(Floquet, DecompositionRecoversTheConstructedPlanes) {
    const auto& S = three_dof();
    const PeriodicOrbit o = S.mode_orbit(0, 0.4);
    const std::vector<InvariantSubspace> subs = decompose(S.sys, o);
    ASSERT_EQ(subs.size(), 3u);
    EXPECT_EQ(subs[0].kind, SubspaceKind::tangent);
    EXPECT_LT((projector(subs[0].R) - projector(S.plane(0))).norm(), 1e-8);
    // normal planes in either order
    for (int k = 1; k <= 2; ++k) {
        double best = 1e9;
        for (std::size_t v = 1; v < subs.size(); ++v)
            best = std::min(best, (projector(subs[v].R) - projector(S.plane(k))).norm());
        EXPECT_LT(best, 1e-8) << "mode " << k;
    }
}

TEST(Floquet, DecompositionIsSymplecticallyOrthogonal) {
    for (const PeriodicOrbit* o : {&gyro().crossing}) {
        const std::vector<InvariantSubspace> subs = decompose(gyro().sys, *o);
        ASSERT_EQ(subs.size(), 2u);
        for (std::size_t a = 0; a < subs.size(); ++a) {
            for (std::size_t b = 0; b < subs.size(); ++b) {
                const Mat G = subs[a].R.transpose() * symplectic_unit(2) * subs[b].R;
                if (a != b)
                    EXPECT_LE(G.norm(), 1e-7 * subs[a].R.norm() * subs[b].R.norm());
                else
                    EXPECT_GT(std::abs(G.determinant()), 1e-12);
            }
            EXPECT_LE((subs[a].S * o->monodromy - subs[a].B * subs[a].S).norm(), 1e-7 * o->monodromy.norm());
            EXPECT_LE(invariance_residual(subs[a], o->monodromy), 1e-7);
            EXPECT_LT((subs[a].S * subs[a].R - Mat::Identity(2, 2)).norm(), 1e-10);
        }
        const Mat R = stacked_basis(subs);
        EXPECT_LT((stacked_left_inverse(subs) * R - Mat::Identity(4, 4)).norm(), 1e-7);
    }
}

TEST(Floquet, TraceOfHamiltonianMatricesVanishesOnEverySubspace) {
    std::mt19937 rng(7);
    const auto& S3 = three_dof();
    const PeriodicOrbit o3 = S3.mode_orbit(0, 0.4);
    std::vector<std::pair<std::vector<InvariantSubspace>, int>> cases{
        {decompose(S3.sys, o3), 3}, {decompose(gyro().sys, gyro().crossing), 2}};
    for (const auto& [subs, n] : cases) {
        for (int trial = 0; trial < 20; ++trial) {
            const Mat Ahat = random_symmetric(rng, 2 * n);
            const Mat JA = symplectic_unit(n) * Ahat;
            for (const auto& V : subs) EXPECT_LE(std::abs((V.S * JA * V.R).trace()), 1e-8 * Ahat.norm());
        }
    }
}

TEST(Floquet, TangentBlockEncodesThePeriodSlope) {
    const HamiltonianSystem sys = models::duffing();
    for (double h : {0.2, 0.5, 1.0}) {
        const PeriodicOrbit o = duffing_orbit(sys, h);
        const InvariantSubspace T = tangent_basis(sys, o);
        const double oracle = duffing_period_slope(h);
        EXPECT_NEAR(-T.B(0, 1) / o.m, oracle, 0.02 * std::abs(oracle)) << "h = " << h;
        EXPECT_NEAR(T.B(0, 0), 1.0, 1e-8);
        EXPECT_NEAR(T.B(1, 1), 1.0, 1e-8);
        EXPECT_NEAR(T.B(1, 0), 0.0, 1e-8);
        EXPECT_NEAR(T.R.col(1).dot(sys.gradient(o.z)), 1.0, 1e-10);
        EXPECT_NEAR(T.R.col(1).dot(sys.vector_field(o.z)), 0.0, 1e-10);
    }
    // three cycles multiply the off-diagonal entry
    const PeriodicOrbit o = duffing_orbit(sys, 0.5);
    const PeriodicOrbit o3 = with_cycles(sys, o, 3);
    EXPECT_NEAR(tangent_basis(sys, o3).B(0, 1), 3.0 * tangent_basis(sys, o).B(0, 1), 1e-6);
}

TEST(Floquet, TangentBlockOfIsochronousOrbitIsIdentity) {
    const HamiltonianSystem sys = models::linear_oscillator({1.0});
    Vec z(2);
    z << 0.5, 0.0;
    const InvariantSubspace T = tangent_basis(sys, make_orbit(sys, z, 2 * kPi));
    EXPECT_LT((T.B - Mat::Identity(2, 2)).norm(), 1e-8);
    EXPECT_THROW(tangent_basis(sys, make_orbit(sys, Vec::Zero(2), 2 * kPi)), PreconditionError);
}

TEST(Floquet, SofteningCrossingHasNegativeTangentCoupling) {
    const InvariantSubspace T = tangent_basis(gyro().sys, gyro().crossing);
    EXPECT_LT(T.B(0, 1), 0.0);
}

TEST(Floquet, PeriodDoublingAndRepeatedPairsAreNonGeneric) {
    Vec z = Vec::Zero(6);
    z(0) = 0.2;
    // omega_2 = 3/2: the normal pair sits at -1
    const HamiltonianSystem pd = models::linear_oscillator({1.0, 1.5});
    const PeriodicOrbit o_pd = make_orbit(pd, z.head(4), 2 * kPi);
    EXPECT_TRUE(spectral_summary(o_pd).minus_one);
    EXPECT_THROW(decompose(pd, o_pd), NonGenericSpectrum);
    // omega_3 = omega_2 + 1: two normal pairs coincide
    const HamiltonianSystem kr = models::linear_oscillator({1.0, std::sqrt(2.0), std::sqrt(2.0) + 1.0});
    const PeriodicOrbit o_kr = make_orbit(kr, z, 2 * kPi);
    EXPECT_TRUE(spectral_summary(o_kr).repeated_pairs);
    EXPECT_THROW(decompose(kr, o_kr), NonGenericSpectrum);
    // past the family's period doubling the pair is real and off the circle
    EXPECT_FALSE(spectral_summary(gyro().family.orbits().back()).on_unit_circle);
}

TEST(Floquet, ChainOrbitSplitsIntoThreeSubspaces) {
    const ScenarioConfig cfg = load_config(config_path("chain_parametric.json"));
    const HamiltonianSystem sys = build_system(cfg.system);
    const PeriodicOrbit o = select_orbit(cfg, build_family(cfg, sys));
    const std::vector<InvariantSubspace> subs = decompose(sys, o);
    ASSERT_EQ(subs.size(), 3u);
    EXPECT_EQ(subs[1].kind, SubspaceKind::normal_pair);
    EXPECT_GT(min_separation(subs), 0.0);
}

TEST(Floquet, SeparationSpecialCases) {
    Mat a(1, 1), b(1, 1);
    a << 0.3;
    b << -1.2;
    EXPECT_NEAR(separation(a, b), 1.5, 1e-12);
    std::mt19937 rng(8);
    const Mat B = random_matrix(rng, 3, 3);
    EXPECT_NEAR(separation(B, B), 0.0, 1e-10);
}

TEST(Floquet, SeparationOfRotationsMatchesSampling) {
    auto rot = [](double t) {
        Mat R(2, 2);
        R << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
        return R;
    };
    std::mt19937 rng(9);
    std::normal_distribution<double> d;
    for (auto [t1, t2] : std::vector<std::pair<double, double>>{{0.4, 1.3}, {2.0, 2.2}, {0.1, -2.5}}) {
        const Mat A = 1.3 * rot(t1), B = 0.8 * rot(t2);
        double best = 1e9;
        for (int k = 0; k < 200000; ++k) {
            Mat Y(2, 2);
            Y << d(rng), d(rng), d(rng), d(rng);
            Y /= Y.norm();
            best = std::min(best, (Y * A - B * Y).norm());
        }
        const double sep = separation(A, B);
        EXPECT_LE(sep, best * (1 + 1e-12));
        EXPECT_NEAR(sep, best, 0.01 * best) << t1 << " " << t2;
    }
}

TEST(Floquet, MultiplierCsvHasOneRowPerOrbit) {
    std::ostringstream os;
    write_multiplier_csv(os, gyro().family);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("h,tau", 0), 0u);
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, gyro().family.size());
}
