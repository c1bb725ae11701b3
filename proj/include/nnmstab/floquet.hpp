#pragma once

// Spectral analysis of monodromy matrices: normality, multiplier clustering,
// strongly invariant subspaces and their symplectic left inverses.

#include "nnmstab/linalg.hpp"
#include "nnmstab/orbits.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace nnmstab {

/// All rank and clustering thresholds in one place.
struct FloquetTolerances {
    double cluster = 1e-5;           ///< multipliers this close to +1 (or to each other) cluster
    double rank = 1e-7;              ///< relative singular-value threshold for rank(Pi - I)
    double ambiguity_factor = 10.0;  ///< singular values within this factor of the threshold are borderline
    double unit_circle = 1e-6;       ///< tolerance on |mu| - 1
    double weak_separation = 1e-2;   ///< pairs closer than this weaken the stability prediction
};

struct MultiplierPair {
    Complex mu;            ///< representative (Im >= 0, or |mu| >= 1 for real pairs)
    Complex partner;       ///< conjugate or reciprocal partner
    bool complex = true;
    bool on_unit_circle = true;
};

struct SpectralSummary {
    CVec eigenvalues;                  ///< sorted by argument then modulus
    std::vector<int> trivial;          ///< indices of the +1 cluster
    std::vector<MultiplierPair> normal_pairs;
    std::vector<double> pair_distances;  ///< min distance between distinct normal pairs, per pair
    bool on_unit_circle = true;        ///< every multiplier on the unit circle
    bool trivial_pair_ok = true;       ///< exactly two multipliers at +1
    bool minus_one = false;            ///< a multiplier at -1 (period doubling)
    bool repeated_pairs = false;       ///< two normal pairs collide (Krein)
    double pairing_defect = 0.0;       ///< max over eigenvalues of dist(1/mu, spectrum)
    double determinant = 1.0;
    std::vector<std::string> warnings;
};

SpectralSummary spectral_summary(const Mat& monodromy, const FloquetTolerances& tol = {});
inline SpectralSummary spectral_summary(const PeriodicOrbit& orbit, const FloquetTolerances& tol = {}) {
    return spectral_summary(orbit.monodromy, tol);
}

/// Jordan block at +1, or two eigenvectors at +1 with J DH outside range(Pi - I).
enum class NormalityClass { jordan, semisimple, non_normal };
std::string to_string(NormalityClass c);

struct NormalityReport {
    NormalityClass cls = NormalityClass::non_normal;
    int m = 1;
    int geometric_multiplicity = 0;
    bool range_test = false;       ///< J DH(z) in range(Pi - I)
    double range_residual = 0.0;   ///< relative least-squares residual
    Vec singular_values;           ///< of Pi - I, descending
    bool ambiguous = false;
    std::vector<std::string> warnings;

    bool normal() const { return cls != NormalityClass::non_normal; }
};

NormalityReport classify_normality(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                                   const FloquetTolerances& tol = {});

enum class SubspaceKind { tangent, normal_pair, full, custom };
std::string to_string(SubspaceKind k);

/// Strongly invariant subspace: Pi R = R B, S R = I.
struct InvariantSubspace {
    Mat R;  ///< 2n x 2v
    Mat S;  ///< 2v x 2n symplectic left inverse
    Mat B;  ///< 2v x 2v
    CVec cluster;
    SubspaceKind kind = SubspaceKind::custom;

    int dim() const { return static_cast<int>(R.cols()); }
    int half_dim() const { return dim() / 2; }
};

/// Subspace spanned by R: S = (R^T J R)^{-1} R^T J and B = S Pi R.
InvariantSubspace make_subspace(const Mat& R, const Mat& monodromy, SubspaceKind kind = SubspaceKind::custom);

/// |Pi R - R B| / |Pi|.
double invariance_residual(const InvariantSubspace& V, const Mat& monodromy);

/// R_T = [J DH(z), b] with <b, DH> = 1, <b, J DH> = 0 and Pi b = b - a J DH.
/// B_T = [1 -a; 0 1] with a = m T'(h).
InvariantSubspace tangent_basis(const HamiltonianSystem& sys, const PeriodicOrbit& orbit);

/// Tangent space followed by the n - 1 two-dimensional normal subspaces.
/// Throws NonGenericSpectrum for -1 multipliers or repeated pairs.
std::vector<InvariantSubspace> decompose(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                                         const FloquetTolerances& tol = {});

/// Whole phase space (R = I).
InvariantSubspace full_space(const PeriodicOrbit& orbit);

/// Stacked bases [R_T, R_N1, ...] and stacked left inverses.
Mat stacked_basis(const std::vector<InvariantSubspace>& subs);
Mat stacked_left_inverse(const std::vector<InvariantSubspace>& subs);

/// Smallest separation between distinct blocks of a decomposition.
double min_separation(const std::vector<InvariantSubspace>& subs);

/// Multiplier CSV: h, tau, Re/Im of each multiplier, normality class, separations.
void write_multiplier_csv(std::ostream& os, const OrbitFamily& family, const FloquetTolerances& tol = {});

}  // namespace nnmstab
