#pragma once

// Melnikov function of a conservative orbit under a periodic perturbation,
// its zeros and derivative, and level sets over a family of orbits.

#include "nnmstab/floquet.hpp"
#include "nnmstab/orbits.hpp"

#include <iosfwd>
#include <optional>

namespace nnmstab {

/// m:l resonance; delta = m tau / l is the forcing period.
struct ResonanceSpec {
    int m = 1;
    int l = 1;
    double delta = 0.0;

    static ResonanceSpec for_orbit(const PeriodicOrbit& orbit, int l);
    /// Throws SpecError on gcd(m, l) != 1 or a forcing period off m tau / l.
    void validate(const PeriodicOrbit& orbit) const;
};

struct MelnikovOptions {
    int grid_size = 128;
    double integration_tol = 1e-11;
    double zero_type_tol = 1e-6;  ///< |M'| <= tol * scale marks a quadratic zero
    double polish_tol = 1e-10;    ///< |M(s0)| <= tol * scale
    bool polish_exact = true;     ///< polish on the exact evaluator (otherwise the interpolant)
    bool with_derivative = true;  ///< also tabulate M'(s) (needs d_t g)
};

struct MelnikovZero {
    enum class Type { simple, quadratic };
    double s = 0.0;
    double derivative = 0.0;
    Type type = Type::simple;
};
std::string to_string(MelnikovZero::Type t);

class MelnikovCurve {
public:
    PeriodicOrbit orbit;
    ResonanceSpec spec;
    Vec s;            ///< uniform grid on [0, m tau)
    Vec values;       ///< M(s_k)
    Vec derivatives;  ///< M'(s_k), empty when not tabulated
    double error_estimate = 0.0;  ///< max absolute quadrature error over the grid
    double scale = 0.0;           ///< max |M(s_k)|
    std::vector<MelnikovZero> zeros;
    std::vector<std::string> warnings;

    /// Exact evaluators (fresh quadrature per call); may be empty.
    std::function<double(double)> evaluate;
    std::function<double(double)> evaluate_derivative;

    double period() const { return spec.m * orbit.tau; }
    /// Trigonometric interpolant of the samples.
    double interpolate(double s) const;
    double interpolate_derivative(double s) const;
    void build_interpolant();

private:
    CVec coeffs_;
};

/// M(s) = int_0^{m tau} <DH(x0(u)), g(x0(u), u - s)> du on a uniform grid,
/// all shifts integrated in one pass as extra ODE states. Zeros are located.
MelnikovCurve melnikov(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                       const ResonanceSpec& spec, const MelnikovOptions& opt = {});

/// Same curve from the work of the non-conservative forces, <qdot0, Q>.
MelnikovCurve melnikov_energy_form(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                                   const PerturbationField& g, const ResonanceSpec& spec,
                                   const MelnikovOptions& opt = {});

/// Single values by direct quadrature.
double melnikov_value(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                      const ResonanceSpec& spec, double s, double tol = 1e-11);
/// M'(s) = -int_0^{m tau} <DH(x0(u)), d_t g(x0(u), u - s)> du.
double melnikov_derivative(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                           const ResonanceSpec& spec, double s, double tol = 1e-11);

/// Sign changes polished to |M| <= polish_tol * scale plus touching extrema;
/// classified simple / quadratic by |M'|.
std::vector<MelnikovZero> find_zeros(const MelnikovCurve& curve, const MelnikovOptions& opt = {});

/// Least-squares fit M ~ A cos(w s) + B sin(w s) + C.
struct HarmonicFit {
    double A = 0.0, B = 0.0, C = 0.0;
    double amplitude = 0.0;  ///< sqrt(A^2 + B^2)
    double offset = 0.0;     ///< C
    double rms_residual = 0.0;
};
HarmonicFit fit_harmonic(const MelnikovCurve& curve, double w);

/// Curve CSV: s, theta, M, dM/ds.
void write_melnikov_csv(std::ostream& os, const MelnikovCurve& curve);

// ---------------------------------------------------------------------------
// Level sets over a family
// ---------------------------------------------------------------------------

/// Builds the perturbation for a damping (or other) parameter and forcing period.
using PerturbationBuilder = std::function<PerturbationField(double param, double delta)>;

struct SweepOptions {
    int l = 1;
    std::vector<double> params;
    /// Rows are orbits at uniformly spaced normalized frequencies
    /// omega_bar = reference_period / tau in [omega_bar_min, omega_bar_max].
    /// With rows == 0 the family samples are used instead.
    double reference_period = 0.0;
    double omega_bar_min = 1.0;
    double omega_bar_max = 1.0;
    int rows = 0;
    int theta_samples = 200;    ///< contour grid resolution in theta
    int quadrature_samples = 64;  ///< exact Melnikov samples per row (interpolated to theta_samples)
    int threads = 1;              ///< workers over rows and (param, row) cells; results do not depend on it
    MelnikovOptions melnikov;
    FloquetTolerances floquet;
};

struct SweepRow {
    PeriodicOrbit orbit;
    double omega_bar = 0.0;
    double h = 0.0;
    double period_slope = 0.0;  ///< T'(h) from neighbouring rows
    bool stability_test_not_applicable = false;
    std::string flag;
};

struct ContourPoint {
    double omega_bar = 0.0;
    double theta = 0.0;
    int dtheta_sign = 0;  ///< sign of dM/dtheta at the point
};

struct Contour {
    int id = 0;
    bool closed = false;
    std::vector<ContourPoint> points;
};

/// Level-set fold between two rows: row extrema of M crossing zero, which
/// creates or destroys zeros through quadratic ones (saddle-node points).
struct FoldEvent {
    double omega_bar = 0.0;     ///< interpolated
    std::vector<double> theta;  ///< positions of the quadratic zeros
    int zeros = 0;              ///< distinct zeros at the fold (simple + quadratic)
};

struct LevelSet {
    double param = 0.0;
    Mat M;       ///< rows x theta_samples
    Mat dM;      ///< dM/dtheta
    std::vector<int> zero_counts;
    std::vector<FoldEvent> folds;
    std::vector<Contour> contours;
    int components = 0;
    std::optional<double> onset;        ///< first omega_bar with zeros (interpolated)
    std::optional<double> termination;  ///< last omega_bar with zeros (interpolated)
};

struct SweepResult {
    std::vector<SweepRow> rows;
    Vec theta;
    std::vector<LevelSet> levels;
};

SweepResult family_sweep(const OrbitFamily& family, const PerturbationBuilder& builder, const SweepOptions& opt);

/// Zero-count sequence with consecutive duplicates removed.
std::vector<int> compressed_counts(const std::vector<int>& counts);

/// Row counts and fold counts merged in omega_bar order, keeping the even
/// (parity-consistent) states only, then compressed, e.g. 0 2 4 2 0.
std::vector<int> stage_sequence(const SweepResult& sweep, const LevelSet& level);

/// Level-set CSV: omega_bar, h, theta, M, dM/dtheta, flags (one block per parameter).
void write_levelset_csv(std::ostream& os, const SweepResult& sweep);
/// Contour CSV: param, polyline id, omega_bar, theta, zero type.
void write_contour_csv(std::ostream& os, const SweepResult& sweep);

}  // namespace nnmstab
