#pragma once

// Periodic orbits of the conservative limit: Newton shooting, pseudo-arclength
// continuation of one-parameter families and the period function T(h).

#include "nnmstab/integrate.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace nnmstab {

struct ShootingConstraint {
    enum class Kind { fix_energy, fix_period, free };
    Kind kind = Kind::free;
    double value = 0.0;

    static ShootingConstraint energy(double h) { return {Kind::fix_energy, h}; }
    static ShootingConstraint period(double tau) { return {Kind::fix_period, tau}; }
    static ShootingConstraint none() { return {Kind::free, 0.0}; }
};

struct ShootingOptions {
    double integration_tol = 1e-12;
    double closure_tol = 1e-10;  ///< relative to the system scale
    int max_iter = 25;
    int cycles = 1;              ///< m of the returned monodromy
    double plus_one_tol = 1e-5;  ///< clustering of the trivial multipliers
};

struct PeriodicOrbit {
    Vec z;                 ///< anchor point
    double tau = 0.0;      ///< minimal period
    int m = 1;             ///< cycles
    double h = 0.0;        ///< energy H(z)
    double residual = 0.0; ///< max(|x0(tau) - z|, |x0(m tau) - z|)
    Mat monodromy;         ///< X0(m tau; z)
    Mat monodromy_one;     ///< X0(tau; z)
    Vec anchor_point;      ///< phase hyperplane used by the solver
    Vec anchor_normal;
    int iterations = 0;
    std::vector<std::string> warnings;

    double period() const { return m * tau; }
    double omega() const;
    int dim() const { return static_cast<int>(z.size()); }
};

/// Newton shooting on (z, tau) with a hyperplane phase anchor through
/// guess_z and the given constraint. Throws NoConvergence.
PeriodicOrbit find_periodic_orbit(const HamiltonianSystem& sys, const Vec& guess_z, double guess_tau,
                                  ShootingConstraint constraint, const ShootingOptions& opt = {});

/// Orbit record (monodromy, residual) for an already converged (z, tau).
PeriodicOrbit make_orbit(const HamiltonianSystem& sys, const Vec& z, double tau, int m = 1,
                         double integration_tol = 1e-12);

/// Same orbit with m cycles.
PeriodicOrbit with_cycles(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, int m,
                          double integration_tol = 1e-12);

/// Same orbit anchored at x0(s; z).
PeriodicOrbit rebase(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, double s,
                     double integration_tol = 1e-12);

/// Small-amplitude orbit guess along a linear mode of an equilibrium.
struct OrbitGuess {
    Vec z;
    double tau = 0.0;
};
OrbitGuess linear_mode_guess(const HamiltonianSystem& sys, const Vec& equilibrium, int mode, double amplitude);

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

enum class Parametrization { energy, period };

struct ContinuationOptions {
    double initial_step = 1e-2;  ///< arclength in (z, tau)
    double min_step = 1e-7;
    double max_step = 0.25;
    int max_steps = 400;
    int direction = +1;          ///< +1: increasing parameter
    Parametrization parametrization = Parametrization::energy;
    bool stop_at_bifurcation = true;
    /// Stop once this returns true for the latest orbit (that orbit is kept).
    std::function<bool(const PeriodicOrbit&)> stop;
    ShootingOptions shooting;
};

struct FamilyEvent {
    std::size_t index = 0;  ///< orbit index at which the event was detected
    std::string kind;       ///< "period-doubling", "plus-one", "turning-point", "stall", "non-normal"
};

class OrbitFamily {
public:
    OrbitFamily() = default;
    OrbitFamily(std::shared_ptr<const HamiltonianSystem> sys, std::vector<PeriodicOrbit> orbits,
                Parametrization par, std::vector<FamilyEvent> events, ShootingOptions shooting);

    const std::vector<PeriodicOrbit>& orbits() const { return orbits_; }
    const std::vector<FamilyEvent>& events() const { return events_; }
    Parametrization parametrization() const { return par_; }
    const HamiltonianSystem& system() const { return *sys_; }
    const ShootingOptions& shooting() const { return shooting_; }
    std::size_t size() const { return orbits_.size(); }
    bool stalled() const;

    double h_min() const;
    double h_max() const;

    /// Monotone cubic (PCHIP) interpolant of tau over h.
    double period_fn(double h) const;
    /// Centred difference on locally re-solved orbits.
    double period_derivative_fn(double h) const;

    /// Nearest sample in energy.
    const PeriodicOrbit& nearest(double h) const;
    /// Orbits of the family with minimal period tau, one per bracketing
    /// sample pair, polished by fixed-period shooting.
    std::vector<PeriodicOrbit> orbits_with_period(double tau) const;

private:
    std::shared_ptr<const HamiltonianSystem> sys_;
    std::vector<PeriodicOrbit> orbits_;
    Parametrization par_ = Parametrization::energy;
    std::vector<FamilyEvent> events_;
    ShootingOptions shooting_;
    std::vector<double> hs_, taus_, slopes_;
};

/// Pseudo-arclength continuation from a seed orbit.
OrbitFamily continue_family(const HamiltonianSystem& sys, const PeriodicOrbit& seed,
                            const ContinuationOptions& opt = {});

struct PeriodDerivative {
    double value = 0.0;       ///< centred difference with step dh
    double value_half = 0.0;  ///< same with dh / 2
    double dh = 0.0;
    bool sign_stable = true;  ///< relative change <= 5 % and no sign flip
};

/// T'(h) by centred differences on orbits re-solved at h +- dh.
PeriodDerivative period_derivative_report(const OrbitFamily& family, double h);
double period_derivative(const OrbitFamily& family, double h);

/// Backbone CSV: h, tau, omega, max|q_i|, normality, Re/Im of multipliers,
/// family events at the orbit (flag).
void write_backbone_csv(std::ostream& os, const OrbitFamily& family);

/// max_t |q_i(t)| along the orbit, per coordinate.
Vec orbit_amplitudes(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, int samples = 400);

}  // namespace nnmstab
