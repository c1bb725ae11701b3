#pragma once

#include "nnmstab/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace nnmstab {

enum class DerivativeMode { analytic, finite_difference };

/// Central-difference step for coordinate i, 1e-6 * (1 + |x_i|).
inline double fd_step(double xi) { return 1e-6 * (1.0 + std::abs(xi)); }

// ---------------------------------------------------------------------------
// Mechanical ingredients of a conservative Lagrangian
//   L = 1/2 <qdot, M(q) qdot> + <qdot, G1(q)> + G0(q) - V(q).
// Derivative closures are optional; missing ones fall back to central
// differences.
// ---------------------------------------------------------------------------
struct MechanicalIngredients {
    int dof = 0;
    std::function<Mat(const Vec&)> mass;
    std::function<double(const Vec&)> potential;
    std::function<Vec(const Vec&)> gyro_linear;   // G1, defaults to zero
    std::function<double(const Vec&)> gyro_const; // G0, defaults to zero

    std::function<Vec(const Vec&)> potential_gradient;  // DV
    std::function<Mat(const Vec&)> potential_hessian;   // D^2 V

    /// With a constant M and no gyroscopic terms the builder emits analytic
    /// DH and D^2H from the potential derivatives.
    bool constant_mass = false;
};

/// Conservative limit x' = J DH(x) in canonical coordinates x = (q, p).
class HamiltonianSystem {
public:
    using ScalarFn = std::function<double(const Vec&)>;
    using VectorFn = std::function<Vec(const Vec&)>;
    using MatrixFn = std::function<Mat(const Vec&)>;

    HamiltonianSystem(int dof, ScalarFn hamiltonian, VectorFn gradient = {}, MatrixFn hessian = {},
                      std::string name = "custom");

    int dof() const { return dof_; }
    int dim() const { return 2 * dof_; }
    const std::string& name() const { return name_; }
    DerivativeMode gradient_mode() const { return gradient_mode_; }
    DerivativeMode hessian_mode() const { return hessian_mode_; }

    double hamiltonian(const Vec& x) const;
    Vec gradient(const Vec& x) const;
    Mat hessian(const Vec& x) const;

    /// J DH(x).
    Vec vector_field(const Vec& x) const;
    /// J D^2H(x).
    Mat vector_field_jacobian(const Vec& x) const;

    /// Velocity map qdot = F(q, p); the default is dH/dp.
    Vec velocity(const Vec& x) const;
    void set_velocity_map(VectorFn f) { velocity_ = std::move(f); }

    /// Optional characteristic length used for relative tolerances.
    double scale() const { return scale_; }
    void set_scale(double s) { scale_ = s; }

private:
    int dof_;
    ScalarFn hamiltonian_;
    VectorFn gradient_;
    MatrixFn hessian_;
    VectorFn velocity_;
    DerivativeMode gradient_mode_;
    DerivativeMode hessian_mode_;
    std::string name_;
    double scale_ = 1.0;
};

/// H(q,p) = 1/2 <p - G1, M^{-1}(p - G1)> - G0 + V.
HamiltonianSystem build_from_mechanical(const MechanicalIngredients& ing, std::string name = "mechanical");

/// x' = J DH(x) + eps g(x, t; delta).
class PerturbationField;
Vec vector_field(const HamiltonianSystem& sys, const Vec& x);
Vec vector_field(const HamiltonianSystem& sys, const PerturbationField& g, const Vec& x, double t, double eps);

struct LinearizationReport {
    Vec frequencies;            ///< positive imaginary parts, ascending
    CVec eigenvalues;           ///< full spectrum of J D^2H
    bool hyperbolic_part = false;  ///< eigenvalues off the imaginary axis present
};

/// Frequencies of the linearization at a fixed point.
LinearizationReport linearized_frequencies(const HamiltonianSystem& sys, const Vec& equilibrium);

// ---------------------------------------------------------------------------
// Perturbation g(x, t; delta) = (0, Q(q, F(q,p), t; delta)).
// Closures receive the forcing period delta explicitly so one object serves
// every resonance condition.
// ---------------------------------------------------------------------------
class PerturbationField {
public:
    using LagrangianForce = std::function<Vec(const Vec& q, const Vec& qdot, double t, double delta)>;
    using MomentumForce = std::function<Vec(const Vec& x, double t, double delta)>;
    using ForceJacobian = std::function<Mat(const Vec& x, double t, double delta)>;  // n x 2n

    PerturbationField() = default;
    PerturbationField(int dof, double delta, MomentumForce force, std::string name = "custom");

    int dof() const { return dof_; }
    double period() const { return delta_; }
    const std::string& name() const { return name_; }
    bool empty() const { return !force_; }

    /// Copy with a different forcing period.
    PerturbationField with_period(double delta) const;

    void set_lagrangian_force(LagrangianForce f) { lagrangian_ = std::move(f); }
    void set_state_jacobian(ForceJacobian f) { jacobian_ = std::move(f); }
    void set_time_derivative(MomentumForce f) { time_derivative_ = std::move(f); }
    /// Permit finite differences in t when no analytic time derivative was supplied.
    void allow_fd_time_derivative(bool allow) { fd_time_ = allow; }

    bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }
    bool has_analytic_time_derivative() const { return static_cast<bool>(time_derivative_); }
    /// d_t g is available, analytically or through the enabled fallback.
    bool has_time_derivative() const { return time_derivative_ || fd_time_; }
    bool has_lagrangian_force() const { return static_cast<bool>(lagrangian_); }

    /// Q(q, F(q,p), t) evaluated in canonical coordinates.
    Vec force(const Vec& x, double t) const;
    /// Q(q, qdot, t) in Lagrangian form.
    Vec lagrangian_force(const Vec& q, const Vec& qdot, double t) const;

    /// g(x,t) = (0, Q).
    Vec value(const Vec& x, double t) const;
    /// d_x g, 2n x 2n with zero upper block rows.
    Mat state_jacobian(const Vec& x, double t) const;
    /// d_t g.
    Vec time_derivative(const Vec& x, double t) const;

    /// Sum of two perturbations (same dof and period).
    friend PerturbationField operator+(const PerturbationField& a, const PerturbationField& b);
    /// Scalar multiple.
    friend PerturbationField operator*(double c, const PerturbationField& a);

private:
    int dof_ = 0;
    double delta_ = 1.0;
    MomentumForce force_;
    LagrangianForce lagrangian_;
    ForceJacobian jacobian_;
    MomentumForce time_derivative_;
    bool fd_time_ = false;
    std::string name_;
};

/// g == 0.
PerturbationField zero_perturbation(int dof, double delta);

}  // namespace nnmstab
