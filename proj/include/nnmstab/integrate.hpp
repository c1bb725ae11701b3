#pragma once

#include "nnmstab/dynsys.hpp"
#include "nnmstab/ode.hpp"

#include <iosfwd>

namespace nnmstab {

/// Default mixed absolute/relative tolerance of all flow computations.
inline constexpr double kDefaultTol = 1e-11;

/// A solution x(t) of the (possibly perturbed) equations of motion.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(OdeSolution sol, int dim, double energy_drift);

    int dim() const { return dim_; }
    const std::vector<double>& times() const { return sol_.t; }
    std::size_t size() const { return sol_.t.size(); }
    Vec state(std::size_t i) const { return sol_.y[i].head(dim_); }
    Vec initial_state() const { return state(0); }
    Vec final_state() const { return state(size() - 1); }
    double t_final() const { return sol_.t.back(); }

    /// Continuous extension of the state.
    Vec dense_eval(double t) const { return sol_.dense.head(t, dim_); }
    /// max |H(x(t_i)) - H(x(0))| over the grid (meaningful for eps = 0).
    double energy_drift() const { return energy_drift_; }

    const OdeSolution& raw() const { return sol_; }

private:
    OdeSolution sol_;
    int dim_ = 0;
    double energy_drift_ = 0.0;
};

/// x(t) together with the fundamental matrix X(t) of the first variations.
class VariationalTrajectory {
public:
    VariationalTrajectory() = default;
    VariationalTrajectory(Trajectory base, double eps);

    const Trajectory& base() const { return base_; }
    double epsilon() const { return eps_; }
    int dim() const { return base_.dim(); }

    /// X(t) from the continuous extension.
    Mat transition(double t) const;
    /// X at the last grid node.
    Mat final_transition() const;
    /// max |X^T J X - J| over the grid.
    double symplectic_defect() const { return defect_; }

private:
    Trajectory base_;
    double eps_ = 0.0;
    double defect_ = 0.0;
};

/// x' = J DH(x) from x0 over [0, t_final].
Trajectory flow(const HamiltonianSystem& sys, const Vec& x0, double t_final, double tol = kDefaultTol);

/// x' = J DH(x) + eps g(x, t; delta) from x0 at t = t0.
Trajectory flow(const HamiltonianSystem& sys, const PerturbationField& g, double eps, const Vec& x0, double t0,
                double t_final, double tol = kDefaultTol);

/// Joint flow of x and X with X' = (J D^2H + eps d_x g) X, X(0) = I.
VariationalTrajectory flow_with_variations(const HamiltonianSystem& sys, const Vec& x0, double t_final,
                                           double tol = kDefaultTol);
VariationalTrajectory flow_with_variations(const HamiltonianSystem& sys, const PerturbationField& g, double eps,
                                           const Vec& x0, double t_final, double tol = kDefaultTol);

/// t -> X^{-1}(t) A(t) X(t). Uses X^{-1} = J X^T J^T on conservative runs and
/// an LU solve otherwise.
std::function<Mat(double)> pullback_integrand(const VariationalTrajectory& vt, std::function<Mat(double)> A);

/// Trajectory CSV: t, q_1..q_n, p_1..p_n, H with 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const HamiltonianSystem& sys);

}  // namespace nnmstab
