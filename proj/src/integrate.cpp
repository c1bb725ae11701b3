#include "nnmstab/integrate.hpp"

#include "nnmstab/linalg.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace nnmstab {

namespace {

OdeOptions options_for(double tol) {
    if (!(tol >= 1e-14 && tol <= 1e-4)) throw ConfigError("flow: tolerance must lie in [1e-14, 1e-4]");
    OdeOptions opt;
    opt.rtol = tol;
    opt.atol = tol;
    return opt;
}

double drift_of(const HamiltonianSystem& sys, const OdeSolution& sol, int dim) {
    const double h0 = sys.hamiltonian(sol.y.front().head(dim));
    double drift = 0.0;
    for (const Vec& y : sol.y) drift = std::max(drift, std::abs(sys.hamiltonian(y.head(dim)) - h0));
    return drift;
}

Eigen::Map<const Mat> as_matrix(const Vec& y, int dim) { return {y.data() + dim, dim, dim}; }

}  // namespace

Trajectory::Trajectory(OdeSolution sol, int dim, double energy_drift)
    : sol_(std::move(sol)), dim_(dim), energy_drift_(energy_drift) {}

VariationalTrajectory::VariationalTrajectory(Trajectory base, double eps) : base_(std::move(base)), eps_(eps) {
    const int d = dim();
    for (const Vec& y : base_.raw().y) defect_ = std::max(defect_, nnmstab::symplectic_defect(as_matrix(y, d)));
}

Mat VariationalTrajectory::transition(double t) const {
    const int d = dim();
    const Vec y = base_.raw().dense.head(t, d + d * d);
    return as_matrix(y, d);
}

Mat VariationalTrajectory::final_transition() const { return as_matrix(base_.raw().y.back(), dim()); }

Trajectory flow(const HamiltonianSystem& sys, const Vec& x0, double t_final, double tol) {
    if (x0.size() != sys.dim()) throw DomainError("flow: state dimension mismatch");
    auto rhs = [&sys](double, const Vec& x, Vec& dx) { dx = sys.vector_field(x); };
    OdeSolution sol = integrate_ode(rhs, 0.0, t_final, x0, options_for(tol));
    const double drift = drift_of(sys, sol, sys.dim());
    return Trajectory(std::move(sol), sys.dim(), drift);
}

Trajectory flow(const HamiltonianSystem& sys, const PerturbationField& g, double eps, const Vec& x0, double t0,
                double t_final, double tol) {
    if (x0.size() != sys.dim()) throw DomainError("flow: state dimension mismatch");
    if (eps < 0.0) throw PreconditionError("flow: eps must be non-negative");
    auto rhs = [&sys, &g, eps](double t, const Vec& x, Vec& dx) { dx = vector_field(sys, g, x, t, eps); };
    OdeSolution sol = integrate_ode(rhs, t0, t_final, x0, options_for(tol));
    const double drift = drift_of(sys, sol, sys.dim());
    return Trajectory(std::move(sol), sys.dim(), drift);
}

VariationalTrajectory flow_with_variations(const HamiltonianSystem& sys, const Vec& x0, double t_final, double tol) {
    return flow_with_variations(sys, PerturbationField{}, 0.0, x0, t_final, tol);
}

VariationalTrajectory flow_with_variations(const HamiltonianSystem& sys, const PerturbationField& g, double eps,
                                           const Vec& x0, double t_final, double tol) {
    const int d = sys.dim();
    if (x0.size() != d) throw DomainError("flow_with_variations: state dimension mismatch");
    if (eps < 0.0) throw PreconditionError("flow_with_variations: eps must be non-negative");
    const bool perturbed = eps != 0.0 && !g.empty();

    auto rhs = [&, d, perturbed](double t, const Vec& y, Vec& dy) {
        const Vec x = y.head(d);
        Mat A = sys.vector_field_jacobian(x);
        dy.resize(y.size());
        if (perturbed) {
            A += eps * g.state_jacobian(x, t);
            dy.head(d) = sys.vector_field(x) + eps * g.value(x, t);
        } else {
            dy.head(d) = sys.vector_field(x);
        }
        Eigen::Map<Mat>(dy.data() + d, d, d).noalias() = A * as_matrix(y, d);
    };

    Vec y0(d + d * d);
    y0.head(d) = x0;
    Eigen::Map<Mat>(y0.data() + d, d, d).setIdentity();
    OdeOptions opt = options_for(tol);
    OdeSolution sol = integrate_ode(rhs, 0.0, t_final, y0, opt);
    const double drift = drift_of(sys, sol, d);
    return VariationalTrajectory(Trajectory(std::move(sol), d, drift), perturbed ? eps : 0.0);
}

std::function<Mat(double)> pullback_integrand(const VariationalTrajectory& vt, std::function<Mat(double)> A) {
    const bool conservative = vt.epsilon() == 0.0;
    return [&vt, A = std::move(A), conservative](double t) -> Mat {
        const Mat X = vt.transition(t);
        const Mat AX = A(t) * X;
        if (conservative) return symplectic_inverse(X) * AX;
        return X.partialPivLu().solve(AX);
    };
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const HamiltonianSystem& sys) {
    const int n = sys.dof();
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",q_" << i;
    for (int i = 1; i <= n; ++i) os << ",p_" << i;
    os << ",H\n";
    os << std::setprecision(17);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const Vec x = tr.state(k);
        os << tr.times()[k];
        for (int i = 0; i < 2 * n; ++i) os << ',' << x[i];
        os << ',' << sys.hamiltonian(x) << '\n';
    }
}

}  // namespace nnmstab
