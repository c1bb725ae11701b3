#include "nnmstab/dynsys.hpp"

#include "nnmstab/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>

namespace nnmstab {

namespace {

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x) {
    Vec g(x.size());
    Vec xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step(x[i]);
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, Eigen::Index rows) {
    Mat Jm(rows, x.size());
    Vec xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step(x[i]);
        xp[i] = x[i] + h;
        const Vec fp = f(xp);
        xp[i] = x[i] - h;
        const Vec fm = f(xp);
        xp[i] = x[i];
        Jm.col(i) = (fp - fm) / (2.0 * h);
    }
    return Jm;
}

// Second differences of H directly; nesting two first-difference stencils at
// 1e-6 would amplify rounding to ~1e-4.
Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x) {
    const Eigen::Index d = x.size();
    Mat Hm(d, d);
    Vec h(d);
    for (Eigen::Index i = 0; i < d; ++i) h[i] = 1e-4 * (1.0 + std::abs(x[i]));
    const double f0 = f(x);
    Vec y = x;
    for (Eigen::Index i = 0; i < d; ++i) {
        y[i] = x[i] + h[i];
        const double fp = f(y);
        y[i] = x[i] - h[i];
        const double fm = f(y);
        y[i] = x[i];
        Hm(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            double acc = 0.0;
            for (int si : {1, -1}) {
                for (int sj : {1, -1}) {
                    y[i] = x[i] + si * h[i];
                    y[j] = x[j] + sj * h[j];
                    acc += si * sj * f(y);
                }
            }
            y[i] = x[i];
            y[j] = x[j];
            Hm(i, j) = Hm(j, i) = acc / (4.0 * h[i] * h[j]);
        }
    }
    return Hm;
}

void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite evaluation");
}

std::string describe(const Vec& x) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// HamiltonianSystem
// ---------------------------------------------------------------------------

HamiltonianSystem::HamiltonianSystem(int dof, ScalarFn hamiltonian, VectorFn gradient, MatrixFn hessian,
                                     std::string name)
    : dof_(dof),
      hamiltonian_(std::move(hamiltonian)),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)),
      gradient_mode_(gradient_ ? DerivativeMode::analytic : DerivativeMode::finite_difference),
      hessian_mode_(hessian_ ? DerivativeMode::analytic : DerivativeMode::finite_difference),
      name_(std::move(name)) {
    if (dof_ < 1) throw DomainError("HamiltonianSystem: need at least one degree of freedom");
    if (!hamiltonian_) throw DomainError("HamiltonianSystem: Hamiltonian closure missing");
}

double HamiltonianSystem::hamiltonian(const Vec& x) const {
    const double h = hamiltonian_(x);
    if (!std::isfinite(h)) throw DomainError("Hamiltonian: non-finite value at " + describe(x));
    return h;
}

Vec HamiltonianSystem::gradient(const Vec& x) const {
    Vec g = gradient_ ? gradient_(x) : fd_gradient(hamiltonian_, x);
    require_finite(g, "gradient");
    return g;
}

Mat HamiltonianSystem::hessian(const Vec& x) const {
    Mat Hm;
    if (hessian_) {
        Hm = hessian_(x);
    } else if (gradient_) {
        Hm = fd_jacobian(gradient_, x, dim());
        Hm = 0.5 * (Hm + Hm.transpose()).eval();
    } else {
        Hm = fd_hessian(hamiltonian_, x);
    }
    if (!Hm.allFinite()) throw DomainError("hessian: non-finite evaluation");
    return Hm;
}

Vec HamiltonianSystem::vector_field(const Vec& x) const { return apply_J(gradient(x)); }

Mat HamiltonianSystem::vector_field_jacobian(const Vec& x) const { return apply_J(hessian(x)); }

Vec HamiltonianSystem::velocity(const Vec& x) const {
    if (velocity_) return velocity_(x);
    return gradient(x).tail(dof_);
}

HamiltonianSystem build_from_mechanical(const MechanicalIngredients& ing, std::string name) {
    const int n = ing.dof;
    if (n < 1 || !ing.mass || !ing.potential)
        throw DomainError("build_from_mechanical: dof, mass and potential are required");

    auto G1 = ing.gyro_linear ? ing.gyro_linear : [n](const Vec&) -> Vec { return Vec::Zero(n); };
    auto G0 = ing.gyro_const ? ing.gyro_const : [](const Vec&) { return 0.0; };

    // Factorize M(q), rejecting configurations where it is not SPD.
    auto solve_mass = [mass = ing.mass](const Vec& q, const Vec& rhs) -> Vec {
        const Mat M = mass(q);
        const double norm = M.cwiseAbs().maxCoeff();
        if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(norm, 1.0))
            throw DegenerateMassError("mass matrix not symmetric at q = " + describe(q));
        Eigen::LLT<Mat> llt(M);
        if (llt.info() != Eigen::Success)
            throw DegenerateMassError("mass matrix singular or indefinite at q = " + describe(q));
        return llt.solve(rhs);
    };

    auto H = [n, G1, G0, solve_mass, V = ing.potential](const Vec& x) {
        const Vec q = x.head(n);
        const Vec w = x.tail(n) - G1(q);
        return 0.5 * w.dot(solve_mass(q, w)) - G0(q) + V(q);
    };

    HamiltonianSystem::VectorFn grad;
    HamiltonianSystem::MatrixFn hess;
    if (ing.constant_mass && !ing.gyro_linear && !ing.gyro_const && ing.potential_gradient &&
        ing.potential_hessian) {
        // H = 1/2 p^T M^{-1} p + V(q) has closed-form derivatives.
        const Vec q0 = Vec::Zero(n);
        const Mat Minv = ing.mass(q0).inverse();
        grad = [n, Minv, DV = ing.potential_gradient](const Vec& x) -> Vec {
            Vec g(2 * n);
            g << DV(x.head(n)), Minv * x.tail(n);
            return g;
        };
        hess = [n, Minv, D2V = ing.potential_hessian](const Vec& x) -> Mat {
            Mat Hm = Mat::Zero(2 * n, 2 * n);
            Hm.topLeftCorner(n, n) = D2V(x.head(n));
            Hm.bottomRightCorner(n, n) = Minv;
            return Hm;
        };
    }
    HamiltonianSystem sys(n, H, grad, hess, std::move(name));
    sys.set_velocity_map([n, G1, solve_mass](const Vec& x) -> Vec {
        const Vec q = x.head(n);
        return solve_mass(q, x.tail(n) - G1(q));
    });
    return sys;
}

Vec vector_field(const HamiltonianSystem& sys, const Vec& x) {
    if (!x.allFinite()) throw DomainError("vector_field: non-finite state");
    return sys.vector_field(x);
}

Vec vector_field(const HamiltonianSystem& sys, const PerturbationField& g, const Vec& x, double t, double eps) {
    Vec f = vector_field(sys, x);
    if (eps != 0.0 && !g.empty()) f += eps * g.value(x, t);
    return f;
}

LinearizationReport linearized_frequencies(const HamiltonianSystem& sys, const Vec& equilibrium) {
    const Vec f = sys.vector_field(equilibrium);
    const Mat A = sys.vector_field_jacobian(equilibrium);
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff() * std::max(1.0, equilibrium.norm()));
    if (f.norm() > 1e-10 * scale)
        throw PreconditionError("linearized_frequencies: point is not a fixed point (|J DH| = " +
                                std::to_string(f.norm()) + ")");

    Eigen::EigenSolver<Mat> es(A);
    LinearizationReport rep;
    rep.eigenvalues = es.eigenvalues();
    std::vector<double> freqs;
    const double tol = 1e-9 * std::max(1.0, rep.eigenvalues.cwiseAbs().maxCoeff());
    for (const auto& lam : rep.eigenvalues) {
        if (std::abs(lam.real()) > tol) rep.hyperbolic_part = true;
        if (lam.imag() > tol) freqs.push_back(lam.imag());
    }
    std::sort(freqs.begin(), freqs.end());
    rep.frequencies = Eigen::Map<Vec>(freqs.data(), static_cast<Eigen::Index>(freqs.size()));
    return rep;
}

// ---------------------------------------------------------------------------
// PerturbationField
// ---------------------------------------------------------------------------

PerturbationField::PerturbationField(int dof, double delta, MomentumForce force, std::string name)
    : dof_(dof), delta_(delta), force_(std::move(force)), name_(std::move(name)) {
    if (dof_ < 1) throw DomainError("PerturbationField: dof must be positive");
    if (!(delta_ > 0.0)) throw DomainError("PerturbationField: forcing period must be positive");
}

PerturbationField PerturbationField::with_period(double delta) const {
    if (!(delta > 0.0)) throw DomainError("PerturbationField: forcing period must be positive");
    PerturbationField out = *this;
    out.delta_ = delta;
    return out;
}

Vec PerturbationField::force(const Vec& x, double t) const {
    if (!force_) return Vec::Zero(dof_);
    Vec Q = force_(x, t, delta_);
    require_finite(Q, "perturbation");
    return Q;
}

Vec PerturbationField::lagrangian_force(const Vec& q, const Vec& qdot, double t) const {
    if (!lagrangian_) throw CapabilityError("perturbation '" + name_ + "' has no Lagrangian-form force");
    return lagrangian_(q, qdot, t, delta_);
}

Vec PerturbationField::value(const Vec& x, double t) const {
    Vec g = Vec::Zero(2 * dof_);
    g.tail(dof_) = force(x, t);
    return g;
}

Mat PerturbationField::state_jacobian(const Vec& x, double t) const {
    Mat Dg = Mat::Zero(2 * dof_, 2 * dof_);
    if (!force_) return Dg;
    if (jacobian_) {
        Dg.bottomRows(dof_) = jacobian_(x, t, delta_);
    } else {
        Dg.bottomRows(dof_) = fd_jacobian([&](const Vec& y) { return force(y, t); }, x, dof_);
    }
    return Dg;
}

Vec PerturbationField::time_derivative(const Vec& x, double t) const {
    Vec dg = Vec::Zero(2 * dof_);
    if (!force_) return dg;
    if (time_derivative_) {
        dg.tail(dof_) = time_derivative_(x, t, delta_);
    } else if (fd_time_) {
        const double h = 1e-7 * delta_;
        dg.tail(dof_) = (force(x, t + h) - force(x, t - h)) / (2.0 * h);
    } else {
        throw CapabilityError("perturbation '" + name_ +
                              "' has no analytic time derivative; enable the finite-difference "
                              "fallback with allow_fd_time_derivative(true)");
    }
    return dg;
}

PerturbationField operator+(const PerturbationField& a, const PerturbationField& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.dof_ != b.dof_) throw SpecError("perturbation sum: dof mismatch");
    PerturbationField out(
        a.dof_, a.delta_,
        [fa = a.force_, fb = b.force_](const Vec& x, double t, double d) -> Vec { return fa(x, t, d) + fb(x, t, d); },
        a.name_ + "+" + b.name_);
    if (a.lagrangian_ && b.lagrangian_) {
        out.lagrangian_ = [la = a.lagrangian_, lb = b.lagrangian_](const Vec& q, const Vec& v, double t, double d) -> Vec {
            return la(q, v, t, d) + lb(q, v, t, d);
        };
    }
    if (a.jacobian_ && b.jacobian_) {
        out.jacobian_ = [ja = a.jacobian_, jb = b.jacobian_](const Vec& x, double t, double d) -> Mat {
            return ja(x, t, d) + jb(x, t, d);
        };
    }
    if (a.time_derivative_ && b.time_derivative_) {
        out.time_derivative_ = [ta = a.time_derivative_, tb = b.time_derivative_](const Vec& x, double t, double d) -> Vec {
            return ta(x, t, d) + tb(x, t, d);
        };
    }
    out.fd_time_ = a.fd_time_ || b.fd_time_;
    return out;
}

PerturbationField operator*(double c, const PerturbationField& a) {
    if (a.empty()) return a;
    PerturbationField out = a;
    out.force_ = [c, f = a.force_](const Vec& x, double t, double d) -> Vec { return c * f(x, t, d); };
    if (a.lagrangian_)
        out.lagrangian_ = [c, f = a.lagrangian_](const Vec& q, const Vec& v, double t, double d) -> Vec {
            return c * f(q, v, t, d);
        };
    if (a.jacobian_)
        out.jacobian_ = [c, f = a.jacobian_](const Vec& x, double t, double d) -> Mat { return c * f(x, t, d); };
    if (a.time_derivative_)
        out.time_derivative_ = [c, f = a.time_derivative_](const Vec& x, double t, double d) -> Vec {
            return c * f(x, t, d);
        };
    return out;
}

PerturbationField zero_perturbation(int dof, double delta) {
    PerturbationField g(dof, delta, [dof](const Vec&, double, double) -> Vec { return Vec::Zero(dof); }, "zero");
    g.set_lagrangian_force([dof](const Vec&, const Vec&, double, double) -> Vec { return Vec::Zero(dof); });
    g.set_state_jacobian([dof](const Vec&, double, double) -> Mat { return Mat::Zero(dof, 2 * dof); });
    g.set_time_derivative([dof](const Vec&, double, double) -> Vec { return Vec::Zero(dof); });
    return g;
}

}  // namespace nnmstab
