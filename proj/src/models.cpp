#include "nnmstab/models.hpp"

#include <cmath>
#include <numbers>

namespace nnmstab::models {

using std::numbers::pi;

HamiltonianSystem linear_oscillator(const std::vector<double>& frequencies) {
    const int n = static_cast<int>(frequencies.size());
    if (n < 1) throw DomainError("linear_oscillator: need at least one frequency");
    Vec w2(n);
    for (int i = 0; i < n; ++i) w2[i] = frequencies[i] * frequencies[i];

    auto H = [n, w2](const Vec& x) {
        return 0.5 * x.tail(n).squaredNorm() + 0.5 * (w2.array() * x.head(n).array().square()).sum();
    };
    auto DH = [n, w2](const Vec& x) -> Vec {
        Vec g(2 * n);
        g << w2.cwiseProduct(x.head(n)), x.tail(n);
        return g;
    };
    auto D2H = [n, w2](const Vec&) -> Mat {
        Mat Hm = Mat::Zero(2 * n, 2 * n);
        Hm.topLeftCorner(n, n) = w2.asDiagonal();
        Hm.bottomRightCorner(n, n).setIdentity();
        return Hm;
    };
    return HamiltonianSystem(n, H, DH, D2H, "linear_oscillator");
}

HamiltonianSystem duffing(double linear, double cubic) {
    auto H = [=](const Vec& x) {
        const double q = x[0];
        return 0.5 * x[1] * x[1] + 0.5 * linear * q * q + 0.25 * cubic * q * q * q * q;
    };
    auto DH = [=](const Vec& x) -> Vec {
        const double q = x[0];
        return Eigen::Vector2d(linear * q + cubic * q * q * q, x[1]);
    };
    auto D2H = [=](const Vec& x) -> Mat {
        Mat Hm = Mat::Zero(2, 2);
        Hm(0, 0) = linear + 3.0 * cubic * x[0] * x[0];
        Hm(1, 1) = 1.0;
        return Hm;
    };
    return HamiltonianSystem(1, H, DH, D2H, "duffing");
}

// ---------------------------------------------------------------------------
// Rotating spring system
// ---------------------------------------------------------------------------

namespace {

// l_j = |q + c_j| with c = (l0,0), (0,l0), (-l0,0), (0,-l0).
Eigen::Vector2d spring_offset(const GyroscopicParams& p, int j) {
    switch (j) {
        case 0: return {p.l0, 0.0};
        case 1: return {0.0, p.l0};
        case 2: return {-p.l0, 0.0};
        default: return {0.0, -p.l0};
    }
}

struct SpringGeometry {
    double length;
    Eigen::Vector2d unit;   // gradient of l_j
    Eigen::Matrix2d curv;   // Hessian of l_j
};

SpringGeometry spring_geometry(const GyroscopicParams& p, int j, const Vec& q) {
    const Eigen::Vector2d u = Eigen::Vector2d(q[0], q[1]) + spring_offset(p, j);
    const double l = u.norm();
    if (!(l > 1e-12 * std::max(1.0, p.l0)))
        throw DomainError("gyroscopic: spring " + std::to_string(j + 1) + " has zero length");
    SpringGeometry g;
    g.length = l;
    g.unit = u / l;
    g.curv = (Eigen::Matrix2d::Identity() - g.unit * g.unit.transpose()) / l;
    return g;
}

Eigen::Matrix2d gyro_matrix(double Omega) {
    Eigen::Matrix2d G;
    G << 0.0, -Omega, Omega, 0.0;
    return G;
}

}  // namespace

double gyroscopic_spring_length(const GyroscopicParams& p, int j, const Vec& q, Vec* grad) {
    const SpringGeometry g = spring_geometry(p, j, q);
    if (grad) *grad = g.unit;
    return g.length;
}

Mat gyroscopic_damping_matrix(const GyroscopicParams& p, const Vec& q) {
    Mat C = Mat::Zero(2, 2);
    for (int j = 0; j < 4; ++j) {
        const SpringGeometry g = spring_geometry(p, j, q);
        C += p.k[j] * g.unit * g.unit.transpose();
    }
    return C;
}

HamiltonianSystem gyroscopic(const GyroscopicParams& prm) {
    const Eigen::Matrix2d G = gyro_matrix(prm.Omega);

    auto V = [prm](const Vec& q) {
        double v = 0.0;
        for (int j = 0; j < 4; ++j) {
            const double dl = spring_geometry(prm, j, q).length - prm.l0;
            v += 0.5 * prm.k[j] * dl * dl;
        }
        return v;
    };
    auto H = [G, V](const Vec& x) {
        const Vec q = x.head(2);
        const Vec p = x.tail(2);
        return 0.5 * p.squaredNorm() - p.dot(G * q) + V(q);
    };
    auto DH = [prm, G](const Vec& x) -> Vec {
        const Vec q = x.head(2);
        const Vec p = x.tail(2);
        Eigen::Vector2d dV = Eigen::Vector2d::Zero();
        for (int j = 0; j < 4; ++j) {
            const SpringGeometry g = spring_geometry(prm, j, q);
            dV += prm.k[j] * (g.length - prm.l0) * g.unit;
        }
        Vec out(4);
        out << G * p + dV, p - G * q;
        return out;
    };
    auto D2H = [prm, G](const Vec& x) -> Mat {
        const Vec q = x.head(2);
        Eigen::Matrix2d d2V = Eigen::Matrix2d::Zero();
        for (int j = 0; j < 4; ++j) {
            const SpringGeometry g = spring_geometry(prm, j, q);
            d2V += prm.k[j] * (g.unit * g.unit.transpose() + (g.length - prm.l0) * g.curv);
        }
        Mat Hm(4, 4);
        Hm.topLeftCorner(2, 2) = d2V;
        Hm.topRightCorner(2, 2) = G;
        Hm.bottomLeftCorner(2, 2) = G.transpose();
        Hm.bottomRightCorner(2, 2).setIdentity();
        return Hm;
    };
    HamiltonianSystem sys(2, H, DH, D2H, "gyroscopic");
    sys.set_velocity_map([G](const Vec& x) -> Vec { return x.tail(2) - G * x.head(2); });
    sys.set_scale(prm.l0);
    return sys;
}

PerturbationField gyroscopic_perturbation(const GyroscopicParams& prm, const GyroscopicForcing& f, double delta) {
    const Eigen::Matrix2d G = gyro_matrix(prm.Omega);

    auto forcing = [e = f.e](double t, double d) -> Vec {
        const double w = 2.0 * pi / d;
        return Eigen::Vector2d(e * std::cos(w * t), -e * std::sin(w * t));
    };

    auto Q = [prm, f, G, forcing](const Vec& x, double t, double d) -> Vec {
        const Vec q = x.head(2);
        const Vec p = x.tail(2);
        Vec out = forcing(t, d) - f.alpha * p;
        if (f.beta != 0.0) out -= f.beta * gyroscopic_damping_matrix(prm, q) * (p - G * q);
        return out;
    };
    PerturbationField g(2, delta, Q, "gyroscopic");

    g.set_lagrangian_force([prm, f, G, forcing](const Vec& q, const Vec& qdot, double t, double d) -> Vec {
        Vec out = forcing(t, d) - f.alpha * (qdot + G * q);
        if (f.beta != 0.0) out -= f.beta * gyroscopic_damping_matrix(prm, q) * qdot;
        return out;
    });

    g.set_state_jacobian([prm, f, G](const Vec& x, double, double) -> Mat {
        Mat Jq = Mat::Zero(2, 4);
        Jq.rightCols(2) = -f.alpha * Mat::Identity(2, 2);
        if (f.beta != 0.0) {
            const Vec q = x.head(2);
            const Eigen::Vector2d w = x.tail(2) - G * q;
            Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
            Eigen::Matrix2d dCw = Eigen::Matrix2d::Zero();  // d/dq (C(q) w) at fixed w
            for (int j = 0; j < 4; ++j) {
                const SpringGeometry s = spring_geometry(prm, j, q);
                C += prm.k[j] * s.unit * s.unit.transpose();
                dCw += prm.k[j] * (s.unit.dot(w) * s.curv + s.unit * (s.curv * w).transpose());
            }
            Jq.leftCols(2) += -f.beta * (dCw - C * G);
            Jq.rightCols(2) += -f.beta * C;
        }
        return Jq;
    });

    g.set_time_derivative([e = f.e](const Vec&, double t, double d) -> Vec {
        const double w = 2.0 * pi / d;
        return Eigen::Vector2d(-e * w * std::sin(w * t), -e * w * std::cos(w * t));
    });
    return g;
}

// ---------------------------------------------------------------------------
// Three-mass chain
// ---------------------------------------------------------------------------

HamiltonianSystem parametric_chain(const ChainParams& prm) {
    const double k = prm.k;
    Mat K(3, 3);
    K << k + k / 3.0, -k, 0.0, -k, 2.0 * k, -k, 0.0, -k, k;

    MechanicalIngredients ing;
    ing.dof = 3;
    ing.constant_mass = true;
    ing.mass = [](const Vec&) -> Mat { return Mat::Identity(3, 3); };
    ing.potential = [K, prm](const Vec& q) {
        const double q1 = q[0];
        return 0.5 * q.dot(K * q) + prm.a / 3.0 * q1 * q1 * q1 + prm.b / 4.0 * q1 * q1 * q1 * q1;
    };
    ing.potential_gradient = [K, prm](const Vec& q) -> Vec {
        Vec g = K * q;
        g[0] += prm.a * q[0] * q[0] + prm.b * q[0] * q[0] * q[0];
        return g;
    };
    ing.potential_hessian = [K, prm](const Vec& q) -> Mat {
        Mat Hm = K;
        Hm(0, 0) += 2.0 * prm.a * q[0] + 3.0 * prm.b * q[0] * q[0];
        return Hm;
    };
    return build_from_mechanical(ing, "parametric_chain");
}

PerturbationField parametric_square_wave(int dof, const SquareWaveParametric& f, double delta) {
    if (f.dof_index < 0 || f.dof_index >= dof) throw ConfigError("parametric_square_wave: dof index out of range");
    if (f.harmonics < 1) throw ConfigError("parametric_square_wave: need at least one harmonic");

    auto wave = [f](double t, double d) {
        const double w = 2.0 * pi / d;
        double s = 0.0;
        for (int i = 0; i < f.harmonics; ++i) {
            const double h = 2.0 * i + 1.0;
            s += std::sin(h * w * t) / h;
        }
        return f.amplitude * 4.0 / pi * s;
    };
    auto wave_dt = [f](double t, double d) {
        const double w = 2.0 * pi / d;
        double s = 0.0;
        for (int i = 0; i < f.harmonics; ++i) s += w * std::cos((2.0 * i + 1.0) * w * t);
        return f.amplitude * 4.0 / pi * s;
    };
    const int j = f.dof_index;

    PerturbationField g(
        dof, delta,
        [=](const Vec& x, double t, double d) -> Vec {
            Vec Q = -f.alpha * x.tail(dof);
            Q[j] += x[j] * wave(t, d);
            return Q;
        },
        "parametric_square_wave");
    g.set_lagrangian_force([=](const Vec& q, const Vec& qdot, double t, double d) -> Vec {
        Vec Q = -f.alpha * qdot;
        Q[j] += q[j] * wave(t, d);
        return Q;
    });
    g.set_state_jacobian([=](const Vec&, double t, double d) -> Mat {
        Mat Jq = Mat::Zero(dof, 2 * dof);
        Jq.rightCols(dof) = -f.alpha * Mat::Identity(dof, dof);
        Jq(j, j) = wave(t, d);
        return Jq;
    });
    g.set_time_derivative([=](const Vec& x, double t, double d) -> Vec {
        Vec dQ = Vec::Zero(dof);
        dQ[j] = x[j] * wave_dt(t, d);
        return dQ;
    });
    return g;
}

// ---------------------------------------------------------------------------
// Polynomial potentials and generic harmonic forcing
// ---------------------------------------------------------------------------

namespace {

double monomial(const std::vector<int>& e, const Vec& q) {
    double v = 1.0;
    for (std::size_t i = 0; i < e.size(); ++i) v *= std::pow(q[static_cast<Eigen::Index>(i)], e[i]);
    return v;
}

// d/dq_i of prod q^e, returning coefficient and exponent vector.
double monomial_partial(std::vector<int> e, std::size_t i, const Vec& q) {
    if (e[i] == 0) return 0.0;
    const double c = e[i];
    e[i] -= 1;
    return c * monomial(e, q);
}

double monomial_second(std::vector<int> e, std::size_t i, std::size_t j, const Vec& q) {
    if (e[i] == 0) return 0.0;
    const double c = e[i];
    e[i] -= 1;
    return c * monomial_partial(e, j, q);
}

}  // namespace

HamiltonianSystem polynomial(const Mat& stiffness, const std::vector<PolynomialTerm>& terms) {
    const int n = static_cast<int>(stiffness.rows());
    if (n < 1 || stiffness.cols() != n) throw ConfigError("polynomial: stiffness must be square and non-empty");
    if ((stiffness - stiffness.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, stiffness.norm()))
        throw ConfigError("polynomial: stiffness must be symmetric");
    for (const auto& t : terms) {
        if (static_cast<int>(t.powers.size()) != n) throw ConfigError("polynomial: term exponent length != dof");
        for (int e : t.powers)
            if (e < 0) throw ConfigError("polynomial: negative exponent");
    }

    MechanicalIngredients ing;
    ing.dof = n;
    ing.constant_mass = true;
    ing.mass = [n](const Vec&) -> Mat { return Mat::Identity(n, n); };
    ing.potential = [stiffness, terms](const Vec& q) {
        double v = 0.5 * q.dot(stiffness * q);
        for (const auto& t : terms) v += t.coeff * monomial(t.powers, q);
        return v;
    };
    ing.potential_gradient = [stiffness, terms, n](const Vec& q) -> Vec {
        Vec g = stiffness * q;
        for (const auto& t : terms)
            for (int i = 0; i < n; ++i) g[i] += t.coeff * monomial_partial(t.powers, i, q);
        return g;
    };
    ing.potential_hessian = [stiffness, terms, n](const Vec& q) -> Mat {
        Mat Hm = stiffness;
        for (const auto& t : terms)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) Hm(i, j) += t.coeff * monomial_second(t.powers, i, j, q);
        return Hm;
    };
    return build_from_mechanical(ing, "polynomial");
}

PerturbationField damped_harmonic(int dof, double alpha, const std::vector<HarmonicTerm>& terms, double delta) {
    for (const auto& t : terms) {
        if (t.dof_index < 0 || t.dof_index >= dof) throw ConfigError("forcing term: dof index out of range");
        if (t.parametric_dof >= dof) throw ConfigError("forcing term: parametric dof out of range");
    }
    auto factor = [](const HarmonicTerm& t, const Vec& q) { return t.parametric_dof >= 0 ? q[t.parametric_dof] : 1.0; };

    auto Q = [=](const Vec& q, const Vec& v, double t, double d) -> Vec {
        Vec out = -alpha * v;
        const double w = 2.0 * pi / d;
        for (const auto& term : terms)
            out[term.dof_index] += term.amplitude * factor(term, q) * std::cos(term.harmonic * w * t + term.phase);
        return out;
    };
    PerturbationField g(
        dof, delta, [=](const Vec& x, double t, double d) -> Vec { return Q(x.head(dof), x.tail(dof), t, d); },
        "damped_harmonic");
    g.set_lagrangian_force(Q);
    g.set_state_jacobian([=](const Vec&, double t, double d) -> Mat {
        Mat Jq = Mat::Zero(dof, 2 * dof);
        Jq.rightCols(dof) = -alpha * Mat::Identity(dof, dof);
        const double w = 2.0 * pi / d;
        for (const auto& term : terms)
            if (term.parametric_dof >= 0)
                Jq(term.dof_index, term.parametric_dof) +=
                    term.amplitude * std::cos(term.harmonic * w * t + term.phase);
        return Jq;
    });
    g.set_time_derivative([=](const Vec& x, double t, double d) -> Vec {
        Vec dQ = Vec::Zero(dof);
        const double w = 2.0 * pi / d;
        for (const auto& term : terms)
            dQ[term.dof_index] -= term.amplitude * factor(term, x.head(dof)) * term.harmonic * w *
                                  std::sin(term.harmonic * w * t + term.phase);
        return dQ;
    });
    return g;
}

}  // namespace nnmstab::models
