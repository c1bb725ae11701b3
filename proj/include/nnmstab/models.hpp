#pragma once

// Ready-made conservative systems and non-conservative perturbations. Each
// builder supplies analytic derivatives.

#include "nnmstab/dynsys.hpp"

#include <array>
#include <vector>

namespace nnmstab::models {

/// H = 1/2 |p|^2 + 1/2 sum w_i^2 q_i^2.
HamiltonianSystem linear_oscillator(const std::vector<double>& frequencies);

/// H = 1/2 p^2 + 1/2 k q^2 + 1/4 c q^4.
HamiltonianSystem duffing(double linear = 1.0, double cubic = 1.0);

/// Mass on four springs in a frame rotating with angular velocity Omega
/// (unit mass):  H = 1/2 |p|^2 - <p, G q> + V(q),  G = [0 -Omega; Omega 0],
/// V = 1/2 sum k_j (l_j - l0)^2 with l_{1,3} = |(l0 +- x, y)|, l_{2,4} = |(x, l0 +- y)|.
struct GyroscopicParams {
    double Omega = 0.942;
    double l0 = 1.0;
    std::array<double, 4> k{1.0, 4.08, 1.37, 2.51};
};
HamiltonianSystem gyroscopic(const GyroscopicParams& p = {});

/// Damping and forcing of the rotating spring system:
///   Q = e (cos(2 pi t/delta), -sin(2 pi t/delta)) - alpha p - beta C(q) (p - G q)
/// where C(q) = sum k_j grad l_j grad l_j^T (stiffness-proportional dampers).
struct GyroscopicForcing {
    double alpha = 0.0;
    double beta = 0.0;
    double e = 1.0;
};
PerturbationField gyroscopic_perturbation(const GyroscopicParams& sys, const GyroscopicForcing& f, double delta);

/// Spring length l_j(q) and its gradient, j = 0..3.
double gyroscopic_spring_length(const GyroscopicParams& p, int j, const Vec& q, Vec* grad = nullptr);
/// Damping matrix C(q).
Mat gyroscopic_damping_matrix(const GyroscopicParams& p, const Vec& q);

/// Three unit masses in a chain with a nonlinear grounding spring on the first:
///   V = k/2 (q1-q2)^2 + k/2 (q2-q3)^2 + k/6 q1^2 + a/3 q1^3 + b/4 q1^4.
struct ChainParams {
    double k = 1.0;
    double a = -0.5;
    double b = 1.0;
};
HamiltonianSystem parametric_chain(const ChainParams& p = {});

/// Q = -alpha p + e_j q_j f(t), f the truncated Fourier series of a unit
/// square wave with period delta: f = 4/pi sum_{i<harmonics} sin((2i+1) w t)/(2i+1).
struct SquareWaveParametric {
    double alpha = 0.121;
    int harmonics = 3;
    int dof_index = 2;
    double amplitude = 1.0;
};
PerturbationField parametric_square_wave(int dof, const SquareWaveParametric& f, double delta);

/// Polynomial potential with identity mass:
///   V = 1/2 q^T K q + sum_terms c * prod_i q_i^{e_i}.
struct PolynomialTerm {
    double coeff = 0.0;
    std::vector<int> powers;
};
HamiltonianSystem polynomial(const Mat& stiffness, const std::vector<PolynomialTerm>& terms);

/// Mass-proportional damping plus harmonic (optionally parametric) forcing on
/// a system with identity mass and no gyroscopic terms:
///   Q_i = -alpha p_i + sum_terms A [q_j] cos(2 pi h t/delta + phi).
struct HarmonicTerm {
    int dof_index = 0;
    double amplitude = 0.0;
    int harmonic = 1;
    double phase = 0.0;
    int parametric_dof = -1;  ///< multiply by q_j when >= 0
};
PerturbationField damped_harmonic(int dof, double alpha, const std::vector<HarmonicTerm>& terms, double delta);

}  // namespace nnmstab::models
