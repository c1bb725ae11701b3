#pragma once

// Independent oracles and fixtures shared by the test suites.

#include "nnmstab/config.hpp"
#include "nnmstab/linalg.hpp"
#include "nnmstab/models.hpp"
#include "nnmstab/orbits.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace nnmstab::testing {

inline std::string config_path(const std::string& name) { return std::string(NNMSTAB_CONFIG_DIR) + "/" + name; }

// Duffing H = p^2/2 + q^2/2 + q^4/4 (k = c = 1): turning amplitude and the
// period from the complete elliptic integral of the first kind.
inline double duffing_amplitude(double h) { return std::sqrt(std::sqrt(1.0 + 4.0 * h) - 1.0); }

inline double duffing_period(double h) {
    const double A2 = std::sqrt(1.0 + 4.0 * h) - 1.0;
    const double k = std::sqrt(A2 / (2.0 * (1.0 + A2)));
    return 4.0 * std::comp_ellint_1(k) / std::sqrt(1.0 + A2);
}

inline double duffing_period_slope(double h) {
    const double dh = 1e-5 * h;
    return (duffing_period(h + dh) - duffing_period(h - dh)) / (2.0 * dh);
}

// Fixed-step RK4 on the Duffing equations, independent of the library integrator.
struct DuffingSample {
    std::vector<double> q, p;
};

inline DuffingSample duffing_rk4(double q0, double p0, double T, int steps) {
    DuffingSample out;
    out.q.reserve(steps + 1);
    out.p.reserve(steps + 1);
    const double dt = T / steps;
    auto f = [](double q, double p) { return std::pair{p, -q - q * q * q}; };
    double q = q0, p = p0;
    for (int i = 0; i <= steps; ++i) {
        out.q.push_back(q);
        out.p.push_back(p);
        const auto [a1, b1] = f(q, p);
        const auto [a2, b2] = f(q + 0.5 * dt * a1, p + 0.5 * dt * b1);
        const auto [a3, b3] = f(q + 0.5 * dt * a2, p + 0.5 * dt * b2);
        const auto [a4, b4] = f(q + dt * a3, p + dt * b3);
        q += dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
        p += dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4);
    }
    return out;
}

// Duffing orbit on its turning point (q = A, p = 0) with the exact period.
inline PeriodicOrbit duffing_orbit(const HamiltonianSystem& sys, double h) {
    Vec z(2);
    z << duffing_amplitude(h), 0.0;
    return find_periodic_orbit(sys, z, duffing_period(h), ShootingConstraint::energy(h));
}

inline Mat random_matrix(std::mt19937& rng, int rows, int cols) {
    std::normal_distribution<double> d;
    Mat A(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) A(i, j) = d(rng);
    return A;
}

inline Mat random_symmetric(std::mt19937& rng, int n) {
    const Mat A = random_matrix(rng, n, n);
    return 0.5 * (A + A.transpose());
}

// Product of symplectic shears [I S; 0 I], [I 0; S I] and a block
// diag(A, A^{-T}).
inline Mat random_symplectic(std::mt19937& rng, int n, int factors = 4) {
    Mat X = Mat::Identity(2 * n, 2 * n);
    for (int f = 0; f < factors; ++f) {
        Mat U = Mat::Identity(2 * n, 2 * n);
        U.topRightCorner(n, n) = 0.5 * random_symmetric(rng, n);
        Mat L = Mat::Identity(2 * n, 2 * n);
        L.bottomLeftCorner(n, n) = 0.5 * random_symmetric(rng, n);
        const Mat A = Mat::Identity(n, n) + 0.3 * random_matrix(rng, n, n);
        Mat D = Mat::Zero(2 * n, 2 * n);
        D.topLeftCorner(n, n) = A;
        D.bottomRightCorner(n, n) = A.inverse().transpose();
        X = U * L * D * X;
    }
    return X;
}

}  // namespace nnmstab::testing
