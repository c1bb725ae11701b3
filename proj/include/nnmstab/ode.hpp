#pragma once

// Explicit Dormand-Prince 8(5,3) integrator with a 7th-order continuous
// extension. Generic over the state dimension; the flow and variational
// solvers in integrate.hpp are built on it.

#include "nnmstab/types.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace nnmstab {

struct OdeOptions {
    double rtol = 1e-11;
    double atol = 1e-11;
    double first_step = 0.0;  ///< 0 selects automatically
    double max_step = std::numeric_limits<double>::infinity();
    long max_steps = 500000;
    bool dense = true;
    /// Components excluded from step-size control (appended quadratures
    /// that should not slow down the base flow). Empty means all.
    Eigen::Index controlled = -1;
};

using OdeRhs = std::function<void(double t, const Vec& y, Vec& dydt)>;

/// Piecewise polynomial continuous extension of an ODE solution.
class DenseOutput {
public:
    bool empty() const { return t_old_.empty(); }
    double t_begin() const { return t_old_.front(); }
    double t_end() const { return t_old_.back() + h_.back(); }
    Eigen::Index size() const { return empty() ? 0 : y_old_.front().size(); }

    /// Full state at time t (clamped to the covered interval within 1e-12 relative).
    Vec operator()(double t) const;
    /// Leading `rows` components only.
    Vec head(double t, Eigen::Index rows) const;

    void append(double t_old, double h, Vec y_old, Mat F);

private:
    std::size_t segment(double t) const;

    std::vector<double> t_old_;
    std::vector<double> h_;
    std::vector<Vec> y_old_;
    std::vector<Mat> F_;  // size x 7 interpolation coefficients
};

struct OdeSolution {
    std::vector<double> t;
    std::vector<Vec> y;
    DenseOutput dense;
    /// Sum over steps of the per-component local error estimates.
    Vec error_estimate;
    long accepted = 0;
    long rejected = 0;
    long evaluations = 0;

    const Vec& final_state() const { return y.back(); }
};

/// Integrate y' = f(t, y) from t0 to t1 (either direction).
OdeSolution integrate_ode(const OdeRhs& f, double t0, double t1, const Vec& y0, const OdeOptions& opt = {});

}  // namespace nnmstab
