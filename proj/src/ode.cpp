#include "nnmstab/ode.hpp"

#include "dop853_tableau.hpp"

#include <algorithm>
#include <cmath>

namespace nnmstab {

namespace tab = detail::dop853;

namespace {

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;
constexpr double kBeta = 0.04;
constexpr double kExpo1 = 1.0 / 8.0 - 0.75 * kBeta;

double rms_norm(const Vec& v, const Vec& scale, Eigen::Index n) {
    return std::sqrt((v.head(n).array() / scale.head(n).array()).square().mean());
}

double initial_step(const OdeRhs& f, double t0, const Vec& y0, const Vec& f0, double dir, const OdeOptions& opt,
                    Eigen::Index n, long& nfev) {
    const Vec scale = opt.atol + opt.rtol * y0.array().abs();
    const double d0 = rms_norm(y0, scale, n);
    const double d1 = rms_norm(f0, scale, n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    const Vec y1 = y0 + h0 * dir * f0;
    Vec f1(y0.size());
    f(t0 + h0 * dir, y1, f1);
    ++nfev;
    const double d2 = rms_norm(f1 - f0, scale, n) / h0;
    double h1;
    if (d1 <= 1e-15 && d2 <= 1e-15)
        h1 = std::max(1e-6, h0 * 1e-3);
    else
        h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
    return std::min({100.0 * h0, h1, opt.max_step});
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense output
// ---------------------------------------------------------------------------

void DenseOutput::append(double t_old, double h, Vec y_old, Mat F) {
    t_old_.push_back(t_old);
    h_.push_back(h);
    y_old_.push_back(std::move(y_old));
    F_.push_back(std::move(F));
}

std::size_t DenseOutput::segment(double t) const {
    // segments are ordered by t_old in the integration direction
    const bool forward = h_.front() > 0.0;
    std::size_t lo = 0, hi = t_old_.size();
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        const bool after = forward ? t >= t_old_[mid] : t <= t_old_[mid];
        if (after)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

Vec DenseOutput::operator()(double t) const { return head(t, size()); }

Vec DenseOutput::head(double t, Eigen::Index rows) const {
    if (empty()) throw PreconditionError("DenseOutput: no steps stored");
    const double a = std::min(t_begin(), t_end());
    const double b = std::max(t_begin(), t_end());
    const double slack = 1e-12 * std::max(1.0, std::abs(b));
    if (t < a - slack || t > b + slack) throw DomainError("DenseOutput: time outside integrated interval");

    const std::size_t k = segment(t);
    const double x = (t - t_old_[k]) / h_[k];
    const Mat& F = F_[k];
    Vec y = Vec::Zero(rows);
    for (int i = 0; i < F.cols(); ++i) {
        y += F.col(F.cols() - 1 - i).head(rows);
        y *= (i % 2 == 0) ? x : (1.0 - x);
    }
    return y + y_old_[k].head(rows);
}

// ---------------------------------------------------------------------------
// Stepper
// ---------------------------------------------------------------------------

OdeSolution integrate_ode(const OdeRhs& f, double t0, double t1, const Vec& y0, const OdeOptions& opt) {
    if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw ConfigError("integrate_ode: tolerances must be positive");
    if (!y0.allFinite()) throw DomainError("integrate_ode: non-finite initial state");

    const Eigen::Index N = y0.size();
    const Eigen::Index nc = (opt.controlled < 0 || opt.controlled > N) ? N : opt.controlled;

    OdeSolution sol;
    sol.t.push_back(t0);
    sol.y.push_back(y0);
    sol.error_estimate = Vec::Zero(N);
    if (t1 == t0) return sol;

    const double dir = t1 > t0 ? 1.0 : -1.0;
    Mat K(N, tab::kStagesExtended);
    Vec y = y0;
    Vec fy(N);
    f(t0, y, fy);
    ++sol.evaluations;
    if (!fy.allFinite()) throw IntegrationFailure("integrate_ode: non-finite derivative at start", t0);

    double h_abs = opt.first_step > 0.0 ? opt.first_step : initial_step(f, t0, y, fy, dir, opt, nc, sol.evaluations);
    double t = t0;
    double err_prev = 1e-4;
    bool last_rejected = false;

    Vec ytmp(N), ynew(N), fnew(N), scale(N);

    while (dir * (t1 - t) > 0.0) {
        if (sol.accepted + sol.rejected >= opt.max_steps)
            throw IntegrationFailure("integrate_ode: maximum number of steps exceeded", t);
        const double min_step = 10.0 * std::abs(std::nextafter(t, t + dir) - t);
        h_abs = std::min(h_abs, opt.max_step);
        if (h_abs < min_step) throw IntegrationFailure("integrate_ode: step size underflow", t);

        double h = h_abs * dir;
        double t_new = t + h;
        if (dir * (t_new - t1) > 0.0) t_new = t1;
        h = t_new - t;
        h_abs = std::abs(h);

        K.col(0) = fy;
        for (int s = 1; s < tab::kStages; ++s) {
            ytmp = y;
            for (int j = 0; j < s; ++j)
                if (tab::A[s][j] != 0.0) ytmp.noalias() += (h * tab::A[s][j]) * K.col(j);
            Vec ks(N);
            f(t + tab::C[s] * h, ytmp, ks);
            K.col(s) = ks;
        }
        ynew = y;
        for (int j = 0; j < tab::kStages; ++j) ynew.noalias() += (h * tab::B[j]) * K.col(j);
        f(t_new, ynew, fnew);
        sol.evaluations += tab::kStages;
        K.col(tab::kStages) = fnew;

        bool finite = ynew.allFinite() && fnew.allFinite();
        Vec err5 = Vec::Zero(N), err3 = Vec::Zero(N);
        double err_norm = std::numeric_limits<double>::infinity();
        if (finite) {
            for (int j = 0; j <= tab::kStages; ++j) {
                err5.noalias() += tab::E5[j] * K.col(j);
                err3.noalias() += tab::E3[j] * K.col(j);
            }
            scale = opt.atol + opt.rtol * y.cwiseAbs().cwiseMax(ynew.cwiseAbs()).array();
            const double e5 = (err5.head(nc).array() / scale.head(nc).array()).square().sum();
            const double e3 = (err3.head(nc).array() / scale.head(nc).array()).square().sum();
            const double denom = e5 + 0.01 * e3;
            err_norm = denom > 0.0 ? h_abs * e5 / std::sqrt(denom * static_cast<double>(nc)) : 0.0;
        }

        if (err_norm < 1.0) {
            double factor;
            if (err_norm == 0.0)
                factor = kMaxFactor;
            else
                factor = std::min(kMaxFactor, kSafety * std::pow(err_norm, -kExpo1) * std::pow(err_prev, kBeta));
            if (last_rejected) factor = std::min(1.0, factor);
            factor = std::max(kMinFactor, factor);

            // per-component local error: err5 weighted like the norm above
            {
                const Vec e5 = h_abs * err5.cwiseAbs();
                const Vec e3 = h_abs * err3.cwiseAbs();
                const Vec d = (e5.array().square() + 0.01 * e3.array().square()).sqrt();
                for (Eigen::Index i = 0; i < N; ++i)
                    sol.error_estimate[i] += d[i] > 0.0 ? e5[i] * e5[i] / d[i] : 0.0;
            }

            if (opt.dense) {
                for (int s = tab::kStages + 1; s < tab::kStagesExtended; ++s) {
                    ytmp = y;
                    for (int j = 0; j < s; ++j)
                        if (tab::A[s][j] != 0.0) ytmp.noalias() += (h * tab::A[s][j]) * K.col(j);
                    Vec ks(N);
                    f(t + tab::C[s] * h, ytmp, ks);
                    K.col(s) = ks;
                }
                sol.evaluations += tab::kStagesExtended - tab::kStages - 1;
                Mat F(N, tab::kInterpolatorPower);
                const Vec dy = ynew - y;
                F.col(0) = dy;
                F.col(1) = h * fy - dy;
                F.col(2) = 2.0 * dy - h * (fnew + fy);
                for (int r = 0; r < 4; ++r) {
                    Vec acc = Vec::Zero(N);
                    for (int j = 0; j < tab::kStagesExtended; ++j)
                        if (tab::D[r][j] != 0.0) acc.noalias() += tab::D[r][j] * K.col(j);
                    F.col(3 + r) = h * acc;
                }
                sol.dense.append(t, h, y, std::move(F));
            }

            t = t_new;
            y = ynew;
            fy = fnew;
            sol.t.push_back(t);
            sol.y.push_back(y);
            ++sol.accepted;
            err_prev = std::max(err_norm, 1e-4);
            last_rejected = false;
            h_abs *= factor;
        } else {
            ++sol.rejected;
            const double factor =
                finite ? std::max(kMinFactor, kSafety * std::pow(err_norm, -kExpo1)) : kMinFactor;
            h_abs *= factor;
            last_rejected = true;
        }
    }
    return sol;
}

}  // namespace nnmstab
