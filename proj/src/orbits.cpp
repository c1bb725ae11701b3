#include "nnmstab/orbits.hpp"

#include "nnmstab/floquet.hpp"
#include "nnmstab/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

namespace nnmstab {

using std::numbers::pi;

double PeriodicOrbit::omega() const { return 2.0 * pi / tau; }

namespace {

struct ShotResult {
    Vec end;   // x0(tau; z)
    Mat X;     // X0(tau; z)
    Vec f_end; // J DH(x0(tau))
};

ShotResult shoot(const HamiltonianSystem& sys, const Vec& z, double tau, double tol) {
    const VariationalTrajectory vt = flow_with_variations(sys, z, tau, tol);
    ShotResult r;
    r.end = vt.base().final_state();
    r.X = vt.final_transition();
    r.f_end = sys.vector_field(r.end);
    return r;
}

Vec unit(const Vec& v) {
    const double n = v.norm();
    if (!(n > 0.0)) throw PreconditionError("orbits: vector field vanishes at the anchor (equilibrium)");
    return v / n;
}

// Null vector of the (2n+1) x (2n+1) matrix [Pi - I, f; n^T, 0].
Vec family_tangent(const Mat& X, const Vec& f_end, const Vec& normal) {
    const Eigen::Index d = X.rows();
    Mat A = Mat::Zero(d + 1, d + 1);
    A.topLeftCorner(d, d) = X - Mat::Identity(d, d);
    A.topRightCorner(d, 1) = f_end;
    A.bottomLeftCorner(1, d) = normal.transpose();
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
    return svd.matrixV().col(d);
}

std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        delta[i] = (y[i + 1] - y[i]) / h[i];
    }
    if (n == 2) {
        d[0] = d[1] = delta[0];
        return d;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) continue;
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0.0) return 0.0;
        if (d0 * d1 <= 0.0 && std::abs(s) > std::abs(3.0 * d0)) return 3.0 * d0;
        return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// Single orbits
// ---------------------------------------------------------------------------

PeriodicOrbit make_orbit(const HamiltonianSystem& sys, const Vec& z, double tau, int m, double integration_tol) {
    if (m < 1) throw ConfigError("make_orbit: cycles must be positive");
    if (!(tau > 0.0)) throw DomainError("make_orbit: period must be positive");
    PeriodicOrbit o;
    o.z = z;
    o.tau = tau;
    o.m = m;
    o.h = sys.hamiltonian(z);
    const ShotResult one = shoot(sys, z, tau, integration_tol);
    o.monodromy_one = one.X;
    o.residual = (one.end - z).norm();
    if (m == 1) {
        o.monodromy = one.X;
    } else {
        const ShotResult all = shoot(sys, z, m * tau, integration_tol);
        o.monodromy = all.X;
        o.residual = std::max(o.residual, (all.end - z).norm());
    }
    o.anchor_point = z;
    o.anchor_normal = unit(sys.vector_field(z));
    return o;
}

PeriodicOrbit with_cycles(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, int m, double integration_tol) {
    PeriodicOrbit o = make_orbit(sys, orbit.z, orbit.tau, m, integration_tol);
    o.anchor_point = orbit.anchor_point;
    o.anchor_normal = orbit.anchor_normal;
    o.warnings = orbit.warnings;
    return o;
}

PeriodicOrbit rebase(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, double s, double integration_tol) {
    double shift = std::fmod(s, orbit.tau);
    if (shift < 0.0) shift += orbit.tau;
    Vec z = orbit.z;
    if (shift > 0.0) z = flow(sys, orbit.z, shift, integration_tol).final_state();
    return make_orbit(sys, z, orbit.tau, orbit.m, integration_tol);
}

PeriodicOrbit find_periodic_orbit(const HamiltonianSystem& sys, const Vec& guess_z, double guess_tau,
                                  ShootingConstraint constraint, const ShootingOptions& opt) {
    const int d = sys.dim();
    if (guess_z.size() != d) throw DomainError("find_periodic_orbit: guess dimension mismatch");
    if (!(guess_tau > 0.0)) throw DomainError("find_periodic_orbit: period guess must be positive");

    const Vec za = guess_z;
    const Vec na = unit(sys.vector_field(za));
    const bool has_con = constraint.kind != ShootingConstraint::Kind::free;
    const Eigen::Index rows = d + 1 + (has_con ? 1 : 0);
    const double scale = sys.scale();
    const double con_scale = constraint.kind == ShootingConstraint::Kind::fix_energy
                                 ? std::max(1.0, std::abs(constraint.value))
                                 : std::max(1.0, constraint.value);

    Vec z = guess_z;
    double tau = constraint.kind == ShootingConstraint::Kind::fix_period ? constraint.value : guess_tau;

    auto residual_of = [&](const Vec& zz, double tt, const ShotResult& r) {
        Vec res(rows);
        res.head(d) = r.end - zz;
        res[d] = (zz - za).dot(na);
        if (constraint.kind == ShootingConstraint::Kind::fix_energy)
            res[d + 1] = sys.hamiltonian(zz) - constraint.value;
        else if (constraint.kind == ShootingConstraint::Kind::fix_period)
            res[d + 1] = tt - constraint.value;
        return res;
    };
    // small orbits meet the absolute closure test early; the last Newton
    // step must also be small relative to (z, tau)
    double last_step = 0.0;
    auto converged = [&](const Vec& res) {
        const double closure = res.head(d).norm();
        const double con = has_con ? std::abs(res[d + 1]) / con_scale : 0.0;
        return closure <= opt.closure_tol * scale && std::abs(res[d]) <= opt.closure_tol * scale && con <= 1e-12 &&
               last_step <= 1e-6;
    };

    ShotResult shot = shoot(sys, z, tau, opt.integration_tol);
    Vec res = residual_of(z, tau, shot);
    std::vector<double> history{res.norm()};
    std::vector<std::string> warnings;

    for (int it = 0; it <= opt.max_iter; ++it) {
        if (converged(res)) {
            PeriodicOrbit o;
            o.z = z;
            o.tau = tau;
            o.m = 1;
            o.h = sys.hamiltonian(z);
            o.monodromy_one = shot.X;
            o.monodromy = shot.X;
            o.residual = res.head(d).norm();
            o.anchor_point = za;
            o.anchor_normal = na;
            o.iterations = it;
            o.warnings = warnings;
            if (opt.cycles > 1) {
                PeriodicOrbit om = with_cycles(sys, o, opt.cycles, opt.integration_tol);
                om.iterations = it;
                return om;
            }
            return o;
        }
        if (it == opt.max_iter) break;

        Mat A = Mat::Zero(rows, d + 1);
        A.topLeftCorner(d, d) = shot.X - Mat::Identity(d, d);
        A.topRightCorner(d, 1) = shot.f_end;
        A.block(d, 0, 1, d) = na.transpose();
        if (constraint.kind == ShootingConstraint::Kind::fix_energy)
            A.block(d + 1, 0, 1, d) = sys.gradient(z).transpose();
        else if (constraint.kind == ShootingConstraint::Kind::fix_period)
            A(d + 1, d) = 1.0;

        if (it == 0) {
            Eigen::JacobiSVD<Mat> svd(A);
            const Vec sv = svd.singularValues();
            const Eigen::Index expected = has_con ? d + 1 : d;
            if (sv[expected - 1] < 1e-8 * sv[0])
                warnings.push_back("shooting Jacobian rank-deficient beyond the expected kernel; non-normal orbit suspected");
        }

        const Vec step = -least_squares(A, res);
        double lambda = 1.0;
        bool improved = false;
        for (int k = 0; k < 6; ++k, lambda *= 0.5) {
            const Vec zt = z + lambda * step.head(d);
            const double tt = tau + lambda * step[d];
            if (!(tt > 0.0)) continue;
            try {
                ShotResult trial = shoot(sys, zt, tt, opt.integration_tol);
                Vec rt = residual_of(zt, tt, trial);
                const double prev_step = last_step;
                last_step = std::max(lambda * step.head(d).norm() / std::max(zt.norm(), 1e-300),
                                     lambda * std::abs(step[d]) / tt);
                if (rt.norm() < res.norm() || converged(rt)) {
                    z = zt;
                    tau = tt;
                    shot = std::move(trial);
                    res = std::move(rt);
                    improved = true;
                    break;
                }
                last_step = prev_step;
            } catch (const DomainError&) {
            } catch (const IntegrationFailure&) {
            }
        }
        history.push_back(res.norm());
        if (!improved) {
            if (it < 3)
                throw NoConvergence("find_periodic_orbit: residual not decreasing; guess outside Newton basin", history);
            break;
        }
    }
    throw NoConvergence("find_periodic_orbit: Newton did not converge", history);
}

OrbitGuess linear_mode_guess(const HamiltonianSystem& sys, const Vec& equilibrium, int mode, double amplitude) {
    const LinearizationReport rep = linearized_frequencies(sys, equilibrium);
    if (mode < 0 || mode >= rep.frequencies.size()) throw DomainError("linear_mode_guess: mode index out of range");
    const double w = rep.frequencies[mode];
    Eigen::EigenSolver<Mat> es(sys.vector_field_jacobian(equilibrium));
    Eigen::Index best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double e = std::abs(es.eigenvalues()[i] - Complex(0.0, w));
        if (e < dist) {
            dist = e;
            best = i;
        }
    }
    CVec v = es.eigenvectors().col(best);
    const int n = sys.dof();
    Eigen::Index k;
    v.head(n).cwiseAbs().maxCoeff(&k);
    v *= std::conj(v[k]) / std::abs(v[k]);
    Vec re = v.real();
    re /= re.norm();
    OrbitGuess g;
    g.z = equilibrium + amplitude * re;
    g.tau = 2.0 * pi / w;
    return g;
}

Vec orbit_amplitudes(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, int samples) {
    const Trajectory tr = flow(sys, orbit.z, orbit.tau, 1e-11);
    const int n = sys.dof();
    Vec amp = Vec::Zero(n);
    for (int k = 0; k <= samples; ++k) {
        const Vec x = tr.dense_eval(orbit.tau * k / samples);
        amp = amp.cwiseMax(x.head(n).cwiseAbs());
    }
    return amp;
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

OrbitFamily::OrbitFamily(std::shared_ptr<const HamiltonianSystem> sys, std::vector<PeriodicOrbit> orbits,
                         Parametrization par, std::vector<FamilyEvent> events, ShootingOptions shooting)
    : sys_(std::move(sys)), orbits_(std::move(orbits)), par_(par), events_(std::move(events)),
      shooting_(shooting) {
    if (orbits_.empty()) throw PreconditionError("OrbitFamily: empty family");
    std::vector<std::pair<double, double>> ht;
    for (const auto& o : orbits_) ht.emplace_back(o.h, o.tau);
    std::sort(ht.begin(), ht.end());
    for (const auto& [h, t] : ht) {
        if (!hs_.empty() && !(h > hs_.back())) continue;
        hs_.push_back(h);
        taus_.push_back(t);
    }
    slopes_ = pchip_slopes(hs_, taus_);
}

bool OrbitFamily::stalled() const {
    return std::any_of(events_.begin(), events_.end(), [](const FamilyEvent& e) { return e.kind == "stall"; });
}

double OrbitFamily::h_min() const { return hs_.front(); }
double OrbitFamily::h_max() const { return hs_.back(); }

double OrbitFamily::period_fn(double h) const {
    if (hs_.size() == 1) return taus_.front();
    const double slack = 1e-12 * std::max(1.0, std::abs(h));
    if (h < h_min() - slack || h > h_max() + slack) throw DomainError("period_fn: h outside the sampled range");
    std::size_t i = std::upper_bound(hs_.begin(), hs_.end(), h) - hs_.begin();
    i = std::clamp<std::size_t>(i, 1, hs_.size() - 1) - 1;
    const double dx = hs_[i + 1] - hs_[i];
    const double t = (h - hs_[i]) / dx;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * taus_[i] + h10 * dx * slopes_[i] + h01 * taus_[i + 1] + h11 * dx * slopes_[i + 1];
}

double OrbitFamily::period_derivative_fn(double h) const { return period_derivative(*this, h); }

const PeriodicOrbit& OrbitFamily::nearest(double h) const {
    return *std::min_element(orbits_.begin(), orbits_.end(), [h](const PeriodicOrbit& a, const PeriodicOrbit& b) {
        return std::abs(a.h - h) < std::abs(b.h - h);
    });
}

std::vector<PeriodicOrbit> OrbitFamily::orbits_with_period(double tau) const {
    std::vector<PeriodicOrbit> out;
    for (std::size_t i = 0; i + 1 < orbits_.size(); ++i) {
        const double a = orbits_[i].tau - tau;
        const double b = orbits_[i + 1].tau - tau;
        if (a * b > 0.0 || (b == 0.0 && i + 2 < orbits_.size())) continue;
        const PeriodicOrbit& seed = std::abs(a) <= std::abs(b) ? orbits_[i] : orbits_[i + 1];
        // linear interpolation of the anchor improves the Newton start
        const double w = a == b ? 0.0 : a / (a - b);
        const Vec guess = (1.0 - w) * orbits_[i].z + w * orbits_[i + 1].z;
        try {
            out.push_back(find_periodic_orbit(*sys_, guess, tau, ShootingConstraint::period(tau), shooting_));
        } catch (const NoConvergence&) {
            out.push_back(find_periodic_orbit(*sys_, seed.z, tau, ShootingConstraint::period(tau), shooting_));
        }
    }
    return out;
}

OrbitFamily continue_family(const HamiltonianSystem& sys, const PeriodicOrbit& seed, const ContinuationOptions& opt) {
    const int d = sys.dim();
    const double tol = opt.shooting.integration_tol;
    const double ctol = opt.shooting.closure_tol * sys.scale();
    auto sysp = std::make_shared<const HamiltonianSystem>(sys);

    {
        const NormalityReport nr = classify_normality(sys, seed);
        if (!nr.normal()) throw PreconditionError("continue_family: seed orbit is not 1-normal");
    }

    std::vector<PeriodicOrbit> orbits{seed.m == 1 ? seed : with_cycles(sys, seed, 1, tol)};
    std::vector<FamilyEvent> events;

    auto param_of = [&](const PeriodicOrbit& o) {
        return opt.parametrization == Parametrization::energy ? o.h : o.tau;
    };
    auto count_off_circle = [](const Mat& P, bool negative) {
        Eigen::EigenSolver<Mat> es(P, false);
        int c = 0;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            const Complex mu = es.eigenvalues()[i];
            if (std::abs(mu.imag()) > 1e-9 * std::abs(mu)) continue;
            if (negative ? mu.real() < -1.0 - 1e-6 : mu.real() > 1.0 + 1e-4) ++c;
        }
        return c;
    };

    Vec y(d + 1);
    y << orbits.back().z, orbits.back().tau;
    Vec t = family_tangent(orbits.back().monodromy_one, sys.vector_field(y.head(d)), unit(sys.vector_field(y.head(d))));
    {
        const double dp = opt.parametrization == Parametrization::energy ? sys.gradient(y.head(d)).dot(t.head(d)) : t[d];
        if (dp * opt.direction < 0.0) t = -t;
    }

    double ds = opt.initial_step;
    int easy = 0;
    int neg_prev = count_off_circle(orbits.back().monodromy_one, true);
    int pos_prev = count_off_circle(orbits.back().monodromy_one, false);

    for (int step = 0; step < opt.max_steps; ++step) {
        const Vec zp = y.head(d);
        const Vec na = unit(sys.vector_field(zp));
        bool accepted = false;
        Vec ynew;
        ShotResult shot;
        int iters = 0;

        while (!accepted) {
            const Vec ypred = y + ds * t;
            ynew = ypred;
            Vec res(d + 2);
            auto eval = [&](const Vec& yy) {
                shot = shoot(sys, yy.head(d), yy[d], tol);
                res.head(d) = shot.end - yy.head(d);
                res[d] = (yy.head(d) - zp).dot(na);
                res[d + 1] = (yy - ypred).dot(t);
            };
            bool ok = false;
            try {
                eval(ynew);
                double prev = res.norm();
                for (iters = 0; iters < 8; ++iters) {
                    if (res.head(d).norm() <= ctol && std::abs(res[d]) <= ctol && std::abs(res[d + 1]) <= ctol) {
                        ok = true;
                        break;
                    }
                    Mat A = Mat::Zero(d + 2, d + 1);
                    A.topLeftCorner(d, d) = shot.X - Mat::Identity(d, d);
                    A.topRightCorner(d, 1) = shot.f_end;
                    A.block(d, 0, 1, d) = na.transpose();
                    A.row(d + 1) = t.transpose();
                    ynew -= least_squares(A, res);
                    if (!(ynew[d] > 0.0)) break;
                    eval(ynew);
                    if (iters >= 2 && res.norm() > prev) break;
                    prev = res.norm();
                }
            } catch (const DomainError&) {
            } catch (const IntegrationFailure&) {
            }
            if (ok) {
                accepted = true;
            } else {
                ds *= 0.5;
                easy = 0;
                if (ds < opt.min_step) break;
            }
        }
        if (!accepted) {
            events.push_back({orbits.size() - 1, "stall"});
            break;
        }

        PeriodicOrbit o;
        o.z = ynew.head(d);
        o.tau = ynew[d];
        o.m = 1;
        o.h = sys.hamiltonian(o.z);
        o.monodromy = o.monodromy_one = shot.X;
        o.residual = (shot.end - o.z).norm();
        o.anchor_point = zp;
        o.anchor_normal = na;
        o.iterations = iters;

        const double dpar = param_of(o) - param_of(orbits.back());
        if (dpar * opt.direction <= 0.0) {
            events.push_back({orbits.size() - 1, "turning-point"});
            break;
        }

        Vec tn = family_tangent(shot.X, shot.f_end, unit(sys.vector_field(o.z)));
        if (tn.dot(t) < 0.0) tn = -tn;

        orbits.push_back(o);
        y = ynew;
        t = tn;

        const int neg = count_off_circle(o.monodromy_one, true);
        const int pos = count_off_circle(o.monodromy_one, false);
        bool bif = false;
        if (neg != neg_prev) {
            events.push_back({orbits.size() - 1, "period-doubling"});
            bif = true;
        }
        if (pos != pos_prev) {
            events.push_back({orbits.size() - 1, "plus-one"});
            bif = true;
        }
        neg_prev = neg;
        pos_prev = pos;
        if (bif && opt.stop_at_bifurcation) break;
        if (opt.stop && opt.stop(o)) break;

        if (iters <= 3) {
            if (++easy >= 4) {
                ds = std::min(2.0 * ds, opt.max_step);
                easy = 0;
            }
        } else {
            easy = 0;
        }
    }

    return OrbitFamily(sysp, std::move(orbits), opt.parametrization, std::move(events), opt.shooting);
}

PeriodDerivative period_derivative_report(const OrbitFamily& family, double h) {
    const double slack = 1e-12 * std::max(1.0, std::abs(h));
    if (h < family.h_min() - slack || h > family.h_max() + slack)
        throw DomainError("period_derivative: h outside the sampled range (no extrapolation)");
    const HamiltonianSystem& sys = family.system();
    const PeriodicOrbit& seed = family.nearest(h);
    // local step: relative to h, and well inside the neighbouring samples
    double gap = family.h_max() - family.h_min();
    for (const auto& o : family.orbits())
        if (o.h != seed.h) gap = std::min(gap, std::abs(o.h - seed.h));
    const double dh = std::min(1e-3 * std::max(std::abs(h), 1e-6), 0.25 * gap);

    auto period_at = [&](double hh) {
        return find_periodic_orbit(sys, seed.z, seed.tau, ShootingConstraint::energy(hh), family.shooting()).tau;
    };
    PeriodDerivative r;
    r.dh = dh;
    r.value = (period_at(h + dh) - period_at(h - dh)) / (2.0 * dh);
    r.value_half = (period_at(h + 0.5 * dh) - period_at(h - 0.5 * dh)) / dh;
    const double change = std::abs(r.value - r.value_half) / std::max(std::abs(r.value), 1e-300);
    r.sign_stable = (r.value * r.value_half > 0.0 && change <= 0.05) || (r.value == 0.0 && r.value_half == 0.0);
    return r;
}

double period_derivative(const OrbitFamily& family, double h) { return period_derivative_report(family, h).value; }

void write_backbone_csv(std::ostream& os, const OrbitFamily& family) {
    const HamiltonianSystem& sys = family.system();
    const int n = sys.dof();
    os << "h,tau,omega";
    for (int i = 1; i <= n; ++i) os << ",max_abs_q_" << i;
    os << ",normality";
    for (int i = 1; i <= 2 * n; ++i) os << ",mu_re_" << i << ",mu_im_" << i;
    os << ",flag\n" << std::setprecision(17);
    for (std::size_t k = 0; k < family.size(); ++k) {
        const PeriodicOrbit& o = family.orbits()[k];
        const Vec amp = orbit_amplitudes(sys, o);
        const NormalityReport nr = classify_normality(sys, o);
        const SpectralSummary ss = spectral_summary(o);
        os << o.h << ',' << o.tau << ',' << o.omega();
        for (int i = 0; i < n; ++i) os << ',' << amp[i];
        os << ',' << to_string(nr.cls);
        for (Eigen::Index i = 0; i < ss.eigenvalues.size(); ++i)
            os << ',' << ss.eigenvalues[i].real() << ',' << ss.eigenvalues[i].imag();
        std::string flag;
        for (const auto& e : family.events())
            if (e.index == k) flag += (flag.empty() ? "" : ";") + e.kind;
        os << ',' << flag << '\n';
    }
}

}  // namespace nnmstab
