#include "nnmstab/verify.hpp"

#include "nnmstab/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Eigenvalues>

namespace nnmstab {

namespace {

PerturbedOrbit newton_period_map(const HamiltonianSystem& sys, const PerturbationField& g, const VerifyConfig& cfg) {
    const int d = sys.dim();
    const PerturbationField gg = g.with_period(cfg.forcing_period);
    const double T = cfg.cycles_l * cfg.forcing_period;
    const double tol = cfg.newton_tol * sys.scale();

    auto map = [&](const Vec& xi) { return flow_with_variations(sys, gg, cfg.epsilon, xi, T, cfg.integration_tol); };

    PerturbedOrbit po;
    Vec xi = cfg.seed;
    VariationalTrajectory vt = map(xi);
    Vec F = vt.base().final_state() - xi;
    double r = F.norm();
    po.residual_history.push_back(r);
    int it = 0;
    while (r > tol) {
        if (it >= cfg.max_iter || !std::isfinite(r))
            throw NoConvergence("find_perturbed_orbit: no orbit found", po.residual_history);
        const Mat A = vt.final_transition() - Mat::Identity(d, d);
        const Vec step = least_squares(A, -F);
        double lambda = 1.0;
        bool accepted = false;
        for (int k = 0; k < 12; ++k) {
            const Vec trial = xi + lambda * step;
            try {
                VariationalTrajectory vt2 = map(trial);
                const Vec F2 = vt2.base().final_state() - trial;
                if (F2.norm() < r) {
                    xi = trial;
                    vt = std::move(vt2);
                    F = F2;
                    r = F.norm();
                    accepted = true;
                    break;
                }
            } catch (const IntegrationFailure&) {
            }
            lambda *= 0.5;
        }
        ++it;
        po.residual_history.push_back(r);
        if (!accepted) throw NoConvergence("find_perturbed_orbit: line search failed", po.residual_history);
    }
    po.initial_condition = PhaseState(xi);
    po.period = T;
    po.monodromy = vt.final_transition();
    po.multipliers = Eigen::EigenSolver<Mat>(po.monodromy).eigenvalues();
    po.residual = r;
    po.iterations = it;
    return po;
}

// Near a resonance the tangent block of P - I has a singular value of
// order eps, so the Newton basin around the seed shrinks as eps grows.
// On failure the orbit is continued in eps from a value where Newton
// converges, with an adaptive step.
PerturbedOrbit continued_in_epsilon(const HamiltonianSystem& sys, const PerturbationField& g, const VerifyConfig& cfg) {
    auto attempt = [&](const Vec& seed, double eps) -> std::optional<PerturbedOrbit> {
        VerifyConfig c = cfg;
        c.seed = seed;
        c.epsilon = eps;
        try {
            return newton_period_map(sys, g, c);
        } catch (const NoConvergence&) {
        } catch (const IntegrationFailure&) {
        }
        return std::nullopt;
    };
    std::vector<double> history;
    try {
        return newton_period_map(sys, g, cfg);
    } catch (const NoConvergence& e) {
        if (cfg.epsilon == 0.0 || cfg.epsilon_halvings <= 0) throw;
        history = e.residual_history();
    }
    double eps = cfg.epsilon;
    std::optional<PerturbedOrbit> cur;
    for (int k = 0; k < cfg.epsilon_halvings && !cur; ++k) {
        eps *= 0.5;
        cur = attempt(cfg.seed, eps);
    }
    if (!cur) throw NoConvergence("find_perturbed_orbit: no orbit found", history);
    double step = eps;
    const double min_step = cfg.epsilon * std::ldexp(1.0, -cfg.epsilon_halvings - 4);
    while (eps < cfg.epsilon) {
        const double next = std::min(cfg.epsilon, eps + step);
        if (auto po = attempt(cur->initial_condition.vec(), next)) {
            cur = std::move(po);
            eps = next;
            step *= 2.0;
        } else {
            step *= 0.5;
            if (step < min_step) throw NoConvergence("find_perturbed_orbit: continuation in eps stalled", history);
        }
    }
    return *cur;
}

}  // namespace

PerturbedOrbit find_perturbed_orbit(const HamiltonianSystem& sys, const PerturbationField& g,
                                    const VerifyConfig& cfg) {
    if (cfg.seed.size() != sys.dim()) throw DomainError("find_perturbed_orbit: seed dimension mismatch");
    if (!(cfg.forcing_period > 0.0) || cfg.cycles_l < 1) throw ConfigError("find_perturbed_orbit: bad forcing period");
    if (cfg.epsilon < 0.0) throw ConfigError("find_perturbed_orbit: epsilon must be non-negative");
    return continued_in_epsilon(sys, g, cfg);
}

std::string to_string(MeasuredLabel l) {
    switch (l) {
        case MeasuredLabel::stable: return "stable";
        case MeasuredLabel::unstable: return "unstable";
        case MeasuredLabel::marginal: return "marginal";
    }
    return "marginal";
}

MeasuredMultipliers measured_multipliers(const PerturbedOrbit& po, double dead_band) {
    MeasuredMultipliers m;
    m.mu = po.multipliers;
    m.moduli = m.mu.cwiseAbs();
    std::sort(m.moduli.begin(), m.moduli.end(), std::greater<>());
    if (m.moduli.size() == 0) return m;
    if (m.moduli[0] > 1.0 + dead_band)
        m.label = MeasuredLabel::unstable;
    else if (m.moduli[0] < 1.0 - dead_band)
        m.label = MeasuredLabel::stable;
    else
        m.label = MeasuredLabel::marginal;
    return m;
}

Persistence check_persistence(const HamiltonianSystem& sys, const PerturbationField& g, const VerifyConfig& cfg,
                              const PeriodicOrbit& seed_orbit) {
    Persistence p;
    const Trajectory tr = flow(sys, seed_orbit.z, seed_orbit.tau, cfg.integration_tol);
    double size = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) size = std::max(size, tr.state(i).norm());
    p.radius = cfg.persistence_radius * size;
    try {
        PerturbedOrbit po = find_perturbed_orbit(sys, g, cfg);
        p.converged = true;
        p.distance = (po.initial_condition.vec() - cfg.seed).norm();
        p.persists = p.distance <= p.radius;
        p.reason = p.persists ? "converged near seed" : "converged away from seed";
        p.orbit = std::move(po);
    } catch (const NoConvergence& e) {
        p.reason = e.what();
    } catch (const IntegrationFailure& e) {
        p.reason = e.what();
    }
    return p;
}

ScoreRow score_row(double eps, const std::vector<double>& predicted, const std::vector<double>& measured,
                   bool verdict_agrees) {
    ScoreRow row;
    row.epsilon = eps;
    row.predicted = predicted;
    row.measured = measured;
    row.verdict_agrees = verdict_agrees;
    std::vector<bool> used(predicted.size(), false);
    for (double m : measured) {
        int best = -1;
        for (std::size_t k = 0; k < predicted.size(); ++k)
            if (!used[k] && (best < 0 || std::abs(predicted[k] - m) < std::abs(predicted[best] - m)))
                best = static_cast<int>(k);
        if (best < 0) break;
        used[best] = true;
        row.error = std::max(row.error, std::abs(predicted[best] - m));
    }
    return row;
}

ScoreReport score(std::vector<ScoreRow> rows) {
    ScoreReport rep;
    rep.rows = std::move(rows);
    for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
        const auto& a = rep.rows[i];
        const auto& b = rep.rows[i + 1];
        if (a.error > 0.0 && b.error > 0.0 && a.epsilon != b.epsilon)
            rep.orders.push_back(std::log(a.error / b.error) / std::log(a.epsilon / b.epsilon));
    }
    return rep;
}

double ScoreReport::mean_order() const {
    if (orders.empty()) return 0.0;
    double s = 0.0;
    for (double o : orders) s += o;
    return s / static_cast<double>(orders.size());
}

void write_verification_csv(std::ostream& os, const std::vector<VerificationRecord>& rows) {
    std::size_t nm = 0, np = 0;
    for (const auto& r : rows) {
        nm = std::max(nm, r.measured.size());
        np = std::max(np, r.predicted.size());
    }
    os << "epsilon,zero,converged,period";
    for (std::size_t k = 1; k <= nm; ++k) os << ",measured_mod_" << k;
    for (std::size_t k = 1; k <= np; ++k) os << ",predicted_mod_" << k;
    os << ",error,predicted_verdict,measured_label,agrees\n" << std::setprecision(17);
    for (const auto& r : rows) {
        os << r.epsilon << ',' << r.zero << ',' << (r.converged ? 1 : 0) << ',' << r.period;
        for (std::size_t k = 0; k < nm; ++k) {
            os << ',';
            if (k < r.measured.size()) os << r.measured[k];
        }
        for (std::size_t k = 0; k < np; ++k) {
            os << ',';
            if (k < r.predicted.size()) os << r.predicted[k];
        }
        os << ',' << r.error << ',' << r.predicted_verdict << ',' << r.measured_label << ',' << (r.agrees ? 1 : 0)
           << '\n';
    }
}

}  // namespace nnmstab
