#include "nnmstab/stability.hpp"

#include "nnmstab/integrate.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace nnmstab {

namespace {

constexpr double kStaleTol = 1e-6;

bool in_band(double v, double scale, double band) { return std::abs(v) <= band * scale; }

}  // namespace

// ---------------------------------------------------------------------------
// Contractions
// ---------------------------------------------------------------------------

PullbackIntegral pullback_integral(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                                   const PerturbationField& g, const ResonanceSpec& spec, double tol) {
    spec.validate(orbit);
    const PerturbationField gg = g.with_period(spec.delta);
    const int d = sys.dim();
    const Eigen::Index dd = static_cast<Eigen::Index>(d) * d;

    auto rhs = [&](double t, const Vec& y, Vec& dy) {
        const Vec x = y.head(d);
        const Eigen::Map<const Mat> X(y.data() + d, d, d);
        dy.resize(y.size());
        dy.head(d) = sys.vector_field(x);
        Eigen::Map<Mat>(dy.data() + d, d, d) = sys.vector_field_jacobian(x) * X;
        Eigen::Map<Mat>(dy.data() + d + dd, d, d) = symplectic_inverse(X) * gg.state_jacobian(x, t) * X;
    };
    Vec y0 = Vec::Zero(d + 2 * dd);
    y0.head(d) = orbit.z;
    Eigen::Map<Mat>(y0.data() + d, d, d).setIdentity();
    OdeOptions opt;
    opt.rtol = opt.atol = tol;
    opt.dense = false;
    const OdeSolution sol = integrate_ode(rhs, 0.0, spec.m * orbit.tau, y0, opt);
    const Vec yT = sol.final_state();
    PullbackIntegral out;
    out.Psi = Eigen::Map<const Mat>(yT.data() + d + dd, d, d);
    out.error = sol.error_estimate.tail(dd).cwiseAbs().maxCoeff();
    return out;
}

double volume_contraction(const PeriodicOrbit& orbit, const PullbackIntegral& psi, const InvariantSubspace& V) {
    const double res = invariance_residual(V, orbit.monodromy);
    if (res > kStaleTol) throw StaleSubspace("volume_contraction: subspace not invariant for this orbit");
    return -(V.S * psi.Psi * V.R).trace() / (orbit.m * orbit.tau * V.half_dim());
}

double volume_contraction(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                          const ResonanceSpec& spec, const InvariantSubspace& V, double tol) {
    return volume_contraction(orbit, pullback_integral(sys, orbit, g, spec, tol), V);
}

double ContractionReport::tangent() const {
    for (const auto& s : subspaces)
        if (s.kind == SubspaceKind::tangent) return s.C;
    throw IncompleteInput("contractions: no tangent subspace");
}

std::vector<double> ContractionReport::normal() const {
    std::vector<double> out;
    for (const auto& s : subspaces)
        if (s.kind == SubspaceKind::normal_pair) out.push_back(s.C);
    return out;
}

double ContractionReport::additivity_defect(int dof) const {
    double sum = 0.0;
    for (const auto& s : subspaces) sum += s.C;
    const double ref = std::abs(dof * full);
    return std::abs(dof * full - sum) / std::max(ref, std::numeric_limits<double>::min());
}

ContractionReport contractions(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                               const PerturbationField& g, const ResonanceSpec& spec,
                               const std::vector<InvariantSubspace>& subs, double tol) {
    const PullbackIntegral psi = pullback_integral(sys, orbit, g, spec, tol);
    ContractionReport rep;
    const double P = orbit.m * orbit.tau;
    for (const auto& V : subs) {
        SubspaceContraction c;
        c.kind = V.kind;
        c.C = volume_contraction(orbit, psi, V);
        c.error = psi.error * V.S.norm() * V.R.norm() / P;
        rep.subspaces.push_back(c);
    }
    rep.full = -psi.Psi.trace() / (P * sys.dof());
    rep.error = psi.error * sys.dim() / P;
    rep.uniform_alpha = uniform_contraction_check(sys, g.with_period(spec.delta), orbit);
    return rep;
}

std::optional<double> uniform_contraction_check(const HamiltonianSystem& sys, const PerturbationField& g,
                                                const PeriodicOrbit& orbit, int samples, double tol) {
    const int n = sys.dof();
    const Trajectory tr = flow(sys, orbit.z, orbit.m * orbit.tau, 1e-11);
    std::optional<double> alpha;
    for (int k = 0; k < samples; ++k) {
        const double t = orbit.m * orbit.tau * k / samples;
        const Vec x = tr.dense_eval(t);
        const Mat Jg = g.state_jacobian(x, t);
        const Mat Jq = Jg.bottomLeftCorner(n, n);
        const Mat Jp = Jg.bottomRightCorner(n, n);
        const double a = -Jp.trace() / n;
        const double sa = std::max(1.0, std::abs(a));
        if ((Jp + a * Mat::Identity(n, n)).cwiseAbs().maxCoeff() > tol * sa) return std::nullopt;
        if ((Jq - Jq.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, Jq.cwiseAbs().maxCoeff()))
            return std::nullopt;
        if (alpha && std::abs(*alpha - a) > tol * sa) return std::nullopt;
        if (!alpha) alpha = a;
    }
    return alpha;
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::unstable: return "unstable";
        case Verdict::asymptotically_stable: return "asymptotically-stable";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

std::string to_string(EpsilonGuard g) {
    switch (g) {
        case EpsilonGuard::ok: return "ok";
        case EpsilonGuard::warn: return "warn";
        case EpsilonGuard::refuse: return "refuse";
    }
    return "ok";
}

StabilityVerdict classify(const StabilityInputs& in, double dead_band) {
    StabilityVerdict v;
    v.period_slope = in.period_slope;
    v.melnikov_derivative = in.zero.derivative;

    if (!in.spectrum.on_unit_circle) {
        v.verdict = Verdict::unstable;
        v.clause = "conservative-multiplier-off-unit-circle";
        v.fired.push_back(v.clause);
        return v;
    }

    v.C_T = in.contractions.tangent();
    v.C_N = in.contractions.normal();
    const bool degenerate = in.spectrum.minus_one || in.spectrum.repeated_pairs;
    if (!degenerate && v.C_N.size() < in.spectrum.normal_pairs.size())
        throw IncompleteInput("classify: missing contraction for a normal subspace");

    double cscale = std::abs(in.contractions.full);
    for (const auto& s : in.contractions.subspaces) cscale = std::max(cscale, std::abs(s.C));

    const double tau_ref = std::max(in.tau, 1.0);
    const bool tp_zero = in_band(in.period_slope, tau_ref, dead_band);
    const bool mp_zero = in_band(in.zero.derivative, in.melnikov_scale, dead_band);
    const bool tm_known = !tp_zero && !mp_zero;
    const double tm = in.period_slope * in.zero.derivative;
    const bool ct_zero = in_band(v.C_T, cscale, dead_band) || cscale == 0.0;

    if (tm_known && tm < 0.0) v.fired.push_back("tangent-real-split");
    if (tm_known && tm > 0.0 && !ct_zero && v.C_T < 0.0) v.fired.push_back("tangent-contraction-negative");
    bool normal_zero = false;
    for (double c : v.C_N) {
        if (in_band(c, cscale, dead_band) || cscale == 0.0)
            normal_zero = true;
        else if (c < 0.0 && std::find(v.fired.begin(), v.fired.end(), "normal-contraction-negative") == v.fired.end())
            v.fired.push_back("normal-contraction-negative");
    }
    if (!v.fired.empty()) {
        v.verdict = Verdict::unstable;
        v.clause = v.fired.front();
        return v;
    }

    if (!tm_known) v.flags.push_back(tp_zero ? "period-slope-degenerate" : "saddle-node-candidate");
    if (ct_zero) v.flags.push_back("tangent-contraction-zero");
    if (normal_zero) v.flags.push_back("neimark-sacker");
    if (degenerate) v.flags.push_back("degenerate-spectrum");
    if (v.flags.empty()) {
        v.verdict = Verdict::asymptotically_stable;
        v.clause = "all-contractions-positive";
    } else {
        v.verdict = Verdict::inconclusive;
        v.clause = v.flags.front();
    }
    return v;
}

MultiplierPrediction predict_multipliers(const StabilityInputs& in, double eps, const EpsilonPolicy& policy) {
    if (eps < 0.0) throw DomainError("predict_multipliers: epsilon must be non-negative");
    MultiplierPrediction out;
    out.epsilon = eps;
    const double sep = in.separation > 0.0 ? in.separation : std::numeric_limits<double>::infinity();
    if (eps >= policy.refuse * sep) {
        throw PreconditionError("predict_multipliers: epsilon " + std::to_string(eps) +
                                " exceeds the validity bound " + std::to_string(policy.refuse * sep) +
                                "; reduce epsilon or relax the policy explicitly");
    }
    if (eps >= policy.warn * sep) {
        out.guard = EpsilonGuard::warn;
        out.warnings.push_back("epsilon close to the separation of the multiplier clusters");
    }

    const double P = in.m * in.tau;
    int index = 0;
    for (const auto& s : in.contractions.subspaces) {
        PredictedMultiplier pm;
        pm.kind = s.kind;
        pm.index = index++;
        if (s.kind == SubspaceKind::tangent) {
            const double a = in.m * in.period_slope;
            const double disc = -eps * a * in.zero.derivative;
            const double re = 1.0 + 0.5 * eps * (-P * s.C - a * in.zero.derivative);
            if (disc > 0.0) {
                pm.mu = re + std::sqrt(disc);
                pm.modulus = std::abs(re + std::sqrt(disc));
                pm.partner_modulus = std::abs(re - std::sqrt(disc));
            } else {
                pm.mu = Complex(re, std::sqrt(-disc));
                pm.modulus = pm.partner_modulus = 1.0 - 0.5 * eps * P * s.C;
            }
        } else {
            pm.modulus = pm.partner_modulus = 1.0 - 0.5 * eps * P * s.C;
            const std::size_t k = static_cast<std::size_t>(pm.index - 1);
            if (k < in.spectrum.normal_pairs.size()) {
                const Complex mu0 = in.spectrum.normal_pairs[k].mu;
                pm.mu = std::abs(mu0) > 0.0 ? mu0 / std::abs(mu0) * pm.modulus : Complex(pm.modulus, 0.0);
            } else {
                pm.mu = pm.modulus;
            }
        }
        out.multipliers.push_back(pm);
    }
    return out;
}

ZeroAnalysis analyse_zero(const HamiltonianSystem& sys, const MelnikovCurve& curve, const PerturbationField& g,
                          const MelnikovZero& zero, double period_slope, const FloquetTolerances& ftol,
                          double tol) {
    ZeroAnalysis za;
    za.zero = zero;
    za.anchored = rebase(sys, curve.orbit, zero.s, tol);
    const PeriodicOrbit& o = za.anchored;
    const ResonanceSpec spec = curve.spec;

    std::vector<InvariantSubspace> subs;
    try {
        subs = decompose(sys, o, ftol);
    } catch (const NonGenericSpectrum&) {
        subs = {tangent_basis(sys, o)};
    }

    StabilityInputs& in = za.inputs;
    in.spectrum = spectral_summary(o.monodromy, ftol);
    in.zero = zero;
    in.period_slope = period_slope;
    in.contractions = contractions(sys, o, g, spec, subs, tol);
    in.m = o.m;
    in.tau = o.tau;
    in.melnikov_scale = curve.scale > 0.0 ? curve.scale : 1.0;
    in.separation = subs.size() > 1 ? min_separation(subs) : std::numeric_limits<double>::infinity();
    za.verdict = classify(in);
    return za;
}

void write_verdict_csv(std::ostream& os, const std::vector<ZeroAnalysis>& rows, double eps,
                       const EpsilonPolicy& policy) {
    std::size_t normals = 0;
    for (const auto& r : rows) normals = std::max(normals, r.verdict.C_N.size());
    os << "zero,s0,theta0,dM_ds,T_prime,C_T";
    for (std::size_t k = 1; k <= normals; ++k) os << ",C_N" << k;
    os << ",verdict,clause,flags";
    os << ",pred_T_mod,pred_T_partner_mod";
    for (std::size_t k = 1; k <= normals; ++k) os << ",pred_N" << k << "_mod";
    os << ",epsilon,eps_guard\n" << std::setprecision(17);
    int id = 0;
    for (const auto& r : rows) {
        const double P = r.anchored.m * r.anchored.tau;
        os << id++ << ',' << r.zero.s << ',' << 2.0 * std::numbers::pi * r.zero.s / P << ',' << r.zero.derivative
           << ',' << r.inputs.period_slope << ',' << r.verdict.C_T;
        for (std::size_t k = 0; k < normals; ++k) {
            os << ',';
            if (k < r.verdict.C_N.size()) os << r.verdict.C_N[k];
        }
        std::string flags;
        for (const auto& f : r.verdict.flags) flags += (flags.empty() ? "" : ";") + f;
        os << ',' << to_string(r.verdict.verdict) << ',' << r.verdict.clause << ',' << flags;
        std::string guard;
        std::vector<double> mods;
        double tmod = 1.0, tpart = 1.0;
        try {
            const MultiplierPrediction mp = predict_multipliers(r.inputs, eps, policy);
            guard = to_string(mp.guard);
            for (const auto& m : mp.multipliers) {
                if (m.kind == SubspaceKind::tangent) {
                    tmod = m.modulus;
                    tpart = m.partner_modulus;
                } else {
                    mods.push_back(m.modulus);
                }
            }
        } catch (const PreconditionError&) {
            guard = to_string(EpsilonGuard::refuse);
        }
        if (guard == "refuse")
            os << ",,";
        else
            os << ',' << tmod << ',' << tpart;
        for (std::size_t k = 0; k < normals; ++k) {
            os << ',';
            if (k < mods.size()) os << mods[k];
        }
        os << ',' << eps << ',' << guard << '\n';
    }
}


std::vector<StripPoint> verdict_strips(const HamiltonianSystem& sys, const SweepResult& sweep,
                                       const PerturbationBuilder& builder, const StripOptions& opt) {
    const Eigen::Index Nt = sweep.theta.size();
    std::vector<StripPoint> pts;
    for (const auto& L : sweep.levels)
        for (std::size_t r = 0; r < sweep.rows.size(); ++r)
            for (Eigen::Index j = 0; j < Nt; ++j) {
                const Eigen::Index k = (j + 1) % Nt;
                const double a = L.M(r, j), b = L.M(r, k);
                if ((a < 0.0) == (b < 0.0)) continue;
                const double t = a / (a - b);
                const double th1 = k == 0 ? 2.0 * std::numbers::pi : sweep.theta[k];
                StripPoint p;
                p.param = L.param;
                p.omega_bar = sweep.rows[r].omega_bar;
                p.theta = sweep.theta[j] + t * (th1 - sweep.theta[j]);
                p.dM_dtheta = (1.0 - t) * L.dM(r, j) + t * L.dM(r, k);
                p.applicable = !sweep.rows[r].stability_test_not_applicable;
                p.row_flag = sweep.rows[r].flag;
                p.row = r;
                pts.push_back(p);
            }

    parallel_for(pts.size(), opt.threads, [&](std::size_t i) {
        StripPoint& p = pts[i];
        const std::size_t r = p.row;
        const SweepRow& row = sweep.rows[r];
        MelnikovCurve c;
        c.orbit = row.orbit;
        c.spec = ResonanceSpec::for_orbit(row.orbit, opt.l);
        double scale = 0.0;
        for (const auto& L : sweep.levels)
            if (L.param == p.param) scale = L.M.row(r).cwiseAbs().maxCoeff();
        c.scale = scale;
        const double to_theta = 2.0 * std::numbers::pi / c.period();
        MelnikovZero z;
        z.s = p.theta / to_theta;
        z.derivative = p.dM_dtheta * to_theta;
        z.type = MelnikovZero::Type::simple;
        const PerturbationField g = builder(p.param, c.spec.delta);
        p.analysis = analyse_zero(sys, c, g, z, row.period_slope, opt.floquet, opt.integration_tol);
    });
    return pts;
}

void write_strip_csv(std::ostream& os, const std::vector<StripPoint>& strips) {
    std::size_t normals = 0;
    for (const auto& p : strips) normals = std::max(normals, p.analysis.verdict.C_N.size());
    os << "param,omega_bar,theta,dM_dtheta,T_prime,C_T";
    for (std::size_t k = 1; k <= normals; ++k) os << ",C_N" << k;
    os << ",verdict,clause,applicable,row_flag\n" << std::setprecision(17);
    for (const auto& p : strips) {
        const StabilityVerdict& v = p.analysis.verdict;
        os << p.param << ',' << p.omega_bar << ',' << p.theta << ',' << p.dM_dtheta << ','
           << p.analysis.inputs.period_slope << ',' << v.C_T;
        for (std::size_t k = 0; k < normals; ++k) {
            os << ',';
            if (k < v.C_N.size()) os << v.C_N[k];
        }
        os << ',' << to_string(v.verdict) << ',' << v.clause << ',' << (p.applicable ? 1 : 0) << ',' << p.row_flag
           << '\n';
    }
}

}  // namespace nnmstab
