#include "nnmstab/melnikov.hpp"

#include "nnmstab/contour.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>

namespace nnmstab {

using std::numbers::pi;

namespace {

enum class Integrand { power, work, power_rate };

struct GridQuadrature {
    Vec values;
    Vec errors;
};

// int_0^{m tau} integrand(x0(u), u - s_k) du for every shift s_k at once.
GridQuadrature grid_quadrature(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                               const std::vector<double>& shifts, Integrand kind, double period, double tol) {
    const int d = sys.dim();
    const int n = sys.dof();
    const Eigen::Index N = static_cast<Eigen::Index>(shifts.size());

    auto rhs = [&](double u, const Vec& y, Vec& dy) {
        const Vec x = y.head(d);
        const Vec DH = sys.gradient(x);
        dy.resize(y.size());
        dy.head(d) = apply_J(DH);
        switch (kind) {
            case Integrand::power:
                for (Eigen::Index k = 0; k < N; ++k) dy[d + k] = DH.tail(n).dot(g.force(x, u - shifts[k]));
                break;
            case Integrand::work: {
                const Vec q = x.head(n);
                const Vec qdot = sys.velocity(x);
                for (Eigen::Index k = 0; k < N; ++k)
                    dy[d + k] = qdot.dot(g.lagrangian_force(q, qdot, u - shifts[k]));
                break;
            }
            case Integrand::power_rate:
                for (Eigen::Index k = 0; k < N; ++k)
                    dy[d + k] = -DH.dot(g.time_derivative(x, u - shifts[k]));
                break;
        }
    };
    Vec y0 = Vec::Zero(d + N);
    y0.head(d) = orbit.z;
    OdeOptions opt;
    opt.rtol = opt.atol = tol;
    opt.dense = false;
    const OdeSolution sol = integrate_ode(rhs, 0.0, period, y0, opt);
    return {sol.final_state().tail(N), sol.error_estimate.tail(N)};
}

std::vector<double> uniform_grid(double period, int N) {
    std::vector<double> s(N);
    for (int k = 0; k < N; ++k) s[k] = period * k / N;
    return s;
}

// Illinois variant of regula falsi on a bracketing interval.
double polish_root(const std::function<double(double)>& f, double a, double b, double fa, double fb, double ftol) {
    int side = 0;
    for (int it = 0; it < 100; ++it) {
        const double c = (a * fb - b * fa) / (fb - fa);
        const double fc = f(c);
        if (std::abs(fc) <= ftol || std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(c))) return c;
        if (fc * fb > 0.0) {
            b = c;
            fb = fc;
            if (side == -1) fa *= 0.5;
            side = -1;
        } else {
            a = c;
            fa = fc;
            if (side == +1) fb *= 0.5;
            side = +1;
        }
    }
    return (a * fb - b * fa) / (fb - fa);
}

MelnikovCurve assemble(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                       const ResonanceSpec& spec, const MelnikovOptions& opt, Integrand kind) {
    spec.validate(orbit);
    if (opt.grid_size < 64) throw ConfigError("melnikov: grid_size must be at least 64");
    if (orbit.residual > 1e-8 * sys.scale()) throw PreconditionError("melnikov: orbit residual above 1e-8");
    const PerturbationField gg = g.with_period(spec.delta);
    const double P = spec.m * orbit.tau;

    MelnikovCurve c;
    c.orbit = orbit;
    c.spec = spec;
    const std::vector<double> grid = uniform_grid(P, opt.grid_size);
    c.s = Eigen::Map<const Vec>(grid.data(), opt.grid_size);
    const GridQuadrature q = grid_quadrature(sys, orbit, gg, grid, kind, P, opt.integration_tol);
    c.values = q.values;
    c.error_estimate = q.errors.maxCoeff();
    c.scale = c.values.cwiseAbs().maxCoeff();

    const bool can_diff = gg.has_time_derivative();
    if (opt.with_derivative && can_diff) {
        const GridQuadrature qd = grid_quadrature(sys, orbit, gg, grid, Integrand::power_rate, P, opt.integration_tol);
        c.derivatives = qd.values;
    }

    auto sysp = std::make_shared<const HamiltonianSystem>(sys);
    auto gp = std::make_shared<const PerturbationField>(gg);
    auto op = std::make_shared<const PeriodicOrbit>(orbit);
    const double tol = opt.integration_tol;
    if (kind == Integrand::power) {
        c.evaluate = [sysp, gp, op, spec, tol](double s) { return melnikov_value(*sysp, *op, *gp, spec, s, tol); };
    } else {
        c.evaluate = [sysp, gp, op, spec, tol, P](double s) {
            return grid_quadrature(*sysp, *op, *gp, {s}, Integrand::work, P, tol).values[0];
        };
    }
    if (can_diff)
        c.evaluate_derivative = [sysp, gp, op, spec, tol](double s) {
            return melnikov_derivative(*sysp, *op, *gp, spec, s, tol);
        };

    c.build_interpolant();
    if (c.scale == 0.0) c.warnings.push_back("Melnikov function vanishes identically on the grid");
    c.zeros = find_zeros(c, opt);
    return c;
}


struct RowExtremum {
    Eigen::Index j;
    double value;
    bool max;
};

std::vector<RowExtremum> row_extrema(const Mat& M, Eigen::Index r) {
    std::vector<RowExtremum> out;
    const Eigen::Index N = M.cols();
    for (Eigen::Index j = 0; j < N; ++j) {
        const double vm = M(r, (j + N - 1) % N), v0 = M(r, j), vp = M(r, (j + 1) % N);
        if (v0 > vm && v0 >= vp) out.push_back({j, v0, true});
        if (v0 < vm && v0 <= vp) out.push_back({j, v0, false});
    }
    return out;
}

// Row extrema that change sign between consecutive rows, grouped when they
// cross at the same interpolated omega_bar.
std::vector<FoldEvent> detect_folds(const Mat& M, const std::vector<int>& counts, const std::vector<double>& wb) {
    std::vector<FoldEvent> folds;
    const Eigen::Index N = M.cols();
    const Eigen::Index reach = std::max<Eigen::Index>(3, N / 20);
    struct Crossing {
        double w, th;
        bool created;
    };
    for (Eigen::Index r = 0; r + 1 < M.rows(); ++r) {
        const auto a = row_extrema(M, r);
        const auto b = row_extrema(M, r + 1);
        const double dw = wb[r + 1] - wb[r];
        std::vector<Crossing> cr;
        for (const auto& e : a) {
            const RowExtremum* best = nullptr;
            Eigen::Index bd = reach + 1;
            for (const auto& f : b) {
                if (f.max != e.max) continue;
                const Eigen::Index d = std::min((e.j - f.j + N) % N, (f.j - e.j + N) % N);
                if (d < bd) {
                    bd = d;
                    best = &f;
                }
            }
            if (!best || (e.value < 0.0) == (best->value < 0.0)) continue;
            const double t = e.value / (e.value - best->value);
            double dj = static_cast<double>(best->j - e.j);
            if (dj > N / 2) dj -= N;
            if (dj < -N / 2) dj += N;
            const double jj = std::fmod(e.j + t * dj + N, static_cast<double>(N));
            cr.push_back({wb[r] + t * dw, 2.0 * pi * jj / N, e.max ? e.value < 0.0 : e.value > 0.0});
        }
        std::sort(cr.begin(), cr.end(), [](const Crossing& x, const Crossing& y) { return x.w < y.w; });
        int c = counts[r];
        for (std::size_t i = 0; i < cr.size();) {
            std::size_t k = i;
            FoldEvent ev;
            ev.omega_bar = cr[i].w;
            int delta = 0;
            while (k < cr.size() && std::abs(cr[k].w - cr[i].w) <= 1e-2 * std::abs(dw)) {
                ev.theta.push_back(cr[k].th);
                delta += cr[k].created ? 2 : -2;
                ++k;
            }
            const int next = c + delta;
            ev.zeros = std::min(c, next) + static_cast<int>(k - i);
            folds.push_back(ev);
            c = next;
            i = k;
        }
    }
    return folds;
}

}  // namespace

std::string to_string(MelnikovZero::Type t) { return t == MelnikovZero::Type::simple ? "simple" : "quadratic"; }

// ---------------------------------------------------------------------------
// Resonance
// ---------------------------------------------------------------------------

ResonanceSpec ResonanceSpec::for_orbit(const PeriodicOrbit& orbit, int l) {
    ResonanceSpec r;
    r.m = orbit.m;
    r.l = l;
    r.delta = orbit.m * orbit.tau / l;
    r.validate(orbit);
    return r;
}

void ResonanceSpec::validate(const PeriodicOrbit& orbit) const {
    if (m < 1 || l < 1) throw SpecError("resonance: m and l must be positive");
    if (std::gcd(m, l) != 1) throw SpecError("resonance: m and l must be relatively prime");
    if (m != orbit.m) throw SpecError("resonance: orbit cycles differ from m");
    const double expected = m * orbit.tau / l;
    if (std::abs(delta - expected) > 1e-10 * std::max(1.0, expected))
        throw SpecError("resonance: forcing period differs from m tau / l");
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

void MelnikovCurve::build_interpolant() {
    const Eigen::Index N = values.size();
    coeffs_.resize(N / 2 + 1);
    for (Eigen::Index j = 0; j <= N / 2; ++j) {
        Complex acc(0.0, 0.0);
        for (Eigen::Index k = 0; k < N; ++k) acc += values[k] * std::polar(1.0, -2.0 * pi * double(j * k) / N);
        coeffs_[j] = acc / double(N);
    }
}

double MelnikovCurve::interpolate(double t) const {
    const Eigen::Index N = values.size();
    const double w = 2.0 * pi / period();
    double v = coeffs_[0].real();
    for (Eigen::Index j = 1; j < coeffs_.size(); ++j) {
        const double f = (N % 2 == 0 && j == N / 2) ? 1.0 : 2.0;
        v += f * (coeffs_[j] * std::polar(1.0, w * j * t)).real();
    }
    return v;
}

double MelnikovCurve::interpolate_derivative(double t) const {
    const Eigen::Index N = values.size();
    const double w = 2.0 * pi / period();
    double v = 0.0;
    for (Eigen::Index j = 1; j < coeffs_.size(); ++j) {
        const double f = (N % 2 == 0 && j == N / 2) ? 1.0 : 2.0;
        v += f * (coeffs_[j] * Complex(0.0, w * j) * std::polar(1.0, w * j * t)).real();
    }
    return v;
}

MelnikovCurve melnikov(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                       const ResonanceSpec& spec, const MelnikovOptions& opt) {
    return assemble(sys, orbit, g, spec, opt, Integrand::power);
}

MelnikovCurve melnikov_energy_form(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                                   const PerturbationField& g, const ResonanceSpec& spec,
                                   const MelnikovOptions& opt) {
    if (!g.has_lagrangian_force()) throw CapabilityError("melnikov_energy_form: perturbation has no Lagrangian force");
    return assemble(sys, orbit, g, spec, opt, Integrand::work);
}

double melnikov_value(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                      const ResonanceSpec& spec, double s, double tol) {
    spec.validate(orbit);
    const PerturbationField gg = g.with_period(spec.delta);
    return grid_quadrature(sys, orbit, gg, {s}, Integrand::power, spec.m * orbit.tau, tol).values[0];
}

double melnikov_derivative(const HamiltonianSystem& sys, const PeriodicOrbit& orbit, const PerturbationField& g,
                           const ResonanceSpec& spec, double s, double tol) {
    spec.validate(orbit);
    if (!g.has_time_derivative())
        throw CapabilityError(
            "melnikov_derivative: no analytic d_t g; enable the finite-difference fallback on the perturbation");
    const PerturbationField gg = g.with_period(spec.delta);
    return grid_quadrature(sys, orbit, gg, {s}, Integrand::power_rate, spec.m * orbit.tau, tol).values[0];
}

std::vector<MelnikovZero> find_zeros(const MelnikovCurve& curve, const MelnikovOptions& opt) {
    std::vector<MelnikovZero> zeros;
    const Eigen::Index N = curve.values.size();
    const double scale = curve.scale;
    if (N == 0 || scale == 0.0) return zeros;
    const double P = curve.period();
    const double ds = P / N;

    const bool exact = opt.polish_exact && static_cast<bool>(curve.evaluate);
    std::function<double(double)> f = exact ? curve.evaluate : [&curve](double s) { return curve.interpolate(s); };
    std::function<double(double)> df = curve.evaluate_derivative && exact
                                           ? curve.evaluate_derivative
                                           : std::function<double(double)>([&curve](double s) {
                                                 return curve.interpolate_derivative(s);
                                             });
    const double ftol = opt.polish_tol * scale;
    const double dtol = opt.zero_type_tol * scale;

    auto classify = [&](double s) {
        MelnikovZero z;
        z.s = std::fmod(std::fmod(s, P) + P, P);
        z.derivative = df(z.s);
        z.type = std::abs(z.derivative) <= dtol ? MelnikovZero::Type::quadratic : MelnikovZero::Type::simple;
        return z;
    };

    const Vec& v = curve.values;
    for (Eigen::Index k = 0; k < N; ++k) {
        const double a = v[k];
        const double b = v[(k + 1) % N];
        const double sa = curve.s[k];
        const double sb = sa + ds;
        if (a == 0.0) {
            zeros.push_back(classify(sa));
        } else if (a * b < 0.0) {
            const double fa = exact ? f(sa) : a;
            const double fb = exact ? f(sb) : b;
            if (fa * fb < 0.0) zeros.push_back(classify(polish_root(f, sa, sb, fa, fb, ftol)));
        }
    }

    // touching extrema that do not change sign on the grid
    for (Eigen::Index k = 0; k < N; ++k) {
        const double vm = v[(k + N - 1) % N], v0 = v[k], vp = v[(k + 1) % N];
        if ((v0 - vm) * (vp - v0) >= 0.0) continue;
        if (vm * v0 <= 0.0 || v0 * vp <= 0.0) continue;
        const double sa = curve.s[k] - ds, sb = curve.s[k] + ds;
        double da = df(sa), db = df(sb);
        if (da * db >= 0.0) continue;
        const double se = polish_root(df, sa, sb, da, db, 1e-14 * scale);
        const double fe = f(se);
        if (std::abs(fe) <= dtol) {
            MelnikovZero z;
            z.s = std::fmod(std::fmod(se, P) + P, P);
            z.derivative = df(z.s);
            z.type = MelnikovZero::Type::quadratic;
            zeros.push_back(z);
        }
    }

    std::sort(zeros.begin(), zeros.end(), [](const auto& a, const auto& b) { return a.s < b.s; });
    // a tangency resolved as two nearby sign changes becomes one quadratic zero
    std::vector<MelnikovZero> merged;
    std::vector<bool> skip(zeros.size(), false);
    for (std::size_t i = 0; i < zeros.size(); ++i) {
        if (skip[i]) continue;
        const std::size_t j = (i + 1) % zeros.size();
        if (j != i && !skip[j] && zeros[i].type == MelnikovZero::Type::quadratic &&
            zeros[j].type == MelnikovZero::Type::quadratic) {
            double gap = zeros[j].s - zeros[i].s;
            if (gap < 0.0) gap += P;
            if (gap < 2.0 * ds) {
                MelnikovZero z = zeros[i];
                z.s = std::fmod(zeros[i].s + 0.5 * gap, P);
                z.derivative = df(z.s);
                merged.push_back(z);
                skip[j] = true;
                continue;
            }
        }
        merged.push_back(zeros[i]);
    }
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.s < b.s; });
    return merged;
}

HarmonicFit fit_harmonic(const MelnikovCurve& curve, double w) {
    const Eigen::Index N = curve.values.size();
    Mat A(N, 3);
    for (Eigen::Index k = 0; k < N; ++k) A.row(k) << std::cos(w * curve.s[k]), std::sin(w * curve.s[k]), 1.0;
    const Vec c = least_squares(A, curve.values);
    HarmonicFit f;
    f.A = c[0];
    f.B = c[1];
    f.C = c[2];
    f.amplitude = std::hypot(c[0], c[1]);
    f.offset = c[2];
    f.rms_residual = std::sqrt((A * c - curve.values).squaredNorm() / N);
    return f;
}

void write_melnikov_csv(std::ostream& os, const MelnikovCurve& curve) {
    os << "s,theta,M,dM_ds\n" << std::setprecision(17);
    const double P = curve.period();
    for (Eigen::Index k = 0; k < curve.values.size(); ++k) {
        const double d = curve.derivatives.size() ? curve.derivatives[k] : curve.interpolate_derivative(curve.s[k]);
        os << curve.s[k] << ',' << 2.0 * pi * curve.s[k] / P << ',' << curve.values[k] << ',' << d << '\n';
    }
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

std::vector<int> compressed_counts(const std::vector<int>& counts) {
    std::vector<int> out;
    for (int c : counts)
        if (out.empty() || out.back() != c) out.push_back(c);
    return out;
}

std::vector<int> stage_sequence(const SweepResult& sweep, const LevelSet& level) {
    std::vector<std::pair<double, int>> states;
    for (std::size_t r = 0; r < sweep.rows.size() && r < level.zero_counts.size(); ++r)
        states.emplace_back(sweep.rows[r].omega_bar, level.zero_counts[r]);
    for (const auto& f : level.folds) states.emplace_back(f.omega_bar, f.zeros);
    std::stable_sort(states.begin(), states.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<int> even;
    for (const auto& s : states)
        if (s.second % 2 == 0) even.push_back(s.second);
    return compressed_counts(even);
}

SweepResult family_sweep(const OrbitFamily& family, const PerturbationBuilder& builder, const SweepOptions& opt) {
    if (opt.params.empty()) throw ConfigError("family_sweep: no parameter values");
    if (opt.theta_samples < 8 || opt.quadrature_samples < 8) throw ConfigError("family_sweep: grid too coarse");
    const HamiltonianSystem& sys = family.system();
    SweepResult res;

    // rows
    if (opt.rows > 0) {
        if (!(opt.reference_period > 0.0)) throw ConfigError("family_sweep: reference period required");
        std::vector<std::optional<SweepRow>> slots(opt.rows);
        parallel_for(static_cast<std::size_t>(opt.rows), opt.threads, [&](std::size_t r) {
            const double wb = opt.rows == 1 ? opt.omega_bar_min
                                            : opt.omega_bar_min + (opt.omega_bar_max - opt.omega_bar_min) *
                                                                      static_cast<double>(r) / (opt.rows - 1);
            const auto found = family.orbits_with_period(opt.reference_period / wb);
            if (found.empty()) return;
            SweepRow row;
            row.orbit = found.front();
            row.omega_bar = wb;
            slots[r] = std::move(row);
        });
        for (auto& sl : slots)
            if (sl) res.rows.push_back(std::move(*sl));
    } else {
        for (const auto& o : family.orbits()) {
            SweepRow row;
            row.orbit = o;
            row.omega_bar = opt.reference_period > 0.0 ? opt.reference_period / o.tau : o.omega();
            res.rows.push_back(row);
        }
        std::sort(res.rows.begin(), res.rows.end(),
                  [](const SweepRow& a, const SweepRow& b) { return a.omega_bar < b.omega_bar; });
    }
    const std::size_t R = res.rows.size();
    if (R == 0) throw PreconditionError("family_sweep: no orbits in the requested range");

    for (std::size_t r = 0; r < R; ++r) {
        SweepRow& row = res.rows[r];
        row.h = row.orbit.h;
        const SpectralSummary ss = spectral_summary(row.orbit.monodromy, opt.floquet);
        std::vector<std::string> why;
        if (ss.minus_one) why.push_back("minus-one");
        if (ss.repeated_pairs) why.push_back("repeated-pairs");
        if (!ss.on_unit_circle) why.push_back("off-unit-circle");
        for (double dist : ss.pair_distances)
            if (dist < opt.floquet.weak_separation) {
                why.push_back("weak-separation");
                break;
            }
        for (const auto& p : ss.normal_pairs)
            if (std::abs(p.mu + 1.0) < opt.floquet.weak_separation) {
                why.push_back("near-minus-one");
                break;
            }
        if (!why.empty()) {
            row.stability_test_not_applicable = true;
            row.flag = "stability-test-not-applicable";
            for (const auto& w : why) row.flag += ":" + w;
        }
    }
    for (std::size_t r = 0; r < R; ++r) {
        const std::size_t a = r == 0 ? 0 : r - 1;
        const std::size_t b = r + 1 == R ? r : r + 1;
        if (a != b)
            res.rows[r].period_slope =
                (res.rows[b].orbit.tau - res.rows[a].orbit.tau) / (res.rows[b].orbit.h - res.rows[a].orbit.h);
    }

    const int Nt = opt.theta_samples;
    res.theta = Vec::LinSpaced(Nt, 0.0, 2.0 * pi * (Nt - 1) / Nt);

    const std::size_t P = opt.params.size();
    std::vector<Mat> Ms(P, Mat(R, Nt)), dMs(P, Mat(R, Nt));
    parallel_for(P * R, opt.threads, [&](std::size_t cell) {
        const std::size_t p = cell / R, r = cell % R;
        const double param = opt.params[p];
        Mat& Mm = Ms[p];
        Mat& dMm = dMs[p];
        {
            const PeriodicOrbit& o = res.rows[r].orbit;
            const ResonanceSpec spec = ResonanceSpec::for_orbit(o, opt.l);
            const PerturbationField g = builder(param, spec.delta);
            MelnikovCurve c;
            c.orbit = o;
            c.spec = spec;
            const std::vector<double> grid = uniform_grid(c.period(), opt.quadrature_samples);
            c.s = Eigen::Map<const Vec>(grid.data(), opt.quadrature_samples);
            c.values = grid_quadrature(sys, o, g, grid, Integrand::power, c.period(), opt.melnikov.integration_tol)
                           .values;
            c.build_interpolant();
            const double to_s = c.period() / (2.0 * pi);
            for (int j = 0; j < Nt; ++j) {
                Mm(r, j) = c.interpolate(res.theta[j] * to_s);
                dMm(r, j) = c.interpolate_derivative(res.theta[j] * to_s) * to_s;
            }
        }
    });

    for (std::size_t k = 0; k < P; ++k) {
        LevelSet L;
        L.param = opt.params[k];
        L.M = std::move(Ms[k]);
        L.dM = std::move(dMs[k]);

        for (std::size_t r = 0; r < R; ++r) {
            int cnt = 0;
            for (int j = 0; j < Nt; ++j) {
                const double a = L.M(r, j), b = L.M(r, (j + 1) % Nt);
                if ((a < 0.0) != (b < 0.0)) ++cnt;
            }
            L.zero_counts.push_back(cnt);
        }

        const Vec rowmax = L.M.rowwise().maxCoeff();
        for (std::size_t r = 1; r < R; ++r) {
            if (rowmax[r - 1] < 0.0 && rowmax[r] >= 0.0 && !L.onset) {
                const double t = rowmax[r - 1] / (rowmax[r - 1] - rowmax[r]);
                L.onset = res.rows[r - 1].omega_bar + t * (res.rows[r].omega_bar - res.rows[r - 1].omega_bar);
            }
            if (rowmax[r - 1] >= 0.0 && rowmax[r] < 0.0) {
                const double t = rowmax[r - 1] / (rowmax[r - 1] - rowmax[r]);
                L.termination = res.rows[r - 1].omega_bar + t * (res.rows[r].omega_bar - res.rows[r - 1].omega_bar);
            }
        }

        std::vector<double> wb(R);
        for (std::size_t r = 0; r < R; ++r) wb[r] = res.rows[r].omega_bar;
        L.folds = detect_folds(L.M, L.zero_counts, wb);

        const std::vector<Polyline> lines = zero_contours(L.M);
        int id = 0;
        for (const auto& pl : lines) {
            Contour c;
            c.id = id++;
            c.closed = pl.closed;
            for (const auto& p : pl.points) {
                ContourPoint cp;
                const auto i0 = static_cast<std::size_t>(std::floor(p.x));
                const std::size_t i1 = std::min(i0 + 1, R - 1);
                const double tx = p.x - static_cast<double>(i0);
                cp.omega_bar = (1.0 - tx) * res.rows[i0].omega_bar + tx * res.rows[i1].omega_bar;
                cp.theta = 2.0 * pi * p.y / Nt;
                const auto j0 = static_cast<Eigen::Index>(std::floor(p.y)) % Nt;
                const Eigen::Index j1 = (j0 + 1) % Nt;
                const double ty = p.y - std::floor(p.y);
                const double d = (1.0 - tx) * ((1.0 - ty) * L.dM(i0, j0) + ty * L.dM(i0, j1)) +
                                 tx * ((1.0 - ty) * L.dM(i1, j0) + ty * L.dM(i1, j1));
                cp.dtheta_sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
                c.points.push_back(cp);
            }
            L.contours.push_back(std::move(c));
        }
        L.components = static_cast<int>(L.contours.size());
        res.levels.push_back(std::move(L));
    }
    return res;
}

void write_levelset_csv(std::ostream& os, const SweepResult& sweep) {
    os << "param,omega_bar,h,theta,M,dM_dtheta,flags\n" << std::setprecision(17);
    for (const auto& L : sweep.levels)
        for (std::size_t r = 0; r < sweep.rows.size(); ++r)
            for (Eigen::Index j = 0; j < sweep.theta.size(); ++j)
                os << L.param << ',' << sweep.rows[r].omega_bar << ',' << sweep.rows[r].h << ',' << sweep.theta[j]
                   << ',' << L.M(r, j) << ',' << L.dM(r, j) << ','
                   << (sweep.rows[r].flag.empty() ? "ok" : sweep.rows[r].flag) << '\n';
}

void write_contour_csv(std::ostream& os, const SweepResult& sweep) {
    os << "param,id,omega_bar,theta,zero_type\n" << std::setprecision(17);
    for (const auto& L : sweep.levels)
        for (const auto& c : L.contours)
            for (const auto& p : c.points)
                os << L.param << ',' << c.id << ',' << p.omega_bar << ',' << p.theta << ','
                   << (p.dtheta_sign < 0 ? "dtheta-negative" : (p.dtheta_sign > 0 ? "dtheta-positive" : "tangent"))
                   << '\n';
}

}  // namespace nnmstab
