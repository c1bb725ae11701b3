#include "nnmstab/floquet.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace nnmstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Eig {
    CVec values;
    CMat vectors;
};

Eig eigen_of(const Mat& P) {
    Eigen::EigenSolver<Mat> es(P);
    if (es.info() != Eigen::Success) throw NonGenericSpectrum("monodromy eigen-decomposition failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

bool arg_less(const Complex& a, const Complex& b) {
    const double pa = std::arg(a), pb = std::arg(b);
    if (std::abs(pa - pb) > 1e-12) return pa < pb;
    return std::abs(a) < std::abs(b);
}

struct Pairing {
    std::vector<int> trivial;
    std::vector<std::array<int, 2>> pairs;  // representative first
};

Pairing pair_up(const CVec& mu) {
    const int N = static_cast<int>(mu.size());
    Pairing p;
    std::vector<int> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(mu[a] - 1.0) < std::abs(mu[b] - 1.0); });
    p.trivial = {idx[0], idx[1]};
    std::vector<int> rest(idx.begin() + 2, idx.end());

    while (!rest.empty()) {
        // largest imaginary part first, then largest modulus
        auto it = std::max_element(rest.begin(), rest.end(), [&](int a, int b) {
            if (std::abs(mu[a].imag() - mu[b].imag()) > 1e-12) return mu[a].imag() < mu[b].imag();
            return std::abs(mu[a]) < std::abs(mu[b]);
        });
        const int i = *it;
        rest.erase(it);
        if (rest.empty()) break;
        const bool real = std::abs(mu[i].imag()) <= 1e-9 * std::max(1.0, std::abs(mu[i]));
        const Complex target = real ? Complex(1.0, 0.0) / mu[i] : std::conj(mu[i]);
        auto jt = std::min_element(rest.begin(), rest.end(),
                                   [&](int a, int b) { return std::abs(mu[a] - target) < std::abs(mu[b] - target); });
        p.pairs.push_back({i, *jt});
        rest.erase(jt);
    }
    return p;
}

Vec normalized_real(Vec v) {
    v /= v.norm();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) > 1e-8) {
            if (v[i] < 0.0) v = -v;
            break;
        }
    return v;
}

CVec normalized_complex(CVec w) {
    w /= w.norm();
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (std::abs(w[i]) > 1e-8) {
            w *= std::conj(w[i]) / std::abs(w[i]);
            break;
        }
    return w;
}

}  // namespace

std::string to_string(NormalityClass c) {
    switch (c) {
        case NormalityClass::jordan: return "m-normal-jordan";
        case NormalityClass::semisimple: return "m-normal-semisimple";
        default: return "non-normal";
    }
}

std::string to_string(SubspaceKind k) {
    switch (k) {
        case SubspaceKind::tangent: return "tangent";
        case SubspaceKind::normal_pair: return "normal-pair";
        case SubspaceKind::full: return "full";
        default: return "custom";
    }
}

// ---------------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------------

SpectralSummary spectral_summary(const Mat& P, const FloquetTolerances& tol) {
    SpectralSummary s;
    const Eig e = eigen_of(P);
    const CVec& mu = e.values;
    const int N = static_cast<int>(mu.size());
    s.determinant = P.determinant();

    for (int i = 0; i < N; ++i) {
        double best = kInf;
        for (int j = 0; j < N; ++j) best = std::min(best, std::abs(Complex(1.0, 0.0) / mu[i] - mu[j]));
        s.pairing_defect = std::max(s.pairing_defect, best);
    }

    const Pairing pr = pair_up(mu);
    s.trivial = pr.trivial;
    // the +1 pair splits like sqrt(roundoff) when it is a Jordan block; it is
    // held to the cluster tolerance instead
    for (int i = 0; i < N; ++i)
        if (std::find(pr.trivial.begin(), pr.trivial.end(), i) == pr.trivial.end() &&
            std::abs(std::abs(mu[i]) - 1.0) > tol.unit_circle)
            s.on_unit_circle = false;
    {
        std::vector<double> d1;
        for (int i = 0; i < N; ++i) d1.push_back(std::abs(mu[i] - 1.0));
        std::sort(d1.begin(), d1.end());
        s.trivial_pair_ok = d1[1] <= tol.cluster && (N == 2 || d1[2] > tol.cluster);
        if (d1[1] > tol.cluster) s.warnings.push_back("trivial multipliers spread beyond the +1 cluster tolerance");
        if (N > 2 && d1[2] <= tol.cluster) s.warnings.push_back("more than two multipliers at +1");
    }

    for (const auto& [i, j] : pr.pairs) {
        MultiplierPair mp;
        mp.mu = mu[i];
        mp.partner = mu[j];
        mp.complex = std::abs(mu[i].imag()) > 1e-9 * std::max(1.0, std::abs(mu[i]));
        if (!mp.complex && std::abs(mu[i]) < std::abs(mu[j])) std::swap(mp.mu, mp.partner);
        mp.on_unit_circle = std::abs(std::abs(mu[i]) - 1.0) <= tol.unit_circle &&
                            std::abs(std::abs(mu[j]) - 1.0) <= tol.unit_circle;
        if (std::abs(mu[i] + 1.0) <= tol.cluster || std::abs(mu[j] + 1.0) <= tol.cluster) s.minus_one = true;
        s.normal_pairs.push_back(mp);
    }
    for (std::size_t a = 0; a < s.normal_pairs.size(); ++a) {
        double best = kInf;
        for (std::size_t b = 0; b < s.normal_pairs.size(); ++b) {
            if (a == b) continue;
            const Complex x = s.normal_pairs[a].mu;
            const Complex y = s.normal_pairs[b].mu;
            best = std::min({best, std::abs(x - y), std::abs(x - std::conj(y))});
        }
        // distance to the trivial cluster counts as well
        best = std::min(best, std::abs(s.normal_pairs[a].mu - 1.0));
        s.pair_distances.push_back(best);
        if (best <= tol.cluster) s.repeated_pairs = true;
    }
    if (s.minus_one) s.warnings.push_back("multiplier at -1: period doubling suspected");
    if (s.repeated_pairs) s.warnings.push_back("repeated multiplier pairs: Krein collision suspected");

    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return arg_less(mu[a], mu[b]); });
    s.eigenvalues.resize(N);
    for (int k = 0; k < N; ++k) s.eigenvalues[k] = mu[order[k]];
    return s;
}

NormalityReport classify_normality(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                                   const FloquetTolerances& tol) {
    NormalityReport r;
    r.m = orbit.m;
    const Mat& P = orbit.monodromy;
    const Eigen::Index N = P.rows();
    const Mat A = P - Mat::Identity(N, N);
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r.singular_values = svd.singularValues();

    Eigen::JacobiSVD<Mat> psvd(P);
    const double thr = tol.rank * psvd.singularValues()[0];
    int gm = 0;
    for (Eigen::Index i = 0; i < N; ++i) {
        const double sv = r.singular_values[i];
        if (sv < thr) ++gm;
        if (sv > thr / tol.ambiguity_factor && sv < thr * tol.ambiguity_factor) r.ambiguous = true;
    }
    r.geometric_multiplicity = gm;

    const Vec f = sys.vector_field(orbit.z);
    const Mat Unull = svd.matrixU().rightCols(gm);
    r.range_residual = gm > 0 ? (Unull.transpose() * f).norm() / f.norm() : 0.0;
    r.range_test = r.range_residual <= std::sqrt(tol.rank);

    if (gm == 1) {
        r.cls = NormalityClass::jordan;
    } else if (gm == 2 && !r.range_test) {
        r.cls = NormalityClass::semisimple;
    } else {
        r.cls = NormalityClass::non_normal;
    }
    if (gm == 0) r.warnings.push_back("Pi - I has full rank; the orbit data is inconsistent");
    if (gm == N) {
        r.ambiguous = true;
        r.warnings.push_back("Pi = I (isochronous orbit): normality decided by the literal range test");
    }
    if (r.ambiguous) r.warnings.push_back("ambiguous normality: singular value close to the rank threshold");
    return r;
}

// ---------------------------------------------------------------------------
// Subspaces
// ---------------------------------------------------------------------------

InvariantSubspace make_subspace(const Mat& R, const Mat& monodromy, SubspaceKind kind) {
    if (R.cols() % 2 != 0 || R.rows() != monodromy.rows())
        throw PreconditionError("make_subspace: basis must be 2n x 2v");
    InvariantSubspace V;
    V.R = R;
    V.S = symplectic_left_inverse(R);
    V.B = V.S * monodromy * R;
    V.cluster = Eigen::EigenSolver<Mat>(V.B, false).eigenvalues();
    V.kind = kind;
    return V;
}

double invariance_residual(const InvariantSubspace& V, const Mat& monodromy) {
    return (monodromy * V.R - V.R * V.B).norm() / monodromy.norm();
}

InvariantSubspace tangent_basis(const HamiltonianSystem& sys, const PeriodicOrbit& orbit) {
    const Vec DH = sys.gradient(orbit.z);
    if (!(DH.norm() > 0.0)) throw PreconditionError("tangent_basis: DH(z) = 0 (equilibrium)");
    const Vec f = apply_J(DH);
    const Eigen::Index N = f.size();
    const Mat& P = orbit.monodromy;

    // unknowns (b, a): (Pi - I) b + a f = 0, <DH, b> = 1, <f, b> = 0
    Mat A = Mat::Zero(N + 2, N + 1);
    A.topLeftCorner(N, N) = P - Mat::Identity(N, N);
    A.topRightCorner(N, 1) = f;
    A.block(N, 0, 1, N) = DH.transpose();
    A.block(N + 1, 0, 1, N) = f.transpose();
    Vec rhs = Vec::Zero(N + 2);
    rhs[N] = 1.0;
    const Vec sol = least_squares(A, rhs);

    Mat R(N, 2);
    R.col(0) = f;
    R.col(1) = sol.head(N);
    return make_subspace(R, P, SubspaceKind::tangent);
}

std::vector<InvariantSubspace> decompose(const HamiltonianSystem& sys, const PeriodicOrbit& orbit,
                                         const FloquetTolerances& tol) {
    const SpectralSummary ss = spectral_summary(orbit.monodromy, tol);
    if (!ss.trivial_pair_ok) throw PreconditionError("decompose: the +1 multiplier does not have multiplicity two");
    if (ss.minus_one)
        throw NonGenericSpectrum("decompose: multiplier at -1 (period doubling or Krein bifurcation, non-generic case)");
    if (ss.repeated_pairs)
        throw NonGenericSpectrum("decompose: repeated multiplier pairs (period doubling or Krein bifurcation)");

    std::vector<InvariantSubspace> out{tangent_basis(sys, orbit)};
    const Eig e = eigen_of(orbit.monodromy);
    const Pairing pr = pair_up(e.values);
    for (const auto& [i, j] : pr.pairs) {
        const Eigen::Index N = orbit.monodromy.rows();
        Mat R(N, 2);
        const bool cplx = std::abs(e.values[i].imag()) > 1e-9 * std::max(1.0, std::abs(e.values[i]));
        if (cplx) {
            const CVec w = normalized_complex(e.vectors.col(i));
            R.col(0) = w.real();
            R.col(1) = w.imag();
        } else {
            int a = i, b = j;
            if (std::abs(e.values[a]) < std::abs(e.values[b])) std::swap(a, b);
            R.col(0) = normalized_real(e.vectors.col(a).real());
            R.col(1) = normalized_real(e.vectors.col(b).real());
        }
        out.push_back(make_subspace(R, orbit.monodromy, SubspaceKind::normal_pair));
    }
    return out;
}

InvariantSubspace full_space(const PeriodicOrbit& orbit) {
    const Eigen::Index N = orbit.monodromy.rows();
    return make_subspace(Mat::Identity(N, N), orbit.monodromy, SubspaceKind::full);
}

Mat stacked_basis(const std::vector<InvariantSubspace>& subs) {
    Eigen::Index cols = 0;
    for (const auto& V : subs) cols += V.R.cols();
    Mat R(subs.front().R.rows(), cols);
    Eigen::Index c = 0;
    for (const auto& V : subs) {
        R.middleCols(c, V.R.cols()) = V.R;
        c += V.R.cols();
    }
    return R;
}

Mat stacked_left_inverse(const std::vector<InvariantSubspace>& subs) {
    Eigen::Index rows = 0;
    for (const auto& V : subs) rows += V.S.rows();
    Mat S(rows, subs.front().S.cols());
    Eigen::Index r = 0;
    for (const auto& V : subs) {
        S.middleRows(r, V.S.rows()) = V.S;
        r += V.S.rows();
    }
    return S;
}

double min_separation(const std::vector<InvariantSubspace>& subs) {
    double best = kInf;
    for (std::size_t a = 0; a < subs.size(); ++a)
        for (std::size_t b = a + 1; b < subs.size(); ++b)
            best = std::min(best, separation(subs[a].B, subs[b].B));
    return best;
}

void write_multiplier_csv(std::ostream& os, const OrbitFamily& family, const FloquetTolerances& tol) {
    const HamiltonianSystem& sys = family.system();
    const int N = sys.dim();
    os << "h,tau";
    for (int i = 1; i <= N; ++i) os << ",mu_re_" << i << ",mu_im_" << i;
    os << ",normality,min_separation\n" << std::setprecision(17);
    for (const auto& o : family.orbits()) {
        const SpectralSummary ss = spectral_summary(o.monodromy, tol);
        const NormalityReport nr = classify_normality(sys, o, tol);
        double sep = std::numeric_limits<double>::quiet_NaN();
        try {
            sep = min_separation(decompose(sys, o, tol));
        } catch (const Error&) {
        }
        os << o.h << ',' << o.tau;
        for (int i = 0; i < N; ++i) os << ',' << ss.eigenvalues[i].real() << ',' << ss.eigenvalues[i].imag();
        os << ',' << to_string(nr.cls) << ',' << sep << '\n';
    }
}

}  // namespace nnmstab
