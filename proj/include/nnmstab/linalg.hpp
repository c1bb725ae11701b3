#pragma once

// Symplectic linear algebra on dense Eigen types. Everything here is
// templated on the scalar (or on the Eigen expression) so it works for real
// and complex matrices alike.

#include "nnmstab/types.hpp"

#include <Eigen/SVD>

namespace nnmstab {

/// Canonical symplectic unit J = [0 I; -I 0] of size 2n.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> symplectic_unit(Eigen::Index n) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> J =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(2 * n, 2 * n);
    J.topRightCorner(n, n).setIdentity();
    J.bottomLeftCorner(n, n) = -Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(n, n);
    return J;
}

/// J * v for a column vector (or every column of a matrix), without forming J.
template <typename Derived>
typename Derived::PlainObject apply_J(const Eigen::MatrixBase<Derived>& v) {
    const Eigen::Index n = v.rows() / 2;
    typename Derived::PlainObject out(v.rows(), v.cols());
    out.topRows(n) = v.bottomRows(n);
    out.bottomRows(n) = -v.topRows(n);
    return out;
}

/// Inverse of a symplectic matrix, X^{-1} = J X^T J^T.
template <typename Derived>
typename Derived::PlainObject symplectic_inverse(const Eigen::MatrixBase<Derived>& X) {
    using Scalar = typename Derived::Scalar;
    const auto J = symplectic_unit<Scalar>(X.rows() / 2);
    return J * X.transpose() * J.transpose();
}

/// max |X^T J X - J|, zero for an exactly symplectic X.
template <typename Derived>
double symplectic_defect(const Eigen::MatrixBase<Derived>& X) {
    using Scalar = typename Derived::Scalar;
    const auto J = symplectic_unit<Scalar>(X.rows() / 2);
    return (X.transpose() * J * X - J).cwiseAbs().maxCoeff();
}

/// Symplectic left inverse S = (R^T J R)^{-1} R^T J of a 2n x 2v basis R.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> symplectic_left_inverse(
    const Eigen::MatrixBase<Derived>& R) {
    using Scalar = typename Derived::Scalar;
    using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const M RtJ = R.transpose() * symplectic_unit<Scalar>(R.rows() / 2);
    const M gram = RtJ * R;
    return gram.fullPivLu().solve(RtJ);
}

/// sep(A, B) = min_{|Y|_F = 1} |Y A - B Y|_F, the smallest singular value of
/// the Sylvester operator Y -> Y A - B Y written in Kronecker form.
template <typename DerivedA, typename DerivedB>
double separation(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B) {
    using Scalar = typename DerivedA::Scalar;
    using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::Index v = A.rows();
    const Eigen::Index w = B.rows();
    // vec(Y A) = (A^T kron I_w) vec(Y),  vec(B Y) = (I_v kron B) vec(Y)
    M op = M::Zero(v * w, v * w);
    for (Eigen::Index i = 0; i < v; ++i) {
        for (Eigen::Index j = 0; j < v; ++j) {
            op.block(i * w, j * w, w, w) += A(j, i) * M::Identity(w, w);
        }
        op.block(i * w, i * w, w, w) -= B;
    }
    Eigen::JacobiSVD<M> svd(op);
    return svd.singularValues().minCoeff();
}

/// Solve a (possibly over-determined, consistent) linear system in the
/// least-squares sense. Returns the minimum-norm solution.
inline Vec least_squares(const Mat& A, const Vec& b) {
    return A.completeOrthogonalDecomposition().solve(b);
}

}  // namespace nnmstab
