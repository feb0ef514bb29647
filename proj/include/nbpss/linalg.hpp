#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>

namespace nbpss {

using Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Relative eigenvalue threshold below which a direction counts as null space.
inline constexpr double kRankTolerance = 1e-10;

/** Eigen-split of a symmetric positive semi-definite matrix into its
 * penalized range (eigenvalues above tolerance) and its null space.
 *
 * This is the one place where ranks, kernel bases and generalized inverses are
 * materialized; everything downstream reads these members.
 */
struct SymmetricSpectrum {
    Vector range_values;   ///< positive eigenvalues, ascending
    Matrix range_basis;    ///< D x rank, orthonormal columns
    Matrix kernel_basis;   ///< D x (D - rank), orthonormal columns

    Index dim() const { return range_basis.rows(); }
    Index rank() const { return range_basis.cols(); }

    /// Moore-Penrose inverse restricted to the range.
    Matrix generalized_inverse() const {
        return range_basis * range_values.cwiseInverse().asDiagonal() * range_basis.transpose();
    }

    /// sum of log positive eigenvalues (log pseudo-determinant)
    double log_pdet() const { return range_values.array().log().sum(); }
};

inline SymmetricSpectrum symmetric_spectrum(const Matrix& k, double rel_tol = kRankTolerance) {
    SymmetricSpectrum out;
    const Index d = k.rows();
    if (d == 0) return out;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (k + k.transpose()));
    const Vector& ev = es.eigenvalues();
    const double vmax = ev.cwiseAbs().maxCoeff();
    const double cut = vmax > 0.0 ? rel_tol * vmax : 0.0;
    Index nker = 0;
    // eigenvalues are ascending, so the kernel is a prefix
    while (nker < d && ev(nker) <= cut) ++nker;
    out.kernel_basis = es.eigenvectors().leftCols(nker);
    out.range_basis = es.eigenvectors().rightCols(d - nker);
    out.range_values = ev.tail(d - nker);
    return out;
}

inline Index numeric_rank_symmetric(const Matrix& k, double rel_tol = kRankTolerance) {
    return symmetric_spectrum(k, rel_tol).rank();
}

/// Column rank of a general matrix by column-pivoted QR.
inline Index numeric_rank(const Matrix& x, double rel_tol = 1e-9) {
    if (x.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    qr.setThreshold(rel_tol);
    return qr.rank();
}

/// Orthonormalize `row` against the orthonormal rows of `a`; returns false if
/// it already lies in their span.
inline bool append_if_independent(Matrix& a, Eigen::RowVectorXd row, double rel_tol = 1e-8) {
    const double norm0 = row.norm();
    if (norm0 == 0.0) return false;
    for (int pass = 0; pass < 2; ++pass) {
        for (Index i = 0; i < a.rows(); ++i) row -= row.dot(a.row(i)) * a.row(i);
    }
    if (row.norm() <= rel_tol * norm0) return false;
    a.conservativeResize(a.rows() + 1, row.size());
    a.row(a.rows() - 1) = row / row.norm();
    return true;
}

} // namespace nbpss
