#pragma once

#include <Eigen/Dense>

#include "detreg/errors.hpp"

namespace detreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Relative singular-value cutoff below which a column is treated as dependent.
inline constexpr double kRankTol = 1e-10;

/// Relative spectral cutoff used by pseudo-inverses.
inline constexpr double kPinvCutoff = 1e-12;

/// A matrix whose columns are orthonormal, checked at construction.
class OrthonormalBasis {
 public:
  explicit OrthonormalBasis(Matrix m, double tolerance = 1e-9);

  const Matrix& matrix() const { return mat_; }
  Index rows() const { return mat_.rows(); }
  Index cols() const { return mat_.cols(); }
  double tolerance() const { return tol_; }

 private:
  Matrix mat_;
  double tol_;
};

/// True iff sigma_min(w) > tol * sigma_max(w).
bool is_full_column_rank(const Matrix& w, double tol = kRankTol);

/// Orthonormal basis of the column space of w (n x m full column rank).
OrthonormalBasis orthonormal_range_basis(const Matrix& w, double tol = kRankTol);

/// Orthonormal basis of the orthogonal complement of the column space of w.
///
/// For an n x m input the result has n - m columns (empty when n == m).
/// Throws RankDeficient when w is not full column rank at tolerance tol.
OrthonormalBasis orthonormal_complement_basis(const Matrix& w, double tol = kRankTol);

/// Orthogonal projector onto the column space of w: W (W^T W)^-1 W^T.
Matrix projector(const Matrix& w, double tol = kRankTol);

/// Moore-Penrose pseudo-inverse via SVD with relative cutoff.
Matrix pinv(const Matrix& a, double rel_cutoff = kPinvCutoff);

/// Pseudo-inverse of a symmetric matrix via eigendecomposition.
Matrix pinv_symmetric(const Matrix& a, double rel_cutoff = kPinvCutoff);

/// S M^+ S^T, the pseudo-inverse of S M S^T for S with orthonormal columns.
Matrix structured_pinv(const OrthonormalBasis& s, const Matrix& m);

/// Blocks of the inverse of [[A, W], [W^T, 0]] computed through the
/// complement basis of W, valid whenever B^T A B is invertible.
struct SaddleBlocks {
  Matrix top_left;      // (P_{W+} A P_{W+})^+ expressed on the complement
  Matrix top_right;     // (I - TL A) W^{+T}
  Matrix bottom_left;   // W^+ (I - A TL)
  Matrix bottom_right;  // -W^+ (A - A TL A) W^{+T}

  Matrix assemble() const;
};

SaddleBlocks saddle_block_inverse(const Matrix& a, const Matrix& w,
                                  double tol = kRankTol);

/// Dense symmetric saddle matrix [[A, W], [W^T, 0]].
Matrix assemble_saddle(const Matrix& a, const Matrix& w);

/// Solves [[A, W], [W^T, 0]] [x0; x1] = [b0; b1].
/// Throws SingularSystem when the assembled matrix is singular at tolerance.
void solve_saddle(const Matrix& a, const Matrix& w, const Vector& b0,
                  const Vector& b1, Vector& x0, Vector& x1);

/// max |eigenvalue| ratio of a symmetric positive definite matrix.
double condition_number_symmetric(const Matrix& a);

}  // namespace detreg
