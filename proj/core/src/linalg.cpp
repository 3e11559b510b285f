#include "detreg/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

namespace detreg {

namespace {

Eigen::JacobiSVD<Matrix> svd_of(const Matrix& a, unsigned options = 0) {
  return Eigen::JacobiSVD<Matrix>(a, options);
}

void require_full_column_rank(const Matrix& w, double tol, const char* who) {
  if (w.rows() < w.cols()) {
    throw RankDeficient(std::string(who) + ": more columns than rows");
  }
  if (!is_full_column_rank(w, tol)) {
    throw RankDeficient(std::string(who) + ": matrix is column rank deficient");
  }
}

}  // namespace

OrthonormalBasis::OrthonormalBasis(Matrix m, double tolerance)
    : mat_(std::move(m)), tol_(tolerance) {
  if (mat_.cols() > 0) {
    const Matrix gram = mat_.transpose() * mat_;
    const double dev =
        (gram - Matrix::Identity(mat_.cols(), mat_.cols())).cwiseAbs().maxCoeff();
    if (dev > tol_) {
      throw InvalidArgument("OrthonormalBasis: columns not orthonormal, max |B^T B - I| = " +
                            std::to_string(dev));
    }
  }
}

bool is_full_column_rank(const Matrix& w, double tol) {
  if (w.cols() == 0) return true;
  if (w.rows() < w.cols()) return false;
  const auto svd = svd_of(w);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  return smax > 0.0 && smin > tol * smax;
}

OrthonormalBasis orthonormal_range_basis(const Matrix& w, double tol) {
  require_full_column_rank(w, tol, "orthonormal_range_basis");
  Eigen::HouseholderQR<Matrix> qr(w);
  Matrix q = qr.householderQ() * Matrix::Identity(w.rows(), w.cols());
  return OrthonormalBasis(std::move(q));
}

OrthonormalBasis orthonormal_complement_basis(const Matrix& w, double tol) {
  require_full_column_rank(w, tol, "orthonormal_complement_basis");
  const Index n = w.rows();
  const Index m = w.cols();
  Eigen::HouseholderQR<Matrix> qr(w);
  Matrix q_full = qr.householderQ() * Matrix::Identity(n, n);
  return OrthonormalBasis(q_full.rightCols(n - m));
}

Matrix projector(const Matrix& w, double tol) {
  const OrthonormalBasis q = orthonormal_range_basis(w, tol);
  return q.matrix() * q.matrix().transpose();
}

Matrix pinv(const Matrix& a, double rel_cutoff) {
  if (a.size() == 0) return Matrix(a.cols(), a.rows());
  auto svd = svd_of(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = rel_cutoff * (sv.size() > 0 ? sv(0) : 0.0);
  Vector inv_sv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv_sv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

Matrix pinv_symmetric(const Matrix& a, double rel_cutoff) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("pinv_symmetric: matrix must be square");
  }
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector& ev = es.eigenvalues();
  const double cutoff = rel_cutoff * ev.cwiseAbs().maxCoeff();
  Vector inv_ev = Vector::Zero(ev.size());
  for (Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > cutoff) inv_ev(i) = 1.0 / ev(i);
  }
  return es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
}

Matrix structured_pinv(const OrthonormalBasis& s, const Matrix& m) {
  if (m.rows() != s.cols() || m.cols() != s.cols()) {
    throw DimensionMismatch("structured_pinv: M must be k x k with k = cols(S)");
  }
  return s.matrix() * pinv(m) * s.matrix().transpose();
}

Matrix SaddleBlocks::assemble() const {
  const Index n = top_left.rows();
  const Index m = top_right.cols();
  Matrix out(n + m, n + m);
  out.topLeftCorner(n, n) = top_left;
  out.topRightCorner(n, m) = top_right;
  out.bottomLeftCorner(m, n) = bottom_left;
  out.bottomRightCorner(m, m) = bottom_right;
  return out;
}

SaddleBlocks saddle_block_inverse(const Matrix& a, const Matrix& w, double tol) {
  if (a.rows() != a.cols() || a.rows() != w.rows()) {
    throw DimensionMismatch("saddle_block_inverse: dimension mismatch");
  }
  const OrthonormalBasis b = orthonormal_complement_basis(w, tol);
  const Matrix reduced = b.matrix().transpose() * a * b.matrix();
  Eigen::FullPivLU<Matrix> lu(reduced);
  lu.setThreshold(kRankTol);
  if (reduced.size() > 0 && !lu.isInvertible()) {
    throw SingularSystem("saddle_block_inverse: B^T A B singular at tolerance");
  }
  const Matrix reduced_inv =
      reduced.size() > 0 ? lu.inverse() : Matrix(reduced.rows(), reduced.cols());
  const Matrix tl = b.matrix() * reduced_inv * b.matrix().transpose();
  const Matrix w_plus = pinv(w);
  const Index n = a.rows();
  SaddleBlocks blocks;
  blocks.top_left = tl;
  blocks.top_right = (Matrix::Identity(n, n) - tl * a) * w_plus.transpose();
  blocks.bottom_left = w_plus * (Matrix::Identity(n, n) - a * tl);
  blocks.bottom_right = -w_plus * (a - a * tl * a) * w_plus.transpose();
  return blocks;
}

Matrix assemble_saddle(const Matrix& a, const Matrix& w) {
  if (a.rows() != a.cols() || a.rows() != w.rows()) {
    throw DimensionMismatch("assemble_saddle: dimension mismatch");
  }
  const Index n = a.rows();
  const Index p = w.cols();
  Matrix s(n + p, n + p);
  s.topLeftCorner(n, n) = a;
  s.topRightCorner(n, p) = w;
  s.bottomLeftCorner(p, n) = w.transpose();
  s.bottomRightCorner(p, p).setZero();
  return s;
}

void solve_saddle(const Matrix& a, const Matrix& w, const Vector& b0,
                  const Vector& b1, Vector& x0, Vector& x1) {
  if (b0.size() != a.rows() || b1.size() != w.cols()) {
    throw DimensionMismatch("solve_saddle: right-hand side dimension mismatch");
  }
  const Matrix s = assemble_saddle(a, w);
  Eigen::FullPivLU<Matrix> lu(s);
  lu.setThreshold(kRankTol);
  if (!lu.isInvertible()) {
    throw SingularSystem("solve_saddle: saddle matrix singular at tolerance");
  }
  Vector rhs(b0.size() + b1.size());
  rhs << b0, b1;
  const Vector sol = lu.solve(rhs);
  x0 = sol.head(a.rows());
  x1 = sol.tail(w.cols());
}

double condition_number_symmetric(const Matrix& a) {
  if (a.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().cwiseAbs().minCoeff();
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace detreg
