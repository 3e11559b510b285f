#include "detreg/nystrom.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace detreg {

Matrix NystromFactor::materialize() const {
  if (cross.cols() == 0) return Matrix::Zero(cross.rows(), cross.rows());
  // Square-root form: clamp the spectrum of xi at zero so the materialized
  // approximation is positive semi-definite by construction.
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (xi + xi.transpose()));
  const Vector& ev = es.eigenvalues();
  const double cutoff = kPinvCutoff * ev.cwiseAbs().maxCoeff();
  Matrix half(cross.rows(), ev.size());
  Index kept = 0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cutoff) {
      half.col(kept++) = (cross * es.eigenvectors().col(i)) / std::sqrt(ev(i));
    }
  }
  Matrix out = half.leftCols(kept) * half.leftCols(kept).transpose();
  return 0.5 * (out + out.transpose());
}

NystromFactor projected_nystrom(const NonNegativePair& nnp, const Subset& c) {
  const Index p = nnp.p();
  const Index k = c.size();
  if (k <= p) {
    throw InfeasibleSize("projected_nystrom: subset must have more than p elements");
  }
  const Matrix v_c = rows_of(nnp.basis(), c);
  if (!is_full_column_rank(v_c)) {
    throw RankDeficient("projected_nystrom: V_C is rank deficient (pmf-zero subset)");
  }
  OrthonormalBasis b_c = orthonormal_complement_basis(v_c);
  const Matrix k_cc = submatrix(nnp.kernel(), c);
  Matrix xi = b_c.matrix().transpose() * k_cc * b_c.matrix();
  xi = 0.5 * (xi + xi.transpose());

  // n x k slab of K restricted to the subset columns; the V-perp projection
  // uses the cached range basis instead of the n x n projector.
  Matrix k_slab(nnp.n(), k);
  for (Index j = 0; j < k; ++j) {
    k_slab.col(j) = nnp.kernel().col(c.indices()[static_cast<std::size_t>(j)]);
  }
  const Matrix slab_b = k_slab * b_c.matrix();
  const Matrix& q_v = nnp.range_basis();
  const Matrix cross = slab_b - q_v * (q_v.transpose() * slab_b);

  Eigen::SelfAdjointEigenSolver<Matrix> es(xi, Eigen::EigenvaluesOnly);
  const double max_abs = es.eigenvalues().cwiseAbs().maxCoeff();
  Index rank = 0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::abs(es.eigenvalues()(i)) > kPinvCutoff * max_abs) ++rank;
  }
  return NystromFactor{c, std::move(b_c), std::move(xi), cross, rank};
}

Matrix common_nystrom(const Matrix& k, const Subset& c) {
  const Index n = k.rows();
  if (c.empty()) return Matrix::Zero(n, n);
  Matrix k_slab(n, c.size());
  for (Index j = 0; j < c.size(); ++j) {
    k_slab.col(j) = k.col(c.indices()[static_cast<std::size_t>(j)]);
  }
  const Matrix k_cc = submatrix(k, c);
  Matrix out = k_slab * pinv_symmetric(0.5 * (k_cc + k_cc.transpose())) * k_slab.transpose();
  return 0.5 * (out + out.transpose());
}

double nystrom_relative_error(const NonNegativePair& nnp, const NystromFactor& factor) {
  const double denom = nnp.projected_kernel().norm();
  // Relative floor: a projected kernel at roundoff scale counts as zero.
  if (denom <= 1e-12 * std::max(1.0, nnp.kernel().norm())) {
    throw InvalidArgument("nystrom_relative_error: projected kernel is zero");
  }
  return (nnp.projected_kernel() - factor.materialize()).norm() / denom;
}

double sandwich_violation(const NonNegativePair& nnp, const NystromFactor& factor) {
  // In the square-root frame K~ = R R^T the approximation is R Pi R^T with Pi
  // the orthogonal projector onto col(R^T C B). Evaluating both sides of the
  // sandwich through Pi avoids inverting a possibly tiny reduced matrix.
  const Index n = nnp.n();
  Eigen::SelfAdjointEigenSolver<Matrix> kt(nnp.projected_kernel());
  const Vector& ev = kt.eigenvalues();
  const double cutoff = kPinvCutoff * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Matrix root(n, ev.size());
  Index rank = 0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cutoff) root.col(rank++) = kt.eigenvectors().col(i) * std::sqrt(ev(i));
  }
  const Matrix r = root.leftCols(rank);

  const Matrix expanded =
      sampling_matrix(factor.subset, n) * factor.complement.matrix();  // C B
  const Matrix t = r.transpose() * expanded;                          // rank x (k-p)
  Eigen::ColPivHouseholderQR<Matrix> qr(t);
  const Index t_rank = qr.rank();
  const Matrix q = Matrix(qr.householderQ()).leftCols(t_rank);

  const Matrix low = r * (q * q.transpose()) * r.transpose();
  const Matrix high = nnp.projected_kernel() - low;
  Eigen::SelfAdjointEigenSolver<Matrix> lower(0.5 * (low + low.transpose()),
                                              Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Matrix> upper(0.5 * (high + high.transpose()),
                                              Eigen::EigenvaluesOnly);
  const double v1 = -lower.eigenvalues().minCoeff();
  const double v2 = -upper.eigenvalues().minCoeff();
  return std::max({0.0, v1, v2});
}

}  // namespace detreg
