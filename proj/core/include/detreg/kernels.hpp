#pragma once

#include <optional>
#include <string>
#include <vector>

#include "detreg/linalg.hpp"

namespace detreg {

enum class KernelKind { gaussian, thin_plate, projected_gaussian };

/// Kernel descriptor. Points are rows of an n x d matrix.
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double bandwidth_sq = 1.0;        // gaussian, projected_gaussian
  int regularity = 2;               // thin_plate exponent parameter, needs 2*regularity > d
  std::vector<Index> active_coords; // projected_gaussian mask, 0-based

  static KernelSpec gaussian(double bandwidth_sq);
  static KernelSpec thin_plate(int regularity);
  static KernelSpec projected_gaussian(double bandwidth_sq, std::vector<Index> active_coords);
};

enum class BasisKind { constant, constant_linear, poly_total_order };

/// Polynomial basis descriptor.
///
/// constant        -> [1]
/// constant_linear -> [X_active 1]   (ones column last)
/// poly_total_order-> all monomials of total degree <= order over the active
///                    coordinates, graded-lexicographic, constant first
struct BasisSpec {
  BasisKind kind = BasisKind::constant;
  int order = 1;                    // poly_total_order only
  std::vector<Index> active_coords; // empty = all coordinates

  static BasisSpec constant();
  static BasisSpec constant_linear(std::vector<Index> active_coords = {});
  static BasisSpec poly(int order, std::vector<Index> active_coords = {});
};

Matrix gaussian_kernel_matrix(const Matrix& x, double bandwidth_sq);
Matrix thin_plate_kernel_matrix(const Matrix& x, int regularity);
Matrix projected_gaussian_kernel_matrix(const Matrix& x, double bandwidth_sq,
                                        const std::vector<Index>& active_coords);

/// Gram matrix for an arbitrary kernel spec.
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x);

/// Cross-kernel block k(a_i, b_j) of size rows(a) x rows(b).
Matrix kernel_cross_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b);

Matrix polynomial_basis_matrix(const Matrix& x, const BasisSpec& spec);

/// Basis functions evaluated at a single point (length p row of the V matrix).
Vector basis_eval(const BasisSpec& spec, const Eigen::RowVectorXd& x);

/// Number of basis columns for points of dimension d.
Index basis_size(const BasisSpec& spec, Index d);

/// median{ ||x_i - x_j||^2 : i < j } / 2, midpoint average on even counts.
double median_heuristic_bandwidth(const Matrix& x);

/// A kernel matrix paired with a basis matrix such that the projection of K
/// onto the orthogonal complement of col(V) is positive semi-definite.
class NonNegativePair {
 public:
  const Matrix& kernel() const { return k_; }
  const Matrix& basis() const { return v_; }
  const Matrix& projector_v_perp() const { return p_perp_; }
  const Matrix& projected_kernel() const { return k_tilde_; }

  /// Most negative eigenvalue of the projected kernel, clamped at 0 from above.
  double psd_slack() const { return psd_slack_; }

  /// Orthonormal basis of col(V), n x p.
  const Matrix& range_basis() const { return q_v_; }
  /// Orthonormal basis of col(V)-perp, n x (n-p).
  const Matrix& complement_basis() const { return q_perp_; }

  Index n() const { return k_.rows(); }
  Index p() const { return v_.cols(); }

  friend NonNegativePair make_nnp(Matrix k, Matrix v, std::optional<double> psd_tol);

 private:
  NonNegativePair() = default;
  Matrix k_, v_, p_perp_, k_tilde_, q_v_, q_perp_;
  double psd_slack_ = 0.0;
};

/// Validates (K, V) and precomputes the projected kernel.
///
/// psd_tol is the absolute slack allowed on the smallest eigenvalue of the
/// projected kernel; by default 1e-8 * ||K_tilde||_2. Throws RankDeficient when
/// V is not full column rank and NotConditionallyPsd when the check fails.
NonNegativePair make_nnp(Matrix k, Matrix v, std::optional<double> psd_tol = std::nullopt);

std::string to_string(KernelKind kind);
std::string to_string(BasisKind kind);

}  // namespace detreg
