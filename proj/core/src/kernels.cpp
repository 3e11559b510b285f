#include "detreg/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>

namespace detreg {

KernelSpec KernelSpec::gaussian(double bandwidth_sq) {
  KernelSpec s;
  s.kind = KernelKind::gaussian;
  s.bandwidth_sq = bandwidth_sq;
  return s;
}

KernelSpec KernelSpec::thin_plate(int regularity) {
  KernelSpec s;
  s.kind = KernelKind::thin_plate;
  s.regularity = regularity;
  return s;
}

KernelSpec KernelSpec::projected_gaussian(double bandwidth_sq,
                                          std::vector<Index> active_coords) {
  KernelSpec s;
  s.kind = KernelKind::projected_gaussian;
  s.bandwidth_sq = bandwidth_sq;
  s.active_coords = std::move(active_coords);
  return s;
}

BasisSpec BasisSpec::constant() { return BasisSpec{BasisKind::constant, 0, {}}; }

BasisSpec BasisSpec::constant_linear(std::vector<Index> active_coords) {
  return BasisSpec{BasisKind::constant_linear, 1, std::move(active_coords)};
}

BasisSpec BasisSpec::poly(int order, std::vector<Index> active_coords) {
  return BasisSpec{BasisKind::poly_total_order, order, std::move(active_coords)};
}

namespace {

void check_mask(const std::vector<Index>& mask, Index d, const char* who) {
  if (mask.empty()) throw InvalidArgument(std::string(who) + ": empty coordinate mask");
  for (Index c : mask) {
    if (c < 0 || c >= d) {
      throw InvalidArgument(std::string(who) + ": coordinate index " +
                            std::to_string(c) + " outside 0.." + std::to_string(d - 1));
    }
  }
}

std::vector<Index> active_or_all(const std::vector<Index>& mask, Index d) {
  if (mask.empty()) {
    std::vector<Index> all(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  check_mask(mask, d, "basis");
  return mask;
}

double thin_plate_value(double r_sq, int regularity, Index d) {
  if (r_sq <= 0.0) return 0.0;  // 0 * log 0 := 0
  const double exponent = 2.0 * regularity - static_cast<double>(d);
  if (d % 2 == 0) {
    // r^(2p-d) log r = 0.5 * r^(2p-d) * log r^2
    return 0.5 * std::pow(r_sq, 0.5 * exponent) * std::log(r_sq);
  }
  return std::pow(r_sq, 0.5 * exponent);
}

/// Multi-indices of total degree <= order over `coords`, graded-lexicographic.
void enumerate_monomials(Index n_coords, int order,
                         std::vector<std::vector<int>>& out) {
  std::vector<int> exps(static_cast<std::size_t>(n_coords), 0);
  std::function<void(Index, int)> rec = [&](Index pos, int remaining) {
    if (pos == n_coords - 1) {
      exps[static_cast<std::size_t>(pos)] = remaining;
      out.push_back(exps);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      exps[static_cast<std::size_t>(pos)] = e;
      rec(pos + 1, remaining - e);
    }
  };
  for (int deg = 0; deg <= order; ++deg) {
    if (n_coords == 0) {
      if (deg == 0) out.push_back({});
      continue;
    }
    rec(0, deg);
  }
}

}  // namespace

Matrix gaussian_kernel_matrix(const Matrix& x, double bandwidth_sq) {
  if (bandwidth_sq <= 0.0) {
    throw InvalidArgument("gaussian_kernel_matrix: bandwidth_sq must be positive");
  }
  const Index n = x.rows();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double d2 = (x.row(i) - x.row(j)).squaredNorm();
      const double v = std::exp(-d2 / bandwidth_sq);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix thin_plate_kernel_matrix(const Matrix& x, int regularity) {
  const Index d = x.cols();
  if (2 * regularity <= d) {
    throw InvalidArgument("thin_plate_kernel_matrix: needs 2*regularity > d");
  }
  const Index n = x.rows();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) {
      const double v = thin_plate_value((x.row(i) - x.row(j)).squaredNorm(), regularity, d);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix projected_gaussian_kernel_matrix(const Matrix& x, double bandwidth_sq,
                                        const std::vector<Index>& active_coords) {
  if (bandwidth_sq <= 0.0) {
    throw InvalidArgument("projected_gaussian_kernel_matrix: bandwidth_sq must be positive");
  }
  check_mask(active_coords, x.cols(), "projected_gaussian_kernel_matrix");
  Matrix masked(x.rows(), static_cast<Index>(active_coords.size()));
  for (std::size_t c = 0; c < active_coords.size(); ++c) {
    masked.col(static_cast<Index>(c)) = x.col(active_coords[c]);
  }
  return gaussian_kernel_matrix(masked, bandwidth_sq);
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x) {
  switch (spec.kind) {
    case KernelKind::gaussian:
      return gaussian_kernel_matrix(x, spec.bandwidth_sq);
    case KernelKind::thin_plate:
      return thin_plate_kernel_matrix(x, spec.regularity);
    case KernelKind::projected_gaussian:
      return projected_gaussian_kernel_matrix(x, spec.bandwidth_sq, spec.active_coords);
  }
  throw InvalidArgument("kernel_matrix: unknown kernel kind");
}

Matrix kernel_cross_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionMismatch("kernel_cross_matrix: point dimensions differ");
  }
  const Index d = a.cols();
  std::vector<Index> coords;
  if (spec.kind == KernelKind::projected_gaussian) {
    check_mask(spec.active_coords, d, "kernel_cross_matrix");
    coords = spec.active_coords;
  } else {
    coords.resize(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i) coords[static_cast<std::size_t>(i)] = i;
  }
  Matrix out(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) {
      double d2 = 0.0;
      for (Index c : coords) {
        const double diff = a(i, c) - b(j, c);
        d2 += diff * diff;
      }
      switch (spec.kind) {
        case KernelKind::gaussian:
        case KernelKind::projected_gaussian:
          out(i, j) = std::exp(-d2 / spec.bandwidth_sq);
          break;
        case KernelKind::thin_plate:
          out(i, j) = thin_plate_value(d2, spec.regularity, d);
          break;
      }
    }
  }
  return out;
}

Index basis_size(const BasisSpec& spec, Index d) {
  const auto coords = active_or_all(spec.active_coords, d);
  switch (spec.kind) {
    case BasisKind::constant:
      return 1;
    case BasisKind::constant_linear:
      return static_cast<Index>(coords.size()) + 1;
    case BasisKind::poly_total_order: {
      std::vector<std::vector<int>> monomials;
      enumerate_monomials(static_cast<Index>(coords.size()), spec.order, monomials);
      return static_cast<Index>(monomials.size());
    }
  }
  throw InvalidArgument("basis_size: unknown basis kind");
}

Vector basis_eval(const BasisSpec& spec, const Eigen::RowVectorXd& x) {
  const Index d = x.size();
  const auto coords = active_or_all(spec.active_coords, d);
  switch (spec.kind) {
    case BasisKind::constant: {
      Vector v(1);
      v(0) = 1.0;
      return v;
    }
    case BasisKind::constant_linear: {
      Vector v(static_cast<Index>(coords.size()) + 1);
      for (std::size_t c = 0; c < coords.size(); ++c) v(static_cast<Index>(c)) = x(coords[c]);
      v(v.size() - 1) = 1.0;
      return v;
    }
    case BasisKind::poly_total_order: {
      std::vector<std::vector<int>> monomials;
      enumerate_monomials(static_cast<Index>(coords.size()), spec.order, monomials);
      Vector v(static_cast<Index>(monomials.size()));
      for (std::size_t m = 0; m < monomials.size(); ++m) {
        double val = 1.0;
        for (std::size_t c = 0; c < coords.size(); ++c) {
          for (int e = 0; e < monomials[m][c]; ++e) val *= x(coords[c]);
        }
        v(static_cast<Index>(m)) = val;
      }
      return v;
    }
  }
  throw InvalidArgument("basis_eval: unknown basis kind");
}

Matrix polynomial_basis_matrix(const Matrix& x, const BasisSpec& spec) {
  const Index n = x.rows();
  const Index p = basis_size(spec, x.cols());
  if (n < p) {
    throw InvalidArgument("polynomial_basis_matrix: fewer points than basis columns");
  }
  Matrix v(n, p);
  for (Index i = 0; i < n; ++i) {
    v.row(i) = basis_eval(spec, x.row(i)).transpose();
  }
  return v;
}

double median_heuristic_bandwidth(const Matrix& x) {
  const Index n = x.rows();
  if (n < 2) throw InvalidArgument("median_heuristic_bandwidth: needs at least two points");
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      d2.push_back((x.row(i) - x.row(j)).squaredNorm());
    }
  }
  std::sort(d2.begin(), d2.end());
  const std::size_t m = d2.size();
  const double median =
      (m % 2 == 1) ? d2[m / 2] : 0.5 * (d2[m / 2 - 1] + d2[m / 2]);
  return median / 2.0;
}

NonNegativePair make_nnp(Matrix k, Matrix v, std::optional<double> psd_tol) {
  if (k.rows() != k.cols()) throw DimensionMismatch("make_nnp: K must be square");
  if (v.rows() != k.rows()) throw DimensionMismatch("make_nnp: V row count must match K");
  if (v.cols() < 1) throw InvalidArgument("make_nnp: V needs at least one column");
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw InvalidArgument("make_nnp: K is not symmetric, max |K - K^T| = " +
                          std::to_string(asym));
  }
  if (!is_full_column_rank(v)) {
    throw RankDeficient("make_nnp: V is column rank deficient");
  }

  NonNegativePair nnp;
  nnp.q_v_ = orthonormal_range_basis(v).matrix();
  nnp.q_perp_ = orthonormal_complement_basis(v).matrix();
  nnp.p_perp_ = nnp.q_perp_ * nnp.q_perp_.transpose();
  nnp.k_tilde_ = nnp.p_perp_ * k * nnp.p_perp_;
  nnp.k_tilde_ = 0.5 * (nnp.k_tilde_ + nnp.k_tilde_.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> es(nnp.k_tilde_, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  const double max_abs = es.eigenvalues().cwiseAbs().maxCoeff();
  // Floor absorbs the projection roundoff when the projected kernel is (near)
  // zero; it is far below any genuine conditional-positivity violation.
  const double tol = psd_tol.value_or(std::max(1e-8 * max_abs, 1e-12 * scale));
  if (min_eig < -tol) {
    throw NotConditionallyPsd(
        "make_nnp: projected kernel has eigenvalue " + std::to_string(min_eig) +
            " below -" + std::to_string(tol) +
            "; (K, V) is not a non-negative pair at this tolerance",
        min_eig);
  }
  nnp.psd_slack_ = std::min(min_eig, 0.0);
  nnp.k_ = std::move(k);
  nnp.v_ = std::move(v);
  return nnp;
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::thin_plate: return "thin-plate";
    case KernelKind::projected_gaussian: return "projected-gaussian";
  }
  return "unknown";
}

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::constant: return "constant";
    case BasisKind::constant_linear: return "linear";
    case BasisKind::poly_total_order: return "poly";
  }
  return "unknown";
}

}  // namespace detreg
