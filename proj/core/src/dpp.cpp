#include "detreg/dpp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "detreg/parallel.hpp"

namespace detreg {

Subset::Subset(std::vector<Index> indices) : idx_(std::move(indices)) {
  for (std::size_t i = 0; i + 1 < idx_.size(); ++i) {
    if (idx_[i] >= idx_[i + 1]) {
      throw InvalidArgument("Subset: indices must be strictly increasing");
    }
  }
  if (!idx_.empty() && idx_.front() < 0) {
    throw InvalidArgument("Subset: negative index");
  }
}

Subset Subset::full(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  return Subset(std::move(idx));
}

Subset Subset::from_mask(std::uint64_t mask, Index n) {
  std::vector<Index> idx;
  for (Index i = 0; i < n; ++i) {
    if (mask & (std::uint64_t{1} << i)) idx.push_back(i);
  }
  return Subset(std::move(idx));
}

bool Subset::contains(Index i) const {
  return std::binary_search(idx_.begin(), idx_.end(), i);
}

std::uint64_t Subset::to_mask() const {
  std::uint64_t mask = 0;
  for (Index i : idx_) {
    if (i >= 64) throw TooLarge("Subset::to_mask: index exceeds 63");
    mask |= std::uint64_t{1} << i;
  }
  return mask;
}

Matrix rows_of(const Matrix& a, const Subset& c) {
  Matrix out(c.size(), a.cols());
  for (Index i = 0; i < c.size(); ++i) out.row(i) = a.row(c.indices()[static_cast<std::size_t>(i)]);
  return out;
}

Matrix submatrix(const Matrix& a, const Subset& c) {
  const auto& idx = c.indices();
  Matrix out(c.size(), c.size());
  for (Index i = 0; i < c.size(); ++i) {
    for (Index j = 0; j < c.size(); ++j) {
      out(i, j) = a(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

Vector gather(const Vector& y, const Subset& c) {
  Vector out(c.size());
  for (Index i = 0; i < c.size(); ++i) out(i) = y(c.indices()[static_cast<std::size_t>(i)]);
  return out;
}

Matrix sampling_matrix(const Subset& c, Index n) {
  Matrix out = Matrix::Zero(n, c.size());
  for (Index i = 0; i < c.size(); ++i) out(c.indices()[static_cast<std::size_t>(i)], i) = 1.0;
  return out;
}

Matrix scatter(const Matrix& m, const Subset& c, Index n) {
  if (m.rows() != c.size() || m.cols() != c.size()) {
    throw DimensionMismatch("scatter: block size must match subset size");
  }
  Matrix out = Matrix::Zero(n, n);
  const auto& idx = c.indices();
  for (Index i = 0; i < c.size(); ++i) {
    for (Index j = 0; j < c.size(); ++j) {
      out(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]) = m(i, j);
    }
  }
  return out;
}

EnsembleModel::EnsembleModel(NonNegativePair nnp, double lambda)
    : nnp_(std::move(nnp)), lambda_(lambda) {
  if (lambda_ <= 0.0) throw InvalidArgument("EnsembleModel: lambda must be positive");

  // Spectrum of K~/lambda computed on the complement subspace; the basis
  // Q_perp keeps the reduced matrix exactly symmetric.
  const Matrix& q_perp = nnp_.complement_basis();
  Matrix reduced = q_perp.transpose() * nnp_.kernel() * q_perp / lambda_;
  reduced = 0.5 * (reduced + reduced.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(reduced);
  eigvals_ = es.eigenvalues().cwiseMax(0.0);
  if (eigvals_.size() > 0) {
    // Eigenvalues below the relative cutoff are exact zeros of the projected
    // kernel up to roundoff; they must never enter a sample.
    const double cutoff = kPinvCutoff * eigvals_.maxCoeff();
    for (Index i = 0; i < eigvals_.size(); ++i) {
      if (eigvals_(i) <= cutoff) eigvals_(i) = 0.0;
    }
  }
  eigvecs_ = q_perp * es.eigenvectors();

  Vector weights(eigvals_.size());
  d_eff_ = 0.0;
  double log_det = 0.0;
  for (Index i = 0; i < eigvals_.size(); ++i) {
    weights(i) = eigvals_(i) / (eigvals_(i) + 1.0);
    d_eff_ += weights(i);
    log_det += std::log1p(eigvals_(i));
  }
  const Matrix& q_v = nnp_.range_basis();
  marginal_ = q_v * q_v.transpose() +
              eigvecs_ * weights.asDiagonal() * eigvecs_.transpose();
  marginal_ = 0.5 * (marginal_ + marginal_.transpose());

  const Matrix gram = nnp_.basis().transpose() * nnp_.basis();
  log_norm_ = log_det + std::log(Eigen::PartialPivLU<Matrix>(gram).determinant());
}

EnsembleModel build_ensemble(NonNegativePair nnp, double lambda) {
  return EnsembleModel(std::move(nnp), lambda);
}

double pmf(const EnsembleModel& model, const Subset& c) {
  const Index p = model.p();
  const Index k = c.size();
  if (k < p) return 0.0;
  const Matrix v_c = rows_of(model.nnp().basis(), c);
  if (!is_full_column_rank(v_c)) return 0.0;

  const double det_vv = Eigen::PartialPivLU<Matrix>(v_c.transpose() * v_c).determinant();
  if (!(det_vv > 0.0)) return 0.0;

  double det_kernel = 1.0;  // empty determinant when |C| == p
  if (k > p) {
    const OrthonormalBasis b_c = orthonormal_complement_basis(v_c);
    const Matrix l_cc = submatrix(model.nnp().kernel(), c) / model.lambda();
    const Matrix m = b_c.matrix().transpose() * l_cc * b_c.matrix();
    det_kernel = Eigen::PartialPivLU<Matrix>(m).determinant();
    if (!(det_kernel > 0.0)) return 0.0;  // boundary-of-support roundoff
  }
  const double log_p = std::log(det_kernel) + std::log(det_vv) - model.log_normalization();
  return std::exp(log_p);
}

PmfTable::PmfTable(Index n, std::vector<double> probs)
    : n_(n), probs_(std::move(probs)) {
  if (probs_.size() != (std::size_t{1} << n_)) {
    throw DimensionMismatch("PmfTable: need one entry per subset");
  }
}

double PmfTable::total_mass() const {
  double sum = 0.0;
  for (double p : probs_) sum += p;
  return sum;
}

double PmfTable::expected_size() const {
  double acc = 0.0;
  for (std::size_t mask = 0; mask < probs_.size(); ++mask) {
    acc += probs_[mask] * static_cast<double>(std::popcount(mask));
  }
  return acc;
}

double PmfTable::inclusion_probability(Index i) const {
  double acc = 0.0;
  const std::uint64_t bit = std::uint64_t{1} << i;
  for (std::size_t mask = 0; mask < probs_.size(); ++mask) {
    if (mask & bit) acc += probs_[mask];
  }
  return acc;
}

PmfTable enumerate_distribution(const EnsembleModel& model, Index max_n) {
  const Index n = model.n();
  if (n > max_n || n > 24) {
    throw TooLarge("enumerate_distribution: n = " + std::to_string(n) +
                   " exceeds the enumeration limit");
  }
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> probs(count, 0.0);
  // Fixed chunking keeps the result independent of the worker count.
  const std::size_t chunks = std::min<std::size_t>(64, count);
  const std::size_t chunk_size = (count + chunks - 1) / chunks;
  parallel_for(chunks, [&](std::size_t chunk) {
    const std::size_t begin = chunk * chunk_size;
    const std::size_t end = std::min(begin + chunk_size, count);
    for (std::size_t mask = begin; mask < end; ++mask) {
      probs[mask] = pmf(model, Subset::from_mask(mask, n));
    }
  });
  return PmfTable(n, std::move(probs));
}

namespace {

/// Projection-DPP cascade: draws exactly cols(w) items whose distribution is
/// the projection DPP with marginal kernel w w^T; w must have orthonormal
/// columns. Consumes w.
std::vector<Index> projection_cascade(Matrix w, Rng& rng) {
  std::vector<Index> selected;
  const Index n = w.rows();
  while (w.cols() > 0) {
    Vector row_norms(n);
    for (Index j = 0; j < n; ++j) row_norms(j) = w.row(j).squaredNorm();
    const double total = row_norms.sum();
    if (!(total > 0.0)) {
      throw SingularSystem("projection_cascade: degenerate basis");
    }
    std::discrete_distribution<Index> pick(row_norms.data(), row_norms.data() + n);
    const Index item = pick(rng);
    selected.push_back(item);

    // Eliminate the coordinate of the chosen item from all remaining columns,
    // then restore orthonormality.
    Index pivot;
    w.row(item).cwiseAbs().maxCoeff(&pivot);
    const double pivot_val = w(item, pivot);
    for (Index col = 0; col < w.cols(); ++col) {
      if (col == pivot) continue;
      w.col(col) -= (w(item, col) / pivot_val) * w.col(pivot);
    }
    // Drop the pivot column.
    if (pivot != w.cols() - 1) w.col(pivot) = w.col(w.cols() - 1);
    w.conservativeResize(Eigen::NoChange, w.cols() - 1);
    if (w.cols() > 0) {
      Eigen::HouseholderQR<Matrix> qr(w);
      w = qr.householderQ() * Matrix::Identity(n, w.cols());
    }
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

Matrix concat_columns(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

Subset sample(const EnsembleModel& model, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vector& ev = model.kernel_eigenvalues();
  std::vector<Index> chosen;
  for (Index i = 0; i < ev.size(); ++i) {
    if (unif(rng) < ev(i) / (ev(i) + 1.0)) chosen.push_back(i);
  }
  Matrix extra(model.n(), static_cast<Index>(chosen.size()));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    extra.col(static_cast<Index>(i)) = model.kernel_eigenvectors().col(chosen[i]);
  }
  return Subset(projection_cascade(concat_columns(model.projection_basis(), extra), rng));
}

Subset sample_fixed_size(const EnsembleModel& model, Index k, Rng& rng) {
  const Index n = model.n();
  const Index p = model.p();
  if (k < p || k > n) {
    throw InfeasibleSize("sample_fixed_size: k must satisfy p <= k <= n");
  }
  const Vector& ev = model.kernel_eigenvalues();
  const Index m = ev.size();
  const Index r = k - p;
  Index nonzero = 0;
  for (Index i = 0; i < m; ++i) {
    if (ev(i) > 0.0) ++nonzero;
  }
  if (r > nonzero) {
    throw InfeasibleSize("sample_fixed_size: k - p exceeds the rank of the projected kernel");
  }

  // log E[j][i] = log of the elementary symmetric polynomial of degree j over
  // the first i eigenvalues.
  std::vector<std::vector<double>> log_e(
      static_cast<std::size_t>(r + 1),
      std::vector<double>(static_cast<std::size_t>(m + 1), kNegInf));
  for (Index i = 0; i <= m; ++i) log_e[0][static_cast<std::size_t>(i)] = 0.0;
  for (Index j = 1; j <= r; ++j) {
    for (Index i = 1; i <= m; ++i) {
      double with_i = kNegInf;
      if (ev(i - 1) > 0.0) {
        with_i = std::log(ev(i - 1)) +
                 log_e[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i - 1)];
      }
      log_e[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
          log_add(log_e[static_cast<std::size_t>(j)][static_cast<std::size_t>(i - 1)], with_i);
    }
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Index> chosen;
  Index remaining = r;
  for (Index i = m; i >= 1 && remaining > 0; --i) {
    double log_include = kNegInf;
    if (ev(i - 1) > 0.0) {
      log_include =
          std::log(ev(i - 1)) +
          log_e[static_cast<std::size_t>(remaining - 1)][static_cast<std::size_t>(i - 1)] -
          log_e[static_cast<std::size_t>(remaining)][static_cast<std::size_t>(i)];
    }
    if (i == remaining || std::log(unif(rng)) < log_include) {
      chosen.push_back(i - 1);
      --remaining;
    }
  }
  Matrix extra(n, static_cast<Index>(chosen.size()));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    extra.col(static_cast<Index>(i)) = model.kernel_eigenvectors().col(chosen[i]);
  }
  return Subset(projection_cascade(concat_columns(model.projection_basis(), extra), rng));
}

Subset volume_sample(const Matrix& v, Index k, Rng& rng) {
  const Index n = v.rows();
  const Index p = v.cols();
  if (k < p || k > n) throw InfeasibleSize("volume_sample: k must satisfy p <= k <= n");
  if (!is_full_column_rank(v)) throw RankDeficient("volume_sample: V is rank deficient");

  if (k == p) {
    return Subset(projection_cascade(orthonormal_range_basis(v).matrix(), rng));
  }

  // Reverse iterative removal: drop item i with probability (1 - h_i)/(|S| - p)
  // where h_i is the leverage score of row i within the surviving set.
  std::vector<Index> alive(static_cast<std::size_t>(n));
  std::iota(alive.begin(), alive.end(), Index{0});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (static_cast<Index>(alive.size()) > k) {
    Matrix v_s(static_cast<Index>(alive.size()), p);
    for (std::size_t i = 0; i < alive.size(); ++i) v_s.row(static_cast<Index>(i)) = v.row(alive[i]);
    const Matrix gram_inv = (v_s.transpose() * v_s).ldlt().solve(Matrix::Identity(p, p));
    Vector weights(static_cast<Index>(alive.size()));
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const double lev = v_s.row(static_cast<Index>(i)) * gram_inv *
                         v_s.row(static_cast<Index>(i)).transpose();
      weights(static_cast<Index>(i)) = std::max(0.0, 1.0 - lev);
    }
    std::discrete_distribution<Index> pick(weights.data(), weights.data() + weights.size());
    const Index victim = pick(rng);
    alive.erase(alive.begin() + victim);
  }
  return Subset(std::move(alive));
}

Subset sample_volume_bernoulli(const Matrix& v, double t, Rng& rng) {
  if (t <= 0.0) throw InvalidArgument("sample_volume_bernoulli: t must be positive");
  const Subset core = volume_sample(v, v.cols(), rng);
  const double q = t / (1.0 + t);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Index> idx = core.indices();
  for (Index i = 0; i < v.rows(); ++i) {
    if (!core.contains(i) && unif(rng) < q) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end());
  return Subset(std::move(idx));
}

Subset sample_uniform(Index n, Index k, Rng& rng) {
  if (k < 0 || k > n) throw InfeasibleSize("sample_uniform: k must satisfy 0 <= k <= n");
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<Index> idx(pool.begin(), pool.begin() + k);
  std::sort(idx.begin(), idx.end());
  return Subset(std::move(idx));
}

}  // namespace detreg
