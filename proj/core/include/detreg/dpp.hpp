#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "detreg/kernels.hpp"
#include "detreg/linalg.hpp"

namespace detreg {

using Rng = std::mt19937_64;

/// A strictly increasing set of 0-based item indices.
class Subset {
 public:
  Subset() = default;
  explicit Subset(std::vector<Index> indices);

  static Subset full(Index n);
  static Subset from_mask(std::uint64_t mask, Index n);

  const std::vector<Index>& indices() const { return idx_; }
  Index size() const { return static_cast<Index>(idx_.size()); }
  bool empty() const { return idx_.empty(); }
  bool contains(Index i) const;
  std::uint64_t to_mask() const;

  bool operator==(const Subset& other) const { return idx_ == other.idx_; }

 private:
  std::vector<Index> idx_;
};

/// V_C: the rows of a indexed by c.
Matrix rows_of(const Matrix& a, const Subset& c);
/// A_CC: the principal submatrix of a indexed by c.
Matrix submatrix(const Matrix& a, const Subset& c);
Vector gather(const Vector& y, const Subset& c);
/// The n x k sampling matrix whose columns are canonical vectors e_{c_1..c_k}.
Matrix sampling_matrix(const Subset& c, Index n);
/// Scatter a k x k block to n x n: (C M C^T).
Matrix scatter(const Matrix& m, const Subset& c, Index n);

/// A partial-projection determinantal point process over n items,
/// represented spectrally: the column space of V enters every sample, and the
/// projected kernel divided by lambda controls the random remainder.
class EnsembleModel {
 public:
  EnsembleModel(NonNegativePair nnp, double lambda);

  const NonNegativePair& nnp() const { return nnp_; }
  double lambda() const { return lambda_; }
  Index n() const { return nnp_.n(); }
  Index p() const { return nnp_.p(); }

  /// Eigenvalues of projected_kernel / lambda on the complement subspace,
  /// ascending, clamped at zero. Length n - p.
  const Vector& kernel_eigenvalues() const { return eigvals_; }
  /// Matching eigenvectors in ambient coordinates, n x (n-p) orthonormal.
  const Matrix& kernel_eigenvectors() const { return eigvecs_; }
  /// Orthonormal basis of col(V), n x p; always-selected directions.
  const Matrix& projection_basis() const { return nnp_.range_basis(); }

  const Matrix& marginal_kernel() const { return marginal_; }
  double effective_dimension() const { return d_eff_; }
  double expected_size() const { return static_cast<double>(p()) + d_eff_; }
  /// log( det(I + L~) * det(V^T V) ), the pmf normalization without its sign.
  double log_normalization() const { return log_norm_; }

 private:
  NonNegativePair nnp_;
  double lambda_;
  Vector eigvals_;
  Matrix eigvecs_;
  Matrix marginal_;
  double d_eff_ = 0.0;
  double log_norm_ = 0.0;
};

EnsembleModel build_ensemble(NonNegativePair nnp, double lambda);

/// Exact probability of a subset; zero when |C| < p or V_C is rank deficient.
double pmf(const EnsembleModel& model, const Subset& c);

/// Probabilities of all 2^n subsets, indexed by bitmask.
class PmfTable {
 public:
  PmfTable(Index n, std::vector<double> probs);

  Index ground_size() const { return n_; }
  const std::vector<double>& probabilities() const { return probs_; }
  double probability(const Subset& c) const { return probs_[c.to_mask()]; }
  double probability(std::uint64_t mask) const { return probs_[mask]; }

  double total_mass() const;
  double expected_size() const;
  double inclusion_probability(Index i) const;

 private:
  Index n_;
  std::vector<double> probs_;
};

PmfTable enumerate_distribution(const EnsembleModel& model, Index max_n = 14);

/// Random-size draw via the spectral cascade; |C| >= p always.
Subset sample(const EnsembleModel& model, Rng& rng);

/// Draw conditioned on |C| = k. Kernel directions are chosen with
/// probabilities proportional to elementary symmetric polynomials of the
/// eigenvalues, evaluated in log space.
Subset sample_fixed_size(const EnsembleModel& model, Index k, Rng& rng);

/// Volume sampling: Pr(C) proportional to det(V_C^T V_C) over |C| = k.
Subset volume_sample(const Matrix& v, Index k, Rng& rng);

/// Two-stage draw of DPP(tI, V): a size-p volume sample unioned with an
/// independent Bernoulli(t/(1+t)) selection of the remaining items.
Subset sample_volume_bernoulli(const Matrix& v, double t, Rng& rng);

/// Uniformly random subset of size k (baseline sampler).
Subset sample_uniform(Index n, Index k, Rng& rng);

}  // namespace detreg
