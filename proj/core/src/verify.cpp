#include "detreg/verify.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <functional>

namespace detreg {

namespace {

/// Applies fn to every support subset with its probability.
void for_each_support(const EnsembleModel& model, const PmfTable& table,
                      const std::function<void(const Subset&, double)>& fn) {
  const Index n = model.n();
  for (std::uint64_t mask = 0; mask < table.probabilities().size(); ++mask) {
    const double prob = table.probability(mask);
    if (prob > 0.0) fn(Subset::from_mask(mask, n), prob);
  }
}

void require_enumerable(const NonNegativePair& nnp, Index limit, const char* who) {
  if (nnp.n() > limit) {
    throw TooLarge(std::string(who) + ": n = " + std::to_string(nnp.n()) +
                   " too large for enumeration (limit " + std::to_string(limit) + ")");
  }
}

/// I(C) = C B(C) (B(C)^T K_CC B(C))^-1 B(C)^T C^T embedded in n x n,
/// zero when |C| = p.
Matrix projected_pinv_embedding(const NonNegativePair& nnp, const Subset& c) {
  const Index n = nnp.n();
  if (c.size() == nnp.p()) return Matrix::Zero(n, n);
  const Matrix v_c = rows_of(nnp.basis(), c);
  const OrthonormalBasis b_c = orthonormal_complement_basis(v_c);
  const Matrix xi = b_c.matrix().transpose() * submatrix(nnp.kernel(), c) * b_c.matrix();
  const Matrix block = b_c.matrix() * xi.inverse() * b_c.matrix().transpose();
  return scatter(block, c, n);
}

/// (C V_C)^+ = V_C^+ C^T as a p x n matrix.
Matrix padded_basis_pinv(const Matrix& v, const Subset& c, Index n) {
  const Matrix v_c = rows_of(v, c);
  const Matrix v_c_pinv = pinv(v_c);
  Matrix out = Matrix::Zero(v.cols(), n);
  for (Index j = 0; j < c.size(); ++j) {
    out.col(c.indices()[static_cast<std::size_t>(j)]) = v_c_pinv.col(j);
  }
  return out;
}

IdentityReport report_from_deviation(IdentityId id, CheckMethod method, double dev,
                                     std::size_t count, double tol) {
  return IdentityReport{id, method, dev, count, dev <= tol, tol};
}

/// Accumulates a Monte-Carlo mean and element-wise variance of a matrix
/// statistic, then scores deviations in units of 4 standard errors.
class MonteCarloMatrix {
 public:
  explicit MonteCarloMatrix(Index rows, Index cols)
      : mean_(Matrix::Zero(rows, cols)), m2_(Matrix::Zero(rows, cols)) {}

  void add(const Matrix& sample) {
    ++count_;
    const Matrix delta = sample - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(sample - mean_);
  }

  std::size_t count() const { return count_; }

  double banded_deviation(const Matrix& target) const {
    const double scale = std::max(1.0, target.cwiseAbs().maxCoeff());
    double worst = 0.0;
    for (Index i = 0; i < mean_.rows(); ++i) {
      for (Index j = 0; j < mean_.cols(); ++j) {
        const double se =
            std::sqrt(m2_(i, j) / static_cast<double>(count_) / static_cast<double>(count_));
        const double band = 4.0 * se + 1e-12 * scale;
        worst = std::max(worst, std::abs(mean_(i, j) - target(i, j)) / band);
      }
    }
    return worst;
  }

 private:
  Matrix mean_;
  Matrix m2_;
  std::size_t count_ = 0;
};

Matrix thm31_full_inverse(const NonNegativePair& nnp) {
  const Index n = nnp.n();
  const Matrix a = nnp.kernel() + Matrix::Identity(n, n);
  const Matrix s = assemble_saddle(a, nnp.basis());
  return s.partialPivLu().inverse();
}

double thm31_subset_quadratic(const NonNegativePair& nnp, const Subset& c,
                              const Vector& u0, const Vector& u1, const Vector& v0,
                              const Vector& v1) {
  const Matrix k_cc = submatrix(nnp.kernel(), c);
  const Matrix v_c = rows_of(nnp.basis(), c);
  const Matrix s = assemble_saddle(k_cc, v_c);
  Vector rhs(c.size() + nnp.p());
  rhs << gather(v0, c), v1;
  Vector lhs(c.size() + nnp.p());
  lhs << gather(u0, c), u1;
  return lhs.dot(s.partialPivLu().solve(rhs));
}

}  // namespace

std::string to_string(IdentityId id) {
  switch (id) {
    case IdentityId::thm31: return "thm31";
    case IdentityId::prop51_id0: return "prop51_id0";
    case IdentityId::prop51_id1: return "prop51_id1";
    case IdentityId::prop51_id2: return "prop51_id2";
    case IdentityId::cor56: return "cor56";
    case IdentityId::cor57: return "cor57";
    case IdentityId::cor42: return "cor42";
    case IdentityId::eq12_lensemble: return "eq12_lensemble";
    case IdentityId::eq57_proj: return "eq57_proj";
    case IdentityId::eq58_unbiased: return "eq58_unbiased";
    case IdentityId::eq58_second_moment: return "eq58_second_moment";
    case IdentityId::eq510_variance: return "eq510_variance";
    case IdentityId::thm59_bound: return "thm59_bound";
  }
  return "unknown";
}

IdentityReport check_thm31(const NonNegativePair& nnp, const Vector& u0,
                           const Vector& u1, const Vector& v0, const Vector& v1,
                           CheckMethod method, std::uint64_t seed) {
  const Index n = nnp.n();
  const Index p = nnp.p();
  if (u0.size() != n || v0.size() != n || u1.size() != p || v1.size() != p) {
    throw DimensionMismatch("check_thm31: probe vector sizes must be (n, p)");
  }
  Vector probe(n + p);
  probe << u0, u1;
  Vector probe_rhs(n + p);
  probe_rhs << v0, v1;
  const double target = probe.dot(thm31_full_inverse(nnp) * probe_rhs);

  const EnsembleModel model = build_ensemble(nnp, 1.0);
  if (method == CheckMethod::enumeration) {
    require_enumerable(nnp, 10, "check_thm31");
    const PmfTable table = enumerate_distribution(model);
    double acc = 0.0;
    std::size_t support = 0;
    for_each_support(model, table, [&](const Subset& c, double prob) {
      acc += prob * thm31_subset_quadratic(nnp, c, u0, u1, v0, v1);
      ++support;
    });
    return report_from_deviation(IdentityId::thm31, method, std::abs(acc - target),
                                 support, kEnumTol);
  }

  Rng rng(seed);
  MonteCarloMatrix mc(1, 1);
  Matrix sample_value(1, 1);
  for (std::size_t i = 0; i < kMonteCarloDraws; ++i) {
    const Subset c = sample(model, rng);
    sample_value(0, 0) = thm31_subset_quadratic(nnp, c, u0, u1, v0, v1);
    mc.add(sample_value);
  }
  Matrix target_m(1, 1);
  target_m(0, 0) = target;
  return report_from_deviation(IdentityId::thm31, method, mc.banded_deviation(target_m),
                               kMonteCarloDraws, 1.0);
}

std::array<IdentityReport, 3> check_prop51(const NonNegativePair& nnp, double lambda,
                                           CheckMethod method, std::uint64_t seed) {
  const Index n = nnp.n();
  const Matrix& k = nnp.kernel();
  const Matrix id_n = Matrix::Identity(n, n);

  // Closed forms: (K~ + lambda P_perp)^+ and its two companions.
  const Matrix& q = nnp.complement_basis();
  Matrix reduced = q.transpose() * k * q;
  reduced = 0.5 * (reduced + reduced.transpose());
  Matrix shifted = reduced;
  shifted.diagonal().array() += lambda;
  const Matrix reg_pinv = q * shifted.ldlt().solve(Matrix(q.transpose()));
  const Matrix v_pinv = pinv(nnp.basis());
  const Matrix target0 = reg_pinv;
  const Matrix target1 = v_pinv * (id_n - k * reg_pinv);
  const Matrix target2 =
      v_pinv * (k + lambda * id_n - k * reg_pinv * k) * v_pinv.transpose();

  const EnsembleModel model = build_ensemble(nnp, lambda);

  if (method == CheckMethod::enumeration) {
    require_enumerable(nnp, 8, "check_prop51");
    const PmfTable table = enumerate_distribution(model);
    Matrix acc0 = Matrix::Zero(n, n);
    Matrix acc1 = Matrix::Zero(nnp.p(), n);
    Matrix acc2 = Matrix::Zero(nnp.p(), nnp.p());
    std::size_t support = 0;
    for_each_support(model, table, [&](const Subset& c, double prob) {
      const Matrix ic = projected_pinv_embedding(nnp, c);
      const Matrix cv_pinv = padded_basis_pinv(nnp.basis(), c, n);
      acc0 += prob * ic;
      acc1 += prob * cv_pinv * (id_n - k * ic);
      acc2 += prob * cv_pinv * (k - k * ic * k) * cv_pinv.transpose();
      ++support;
    });
    return {report_from_deviation(IdentityId::prop51_id0, method,
                                  (acc0 - target0).cwiseAbs().maxCoeff(), support, kEnumTol),
            report_from_deviation(IdentityId::prop51_id1, method,
                                  (acc1 - target1).cwiseAbs().maxCoeff(), support, kEnumTol),
            report_from_deviation(IdentityId::prop51_id2, method,
                                  (acc2 - target2).cwiseAbs().maxCoeff(), support, kEnumTol)};
  }

  Rng rng(seed);
  MonteCarloMatrix mc0(n, n);
  MonteCarloMatrix mc1(nnp.p(), n);
  MonteCarloMatrix mc2(nnp.p(), nnp.p());
  for (std::size_t i = 0; i < kMonteCarloDraws; ++i) {
    const Subset c = sample(model, rng);
    const Matrix ic = projected_pinv_embedding(nnp, c);
    const Matrix cv_pinv = padded_basis_pinv(nnp.basis(), c, n);
    mc0.add(ic);
    mc1.add(cv_pinv * (id_n - k * ic));
    mc2.add(cv_pinv * (k - k * ic * k) * cv_pinv.transpose());
  }
  return {report_from_deviation(IdentityId::prop51_id0, method, mc0.banded_deviation(target0),
                                kMonteCarloDraws, 1.0),
          report_from_deviation(IdentityId::prop51_id1, method, mc1.banded_deviation(target1),
                                kMonteCarloDraws, 1.0),
          report_from_deviation(IdentityId::prop51_id2, method, mc2.banded_deviation(target2),
                                kMonteCarloDraws, 1.0)};
}

std::array<IdentityReport, 4> check_cor56_cor57(const NonNegativePair& nnp, double lambda) {
  require_enumerable(nnp, 8, "check_cor56_cor57");
  const Index n = nnp.n();
  const Matrix& k = nnp.kernel();
  const Matrix& kt = nnp.projected_kernel();
  const Matrix id_n = Matrix::Identity(n, n);

  const EnsembleModel model = build_ensemble(nnp, lambda);
  const PmfTable table = enumerate_distribution(model);

  // Closed forms.
  const Matrix& q = nnp.complement_basis();
  Matrix reduced = q.transpose() * k * q;
  reduced = 0.5 * (reduced + reduced.transpose());
  Matrix shifted = reduced;
  shifted.diagonal().array() += lambda;
  const Matrix reg_pinv = q * shifted.ldlt().solve(Matrix(q.transpose()));
  const Matrix target_nys = lambda * (q * shifted.ldlt().solve(reduced) * q.transpose());
  const Matrix target_err = k - k * reg_pinv * k;  // E[K - L(C)]
  const Matrix v_pinv = pinv(nnp.basis());
  const Matrix target_mixed = v_pinv * target_err;
  const Matrix target_quad =
      lambda * v_pinv * v_pinv.transpose() + v_pinv * target_err * v_pinv.transpose();

  Matrix acc_nys = Matrix::Zero(n, n);
  Matrix acc_err = Matrix::Zero(n, n);
  Matrix acc_mixed = Matrix::Zero(nnp.p(), n);
  Matrix acc_quad = Matrix::Zero(nnp.p(), nnp.p());
  double acc_size = 0.0;
  std::size_t support = 0;
  for_each_support(model, table, [&](const Subset& c, double prob) {
    const Matrix ic = projected_pinv_embedding(nnp, c);
    const Matrix low_rank = kt * ic * kt;       // projected Nystrom of K~
    const Matrix unprojected = k * ic * k;      // L(C)
    const Matrix cv_pinv = padded_basis_pinv(nnp.basis(), c, n);
    acc_nys += prob * (kt - low_rank);
    acc_err += prob * (k - unprojected);
    acc_mixed += prob * cv_pinv * (k - unprojected);
    acc_quad += prob * cv_pinv * (k - unprojected) * cv_pinv.transpose();
    acc_size += prob * static_cast<double>(c.size());
    ++support;
  });

  const double dev56 =
      std::max((acc_nys - target_nys).cwiseAbs().maxCoeff(),
               std::abs(acc_size - model.expected_size()));
  return {report_from_deviation(IdentityId::cor56, CheckMethod::enumeration, dev56,
                                support, kEnumTol),
          report_from_deviation(IdentityId::cor57, CheckMethod::enumeration,
                                (acc_err - target_err).cwiseAbs().maxCoeff(), support,
                                kEnumTol),
          report_from_deviation(IdentityId::cor57, CheckMethod::enumeration,
                                (acc_mixed - target_mixed).cwiseAbs().maxCoeff(), support,
                                kEnumTol),
          report_from_deviation(IdentityId::cor57, CheckMethod::enumeration,
                                (acc_quad - target_quad).cwiseAbs().maxCoeff(), support,
                                kEnumTol)};
}

std::array<IdentityReport, 4> check_random_design(const Matrix& v, double t) {
  const Index n = v.rows();
  const Index p = v.cols();
  if (n > 10) throw TooLarge("check_random_design: n too large for enumeration");
  if (!(t > 0.0)) throw InvalidArgument("check_random_design: t must be positive");

  NonNegativePair nnp = make_nnp(t * Matrix::Identity(n, n), v);
  const EnsembleModel model = build_ensemble(std::move(nnp), 1.0);
  const PmfTable table = enumerate_distribution(model);

  const Matrix v_pinv = pinv(v);
  const Matrix target_proj = v * v_pinv;           // V V^+
  const Matrix target_first = v_pinv;              // E (C V_C)^+
  const Matrix gram_inv = (v.transpose() * v).ldlt().solve(Matrix::Identity(p, p));
  const double expected_size = model.expected_size();
  const double moment_factor =
      static_cast<double>(n - p) / (expected_size - static_cast<double>(p));
  const Matrix target_second = moment_factor * gram_inv;
  const double var_factor =
      (static_cast<double>(n) - expected_size) / (expected_size - static_cast<double>(p));
  const Matrix target_var = var_factor * gram_inv;

  Matrix acc_proj = Matrix::Zero(n, n);
  Matrix acc_first = Matrix::Zero(p, n);
  Matrix acc_second = Matrix::Zero(p, p);
  std::size_t support = 0;
  for_each_support(model, table, [&](const Subset& c, double prob) {
    const Matrix v_c = rows_of(v, c);
    const Matrix cv_pinv = padded_basis_pinv(v, c, n);
    acc_proj += prob * scatter(projector(v_c), c, n);
    acc_first += prob * cv_pinv;
    acc_second += prob * cv_pinv * cv_pinv.transpose();
    ++support;
  });
  const Matrix acc_var = acc_second - acc_first * acc_first.transpose();

  return {report_from_deviation(IdentityId::eq57_proj, CheckMethod::enumeration,
                                (acc_proj - target_proj).cwiseAbs().maxCoeff(), support,
                                kEnumTol),
          report_from_deviation(IdentityId::eq58_unbiased, CheckMethod::enumeration,
                                (acc_first - target_first).cwiseAbs().maxCoeff(), support,
                                kEnumTol),
          report_from_deviation(IdentityId::eq58_second_moment, CheckMethod::enumeration,
                                (acc_second - target_second).cwiseAbs().maxCoeff(), support,
                                kEnumTol),
          report_from_deviation(IdentityId::eq510_variance, CheckMethod::enumeration,
                                (acc_var - target_var).cwiseAbs().maxCoeff(), support,
                                kEnumTol)};
}

IdentityReport check_cor42(const RegressionProblem& problem, double gamma,
                           const Matrix& probes) {
  require_enumerable(problem.nnp, 8, "check_cor42");
  if (!(gamma > 0.0)) throw InvalidArgument("check_cor42: gamma must be positive");

  const double n_gamma = static_cast<double>(problem.nnp.n()) * gamma;
  const EnsembleModel model = build_ensemble(problem.nnp, n_gamma);
  const PmfTable table = enumerate_distribution(model);

  const SemiParamFit full = fit_full(problem, gamma);
  const Vector target = predict(full, probes);

  Vector acc = Vector::Zero(probes.rows());
  std::size_t support = 0;
  for_each_support(model, table, [&](const Subset& c, double prob) {
    const SemiParamFit interp = fit_subset_interpolator(problem, c);
    acc += prob * predict(interp, probes);
    ++support;
  });
  const double dev = (acc - target).cwiseAbs().maxCoeff();
  return report_from_deviation(IdentityId::cor42, CheckMethod::enumeration, dev, support,
                               kEnumTol);
}

IdentityReport check_risk_bound(const NonNegativePair& nnp, const Vector& z_true,
                                double sigma_sq, double gamma, double lambda) {
  require_enumerable(nnp, 8, "check_risk_bound");
  if (z_true.size() != nnp.n()) {
    throw DimensionMismatch("check_risk_bound: z_true length must equal n");
  }
  const Index n = nnp.n();
  const Matrix p_full = full_estimator_matrix(nnp, gamma);
  const auto risk = [&](const Matrix& estimator) {
    const Vector bias = estimator * z_true - z_true;
    return bias.squaredNorm() + sigma_sq * estimator.squaredNorm();
  };
  const double full_risk = risk(p_full);
  if (!(full_risk > 0.0)) {
    throw InvalidArgument("check_risk_bound: full-estimator risk is zero");
  }

  const EnsembleModel model = build_ensemble(nnp, lambda);
  const PmfTable table = enumerate_distribution(model);
  double acc = 0.0;
  std::size_t support = 0;
  for_each_support(model, table, [&](const Subset& c, double prob) {
    const Matrix p_nys = nystrom_estimator_matrix(nnp, c, gamma);
    acc += prob * std::sqrt(risk(p_nys) / full_risk);
    ++support;
  });

  const double bound = 1.0 + lambda / (static_cast<double>(n) * gamma) *
                                 model.effective_dimension();
  const double violation = std::max(0.0, acc - bound);
  return report_from_deviation(IdentityId::thm59_bound, CheckMethod::enumeration,
                               violation, support, kEnumTol);
}

IdentityReport check_eq12_lensemble(const Matrix& k_psd, double lambda) {
  const Index n = k_psd.rows();
  if (n > 12) throw TooLarge("check_eq12_lensemble: n too large for enumeration");
  if (!(lambda > 0.0)) throw InvalidArgument("check_eq12_lensemble: lambda must be positive");

  const Matrix l = k_psd / lambda;
  const double norm = (l + Matrix::Identity(n, n)).partialPivLu().determinant();
  const Matrix target =
      (k_psd + lambda * Matrix::Identity(n, n)).partialPivLu().inverse();

  Matrix acc = Matrix::Zero(n, n);
  double mass = 0.0;
  std::size_t support = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    const Subset c = Subset::from_mask(mask, n);
    double det = 1.0;
    if (!c.empty()) det = submatrix(l, c).partialPivLu().determinant();
    if (!(det > 0.0)) continue;
    const double prob = det / norm;
    mass += prob;
    if (!c.empty()) {
      acc += prob * scatter(submatrix(k_psd, c).partialPivLu().inverse(), c, n);
    }
    ++support;
  }
  const double dev = std::max((acc - target).cwiseAbs().maxCoeff(), std::abs(mass - 1.0));
  return report_from_deviation(IdentityId::eq12_lensemble, CheckMethod::enumeration, dev,
                               support, kEnumTol);
}

VerificationInstance make_verification_instance(std::uint64_t seed) {
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  std::uniform_int_distribution<int> size_pick(6, 8);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Index n = size_pick(rng);
  const int family = static_cast<int>(seed % 3);

  Matrix x;
  KernelSpec kernel;
  BasisSpec basis;
  if (family == 2) {
    // Thin-plate in the plane with a full degree-1 polynomial part (p = 3).
    x = Matrix(n, 2);
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = unif(rng);
      x(i, 1) = unif(rng);
    }
    kernel = KernelSpec::thin_plate(2);
    basis = BasisSpec::poly(1);
  } else {
    // Gaussian on the line with p = 1 or p = 2.
    x = Matrix(n, 1);
    for (Index i = 0; i < n; ++i) x(i, 0) = 2.0 * unif(rng);
    kernel = KernelSpec::gaussian(1.0 + 0.5 * (unif(rng) + 1.0));
    basis = (family == 0) ? BasisSpec::constant() : BasisSpec::constant_linear();
  }

  Vector y(n);
  for (Index i = 0; i < n; ++i) y(i) = gauss(rng);
  RegressionProblem problem =
      make_problem(std::move(x), std::move(y), kernel, basis, 1e-7);

  VerificationInstance inst{std::move(problem), 0.0, 0.0, 0.0, Vector()};
  inst.lambda = 0.5 + 0.25 * (unif(rng) + 1.0);
  inst.gamma = 0.05 + 0.05 * (unif(rng) + 1.0);
  inst.sigma_sq = 0.25;
  inst.z_true = Vector(n);
  for (Index i = 0; i < n; ++i) inst.z_true(i) = gauss(rng);
  return inst;
}

}  // namespace detreg
