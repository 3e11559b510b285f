#include "detreg/regression.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <string>

namespace detreg {

namespace {

void check_fit_inputs(const NonNegativePair& nnp, const Vector& y, double gamma) {
  if (y.size() != nnp.n()) throw DimensionMismatch("fit: y length must equal n");
  if (!(gamma > 0.0)) throw InvalidArgument("fit: gamma must be positive");
}

/// Least-squares coefficients of V against a residual, via QR.
Vector basis_coefficients(const Matrix& v, const Vector& residual) {
  return v.householderQr().solve(residual);
}

/// K restricted to the subset columns, n x |C|.
Matrix kernel_slab(const Matrix& k, const Subset& c) {
  Matrix slab(k.rows(), c.size());
  for (Index j = 0; j < c.size(); ++j) {
    slab.col(j) = k.col(c.indices()[static_cast<std::size_t>(j)]);
  }
  return slab;
}

/// Conjugate gradient for an SPD system, optionally preconditioned with
/// M^-1 = h h^T. Relative residual 1e-10 or 10 * dim iterations.
Vector conjugate_gradient(const Matrix& a, const Vector& b, const Matrix* h) {
  const Index dim = a.rows();
  const double bnorm = b.norm();
  Vector x = Vector::Zero(dim);
  if (!(bnorm > 0.0)) return x;
  const double tol = 1e-10;
  const Index max_iter = 10 * std::max<Index>(dim, 1);

  auto apply_precond = [&](const Vector& r) -> Vector {
    if (h == nullptr) return r;
    return (*h) * (h->transpose() * r);
  };

  Vector r = b;
  Vector z = apply_precond(r);
  Vector d = z;
  double rz = r.dot(z);
  for (Index it = 0; it < max_iter; ++it) {
    if (r.norm() <= tol * bnorm) return x;
    const Vector ad = a * d;
    const double dad = d.dot(ad);
    if (!(dad > 0.0)) {
      throw SingularSystem("conjugate_gradient: operator not positive definite");
    }
    const double step = rz / dad;
    x += step * d;
    r -= step * ad;
    z = apply_precond(r);
    const double rz_next = r.dot(z);
    d = z + (rz_next / rz) * d;
    rz = rz_next;
  }
  const double residual = r.norm() / bnorm;
  if (residual > tol) {
    throw NoConvergence("conjugate_gradient: no convergence after " +
                            std::to_string(max_iter) + " iterations, relative residual " +
                            std::to_string(residual),
                        residual);
  }
  return x;
}

Preconditioner preconditioner_from_weights(const NonNegativePair& nnp, const Subset& c,
                                           double gamma, Vector marginal_probs,
                                           Vector d_diag) {
  const Index p = nnp.p();
  if (c.size() <= p) {
    throw InfeasibleSize("build_preconditioner: subset must have more than p elements");
  }
  const Matrix v_c = rows_of(nnp.basis(), c);
  const OrthonormalBasis b_c = orthonormal_complement_basis(v_c);
  const Matrix kt_cc = submatrix(nnp.projected_kernel(), c);
  const double n_gamma = static_cast<double>(nnp.n()) * gamma;

  const Matrix kt_b = kt_cc * b_c.matrix();
  Matrix target = kt_b.transpose() * d_diag.asDiagonal() * kt_b +
                  n_gamma * (b_c.matrix().transpose() * kt_b);
  target = 0.5 * (target + target.transpose());

  Eigen::LLT<Matrix> llt_target(target);
  if (llt_target.info() != Eigen::Success) {
    throw SingularSystem("build_preconditioner: Cholesky target not positive definite");
  }
  const Matrix target_inv =
      llt_target.solve(Matrix::Identity(target.rows(), target.cols()));
  Eigen::LLT<Matrix> llt_inv(0.5 * (target_inv + target_inv.transpose()));
  if (llt_inv.info() != Eigen::Success) {
    throw SingularSystem("build_preconditioner: inverse target not positive definite");
  }
  return Preconditioner{std::move(marginal_probs), std::move(d_diag),
                        Matrix(llt_inv.matrixL())};
}

}  // namespace

FitCoefficients fit_full_coefficients(const NonNegativePair& nnp, const Vector& y,
                                      double gamma, FullSolvePath path) {
  check_fit_inputs(nnp, y, gamma);
  const Index n = nnp.n();
  const double n_gamma = static_cast<double>(n) * gamma;

  if (path == FullSolvePath::saddle) {
    const Matrix a = nnp.kernel() + n_gamma * Matrix::Identity(n, n);
    FitCoefficients out;
    solve_saddle(a, nnp.basis(), y, Vector::Zero(nnp.p()), out.alpha, out.beta);
    return out;
  }

  // alpha = Q (Q^T K Q + n*gamma I)^-1 Q^T y on the complement subspace.
  const Matrix& q = nnp.complement_basis();
  Matrix reduced = q.transpose() * nnp.kernel() * q;
  reduced = 0.5 * (reduced + reduced.transpose());
  reduced.diagonal().array() += n_gamma;
  Eigen::LDLT<Matrix> ldlt(reduced);
  if (ldlt.info() != Eigen::Success) {
    throw SingularSystem("fit_full_coefficients: reduced system not solvable");
  }
  FitCoefficients out;
  out.alpha = q * ldlt.solve(q.transpose() * y);
  out.beta = basis_coefficients(nnp.basis(), y - nnp.kernel() * out.alpha);
  return out;
}

Vector in_sample_estimate(const NonNegativePair& nnp, const Vector& y, double gamma) {
  check_fit_inputs(nnp, y, gamma);
  const Matrix& q = nnp.complement_basis();
  const Matrix& q_v = nnp.range_basis();
  const double n_gamma = static_cast<double>(nnp.n()) * gamma;
  Matrix reduced = q.transpose() * nnp.kernel() * q;
  reduced = 0.5 * (reduced + reduced.transpose());
  Matrix shifted = reduced;
  shifted.diagonal().array() += n_gamma;
  const Vector u = q.transpose() * y;
  return q_v * (q_v.transpose() * y) + q * (reduced * shifted.ldlt().solve(u));
}

Matrix full_estimator_matrix(const NonNegativePair& nnp, double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("full_estimator_matrix: gamma must be positive");
  const Matrix& q = nnp.complement_basis();
  const Matrix& q_v = nnp.range_basis();
  const double n_gamma = static_cast<double>(nnp.n()) * gamma;
  Matrix reduced = q.transpose() * nnp.kernel() * q;
  reduced = 0.5 * (reduced + reduced.transpose());
  Matrix shifted = reduced;
  shifted.diagonal().array() += n_gamma;
  const Matrix contraction = shifted.ldlt().solve(reduced);
  Matrix out = q_v * q_v.transpose() + q * contraction * q.transpose();
  return 0.5 * (out + out.transpose());
}

FitCoefficients subset_interpolator_coefficients(const NonNegativePair& nnp,
                                                 const Vector& y, const Subset& c) {
  if (y.size() != nnp.n()) throw DimensionMismatch("fit: y length must equal n");
  if (c.size() < nnp.p()) {
    throw InfeasibleSize("subset_interpolator: |C| must be at least p");
  }
  const Matrix k_cc = submatrix(nnp.kernel(), c);
  const Matrix v_c = rows_of(nnp.basis(), c);
  FitCoefficients out;
  try {
    solve_saddle(k_cc, v_c, gather(y, c), Vector::Zero(nnp.p()), out.alpha, out.beta);
  } catch (const SingularSystem&) {
    throw SingularSystem(
        "subset_interpolator: subset saddle system singular (possible under uniform sampling)");
  }
  return out;
}

Matrix nystrom_normal_matrix(const NonNegativePair& nnp, const Subset& c, double gamma) {
  if (c.size() <= nnp.p()) {
    throw InfeasibleSize("nystrom_normal_matrix: subset must have more than p elements");
  }
  const Matrix v_c = rows_of(nnp.basis(), c);
  const OrthonormalBasis b_c = orthonormal_complement_basis(v_c);
  const Matrix slab = kernel_slab(nnp.kernel(), c);            // n x k
  const Matrix slab_b = slab * b_c.matrix();                   // n x (k-p)
  const Matrix& q_v = nnp.range_basis();
  const Matrix proj = slab_b - q_v * (q_v.transpose() * slab_b);  // P_perp K_C^T B
  const Matrix xi = b_c.matrix().transpose() * submatrix(nnp.kernel(), c) * b_c.matrix();
  const double n_gamma = static_cast<double>(nnp.n()) * gamma;
  Matrix a = proj.transpose() * proj + n_gamma * xi;
  return 0.5 * (a + a.transpose());
}

Preconditioner build_preconditioner(const EnsembleModel& model, const Subset& c,
                                    double gamma) {
  Vector marginals = model.marginal_kernel().diagonal();
  Vector d_diag(c.size());
  for (Index i = 0; i < c.size(); ++i) {
    const double l = marginals(c.indices()[static_cast<std::size_t>(i)]);
    if (!(l > 0.0)) {
      throw InvalidArgument("build_preconditioner: marginal probability not positive");
    }
    d_diag(i) = 1.0 / l;
  }
  return preconditioner_from_weights(model.nnp(), c, gamma, std::move(marginals),
                                     std::move(d_diag));
}

Preconditioner build_uniform_preconditioner(const NonNegativePair& nnp, const Subset& c,
                                            double gamma) {
  const double w = static_cast<double>(nnp.n()) / static_cast<double>(c.size());
  return preconditioner_from_weights(nnp, c, gamma, Vector::Ones(nnp.n()),
                                     Vector::Constant(c.size(), w));
}

FitCoefficients nystrom_coefficients(const NonNegativePair& nnp, const Vector& y,
                                     double gamma, const Subset& c, NystromSolver solver,
                                     const Preconditioner* precond) {
  check_fit_inputs(nnp, y, gamma);
  if (c.size() <= nnp.p()) {
    throw InfeasibleSize("fit_nystrom: subset must have more than p elements");
  }
  const Matrix v_c = rows_of(nnp.basis(), c);
  if (!is_full_column_rank(v_c)) {
    throw RankDeficient("fit_nystrom: V_C is rank deficient");
  }
  const OrthonormalBasis b_c = orthonormal_complement_basis(v_c);
  const Matrix slab = kernel_slab(nnp.kernel(), c);  // n x k, equals K_C^T
  const Matrix slab_b = slab * b_c.matrix();
  const Matrix& q_v = nnp.range_basis();
  const Matrix proj = slab_b - q_v * (q_v.transpose() * slab_b);
  const Matrix xi = b_c.matrix().transpose() * submatrix(nnp.kernel(), c) * b_c.matrix();
  const double n_gamma = static_cast<double>(nnp.n()) * gamma;
  Matrix a = proj.transpose() * proj + n_gamma * xi;
  a = 0.5 * (a + a.transpose());
  const Vector rhs = proj.transpose() * y;

  Vector w;
  if (solver == NystromSolver::direct) {
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() != Eigen::Success) {
      throw SingularSystem("fit_nystrom: reduced system singular");
    }
    w = ldlt.solve(rhs);
  } else {
    w = conjugate_gradient(a, rhs, precond != nullptr ? &precond->h : nullptr);
  }

  FitCoefficients out;
  out.alpha = b_c.matrix() * w;  // V_C^T alpha = 0 by construction
  out.beta = basis_coefficients(nnp.basis(), y - slab * out.alpha);
  return out;
}

Matrix nystrom_estimator_matrix(const NonNegativePair& nnp, const Subset& c,
                                double gamma) {
  if (!(gamma > 0.0)) {
    throw InvalidArgument("nystrom_estimator_matrix: gamma must be positive");
  }
  const Index n = nnp.n();
  const Matrix& q_v = nnp.range_basis();
  const Matrix p_v = q_v * q_v.transpose();
  Matrix low_rank;
  if (c.size() == nnp.p()) {
    low_rank = Matrix::Zero(n, n);  // empty complement basis
  } else {
    low_rank = projected_nystrom(nnp, c).materialize();
  }
  const double n_gamma = static_cast<double>(n) * gamma;
  Matrix shifted = low_rank;
  shifted.diagonal().array() += n_gamma;
  const Matrix contraction = shifted.ldlt().solve(low_rank);
  Matrix out = p_v + contraction * (Matrix::Identity(n, n) - p_v);
  return 0.5 * (out + out.transpose());
}

RegressionProblem make_problem(Matrix x, Vector y, KernelSpec kernel, BasisSpec basis,
                               std::optional<double> psd_tol) {
  if (y.size() != x.rows()) throw DimensionMismatch("make_problem: |y| must equal rows(X)");
  Matrix k = kernel_matrix(kernel, x);
  Matrix v = polynomial_basis_matrix(x, basis);
  NonNegativePair nnp = make_nnp(std::move(k), std::move(v), psd_tol);
  return RegressionProblem{std::move(x), std::move(y), std::move(kernel),
                           std::move(basis), std::move(nnp)};
}

SemiParamFit fit_full(const RegressionProblem& problem, double gamma, FullSolvePath path) {
  FitCoefficients coef = fit_full_coefficients(problem.nnp, problem.y, gamma, path);
  return SemiParamFit{FitMode::full,
                      std::move(coef.alpha),
                      std::move(coef.beta),
                      Subset::full(problem.nnp.n()),
                      problem.kernel,
                      problem.basis,
                      problem.x,
                      gamma};
}

SemiParamFit fit_subset_interpolator(const RegressionProblem& problem, const Subset& c) {
  FitCoefficients coef = subset_interpolator_coefficients(problem.nnp, problem.y, c);
  return SemiParamFit{FitMode::interpolation_subset,
                      std::move(coef.alpha),
                      std::move(coef.beta),
                      c,
                      problem.kernel,
                      problem.basis,
                      problem.x,
                      0.0};
}

SemiParamFit fit_nystrom(const RegressionProblem& problem, double gamma, const Subset& c,
                         NystromSolver solver, const Preconditioner* precond) {
  FitCoefficients coef = nystrom_coefficients(problem.nnp, problem.y, gamma, c, solver, precond);
  return SemiParamFit{FitMode::nystrom,
                      std::move(coef.alpha),
                      std::move(coef.beta),
                      c,
                      problem.kernel,
                      problem.basis,
                      problem.x,
                      gamma};
}

Vector predict(const SemiParamFit& fit, const Matrix& x_new) {
  if (x_new.cols() != fit.training_points.cols()) {
    throw DimensionMismatch("predict: point dimension does not match training data");
  }
  const Matrix landmarks = rows_of(fit.training_points, fit.landmarks);
  Vector out = Vector::Zero(x_new.rows());
  if (fit.alpha.size() > 0 && landmarks.rows() > 0) {
    const Matrix k_new = kernel_cross_matrix(fit.kernel, x_new, landmarks);
    out += k_new * fit.alpha;
  }
  for (Index i = 0; i < x_new.rows(); ++i) {
    out(i) += basis_eval(fit.basis, x_new.row(i)).dot(fit.beta);
  }
  return out;
}

}  // namespace detreg
