#pragma once

#include <optional>

#include "detreg/dpp.hpp"
#include "detreg/kernels.hpp"
#include "detreg/nystrom.hpp"

namespace detreg {

enum class FitMode { full, interpolation_subset, nystrom };

/// The two algebraically equivalent routes to the full fit: the dense
/// (n+p) saddle solve, or the closed forms on the complement subspace.
enum class FullSolvePath { saddle, reduced };

enum class NystromSolver { direct, pcg };

struct FitCoefficients {
  Vector alpha;  // length n for full fits, |C| for subset fits
  Vector beta;   // length p
};

/// Solves [[K + n*gamma*I, V], [V^T, 0]] [alpha; beta] = [y; 0].
FitCoefficients fit_full_coefficients(const NonNegativePair& nnp, const Vector& y,
                                      double gamma,
                                      FullSolvePath path = FullSolvePath::saddle);

/// Fitted values at the training points without forming coefficients.
Vector in_sample_estimate(const NonNegativePair& nnp, const Vector& y, double gamma);

/// P_V + K~ (K~ + n*gamma*I)^-1 P_{V-perp}; maps y to the in-sample estimate.
Matrix full_estimator_matrix(const NonNegativePair& nnp, double gamma);

/// Ridgeless interpolation restricted to the landmarks:
/// [[K_CC, V_C], [V_C^T, 0]] [alpha; beta] = [y_C; 0].
FitCoefficients subset_interpolator_coefficients(const NonNegativePair& nnp,
                                                 const Vector& y, const Subset& c);

/// The (k-p) x (k-p) positive definite system matrix of the sketched fit:
/// B^T K_C P_perp K_C^T B + n*gamma* B^T K_CC B.
Matrix nystrom_normal_matrix(const NonNegativePair& nnp, const Subset& c, double gamma);

/// Ridge-leverage preconditioner. h satisfies h h^T = (target system matrix
/// built from the projected kernel blocks and d_diag)^-1.
struct Preconditioner {
  Vector marginal_probs;  // length n; all ones for the uniform baseline
  Vector d_diag;          // length |C|
  Matrix h;               // lower triangular, (k-p) x (k-p)
};

Preconditioner build_preconditioner(const EnsembleModel& model, const Subset& c,
                                    double gamma);

/// Baseline with D = (n/|C|) I, independent of any sampling model.
Preconditioner build_uniform_preconditioner(const NonNegativePair& nnp,
                                            const Subset& c, double gamma);

/// Sketched ridge fit; alpha has length |C| and satisfies V_C^T alpha = 0.
FitCoefficients nystrom_coefficients(const NonNegativePair& nnp, const Vector& y,
                                     double gamma, const Subset& c,
                                     NystromSolver solver = NystromSolver::direct,
                                     const Preconditioner* precond = nullptr);

/// P_V + L~(C) (L~(C) + n*gamma*I)^-1 P_{V-perp} with L~(C) := 0 when |C| = p.
Matrix nystrom_estimator_matrix(const NonNegativePair& nnp, const Subset& c,
                                double gamma);

/// Data, descriptors and the validated pair needed to make predictions.
struct RegressionProblem {
  Matrix x;
  Vector y;
  KernelSpec kernel;
  BasisSpec basis;
  NonNegativePair nnp;
};

RegressionProblem make_problem(Matrix x, Vector y, KernelSpec kernel, BasisSpec basis,
                               std::optional<double> psd_tol = std::nullopt);

struct SemiParamFit {
  FitMode mode = FitMode::full;
  Vector alpha;            // matches landmarks
  Vector beta;
  Subset landmarks;
  KernelSpec kernel;
  BasisSpec basis;
  Matrix training_points;  // n x d
  double gamma = 0.0;
};

SemiParamFit fit_full(const RegressionProblem& problem, double gamma,
                      FullSolvePath path = FullSolvePath::saddle);
SemiParamFit fit_subset_interpolator(const RegressionProblem& problem, const Subset& c);
SemiParamFit fit_nystrom(const RegressionProblem& problem, double gamma, const Subset& c,
                         NystromSolver solver = NystromSolver::direct,
                         const Preconditioner* precond = nullptr);

/// f(x) = sum_i alpha_i k(x, x_i) + sum_m beta_m p_m(x) over the landmarks.
Vector predict(const SemiParamFit& fit, const Matrix& x_new);

}  // namespace detreg
