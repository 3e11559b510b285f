#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "detreg/dpp.hpp"
#include "detreg/regression.hpp"

namespace detreg {

enum class IdentityId {
  thm31,
  prop51_id0,
  prop51_id1,
  prop51_id2,
  cor56,
  cor57,
  cor42,
  eq12_lensemble,
  eq57_proj,
  eq58_unbiased,
  eq58_second_moment,
  eq510_variance,
  thm59_bound,
};

enum class CheckMethod { enumeration, monte_carlo };

/// Outcome of one expectation-identity check.
///
/// For enumeration runs max_abs_deviation is the worst absolute entry
/// deviation against the closed form. For Monte-Carlo runs deviations are
/// measured in units of a 4-standard-error band (tolerance 1), and a failure
/// means "inconclusive" rather than a violated identity.
struct IdentityReport {
  IdentityId id;
  CheckMethod method;
  double max_abs_deviation = 0.0;
  std::size_t samples_or_subsets = 0;
  bool passed = false;
  double tolerance = 0.0;
};

std::string to_string(IdentityId id);

inline constexpr double kEnumTol = 1e-8;
inline constexpr std::size_t kMonteCarloDraws = 100000;

/// Quadratic-form identity of the regularized saddle inverse:
/// E_C [u_C; u1]^T [[K_CC, V_C], [V_C^T, 0]]^-1 [v_C; v1]
///   = [u0; u1]^T [[K + I, V], [V^T, 0]]^-1 [v0; v1], C ~ DPP(K, V).
IdentityReport check_thm31(const NonNegativePair& nnp, const Vector& u0,
                           const Vector& u1, const Vector& v0, const Vector& v1,
                           CheckMethod method = CheckMethod::enumeration,
                           std::uint64_t seed = 0);

/// The three expectation identities of the projected pseudo-inverse under
/// DPP(K/lambda, V): reports ordered id0, id1, id2.
std::array<IdentityReport, 3> check_prop51(const NonNegativePair& nnp, double lambda,
                                           CheckMethod method = CheckMethod::enumeration,
                                           std::uint64_t seed = 0);

/// Expected projected-Nystrom error plus the three unprojected error
/// identities; reports ordered cor56, then the three cor57 lines.
std::array<IdentityReport, 4> check_cor56_cor57(const NonNegativePair& nnp, double lambda);

/// Random-design identities under DPP(tI, V): expected projector, unbiased
/// pseudo-inverse, second moment with its (n-p)/(E|C|-p) factor, and variance.
std::array<IdentityReport, 4> check_random_design(const Matrix& v, double t);

/// Ensemble-of-interpolators identity: the DPP(K/(n*gamma), V) average of the
/// subset interpolators equals the gamma-regularized full fit at every probe.
IdentityReport check_cor42(const RegressionProblem& problem, double gamma,
                           const Matrix& probes);

/// Expected-risk stability: E_C sqrt(R_N / R) <= 1 + (lambda / (n gamma)) d_eff,
/// with risks in the closed Gaussian form bias^2 + sigma^2 ||estimator||_F^2.
IdentityReport check_risk_bound(const NonNegativePair& nnp, const Vector& z_true,
                                double sigma_sq, double gamma, double lambda);

/// Plain L-ensemble expected pseudo-inverse: E (C K_CC C^T)^+ = (K + lambda I)^-1
/// with C ~ DPP_L(K / lambda), by direct enumeration.
IdentityReport check_eq12_lensemble(const Matrix& k_psd, double lambda);

/// One instance of the seeded verification suite: a small kernel + basis
/// problem together with the dials every check needs.
struct VerificationInstance {
  RegressionProblem problem;
  double lambda;
  double gamma;
  double sigma_sq;
  Vector z_true;
};

/// Deterministic instance family mixing Gaussian and thin-plate kernels with
/// one to three basis columns; n stays within enumeration range.
VerificationInstance make_verification_instance(std::uint64_t seed);

}  // namespace detreg
