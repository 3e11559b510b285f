#include <doctest.h>

#include <cmath>

#include "detreg/verify.hpp"
#include "testutil.hpp"

using namespace detreg;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

Vector zeros(Index n) { return Vector::Zero(n); }

}  // namespace

TEST_CASE("quadratic-form identity: hand case with top-block probes") {
  const NonNegativePair nnp = make_nnp(Matrix::Identity(2, 2), Matrix::Ones(2, 1));
  Vector e1 = zeros(2);
  e1(0) = 1.0;
  const IdentityReport report = check_thm31(nnp, e1, zeros(1), e1, zeros(1));
  CHECK(report.passed);
  CHECK(report.max_abs_deviation < 1e-10);
}

TEST_CASE("quadratic-form identity holds whenever one bottom probe vanishes") {
  Rng rng(81);
  for (int trial = 0; trial < 6; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 3);
    const Index p = 1 + static_cast<Index>(rng() % 3);
    const NonNegativePair nnp = testutil::random_nnp(n, p, rng);
    const Vector u0 = testutil::random_vector(n, rng);
    const Vector v0 = testutil::random_vector(n, rng);
    const Vector u1 = testutil::random_vector(p, rng);

    const IdentityReport left = check_thm31(nnp, u0, u1, v0, zeros(p));
    CHECK(left.passed);
    CHECK(left.max_abs_deviation < 1e-8);

    const IdentityReport right = check_thm31(nnp, u0, zeros(p), v0, u1);
    CHECK(right.passed);
    CHECK(right.max_abs_deviation < 1e-8);
  }
}

TEST_CASE("quadratic-form identity deviates by the rank-deficient boundary terms") {
  // For probes with both bottom blocks nonzero the enumerated average differs
  // from the regularized closed form. The gap is exactly the sum of the
  // determinant corrections carried by subsets of size p-1, which have zero
  // probability but survive the determinant-lemma expansion.
  Rng rng(82);
  for (int trial = 0; trial < 4; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 2);
    const Index p = 1 + static_cast<Index>(rng() % 2);
    const Matrix k = testutil::random_psd(n, rng);
    const Matrix v = testutil::random_full_rank(n, p, rng);
    const NonNegativePair nnp = make_nnp(k, v);
    const Vector u0 = testutil::random_vector(n, rng);
    const Vector v0 = testutil::random_vector(n, rng);
    const Vector u1 = testutil::random_vector(p, rng);
    const Vector v1 = testutil::random_vector(p, rng);

    const IdentityReport report = check_thm31(nnp, u0, u1, v0, v1);

    // Independent oracle for the gap: sum the rank-one-update determinants of
    // all size-(p-1) subsets, normalized by det [[K+I, V], [V^T, 0]].
    Vector probe_u(n + p), probe_v(n + p);
    probe_u << u0, u1;
    probe_v << v0, v1;
    const double norm =
        assemble_saddle(k + Matrix::Identity(n, n), v).partialPivLu().determinant();
    double phantom = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      const Subset c = Subset::from_mask(mask, n);
      if (c.size() != p - 1) continue;
      const Index kk = c.size();
      Matrix block = assemble_saddle(submatrix(k, c), rows_of(v, c));
      Vector w(kk + p), z(kk + p);
      w << gather(v0, c), v1;
      z << gather(u0, c), u1;
      block -= w * z.transpose();
      phantom += block.partialPivLu().determinant();
    }
    const double predicted_gap = std::abs(phantom / norm);
    CHECK(report.max_abs_deviation == doctest::Approx(predicted_gap).epsilon(1e-6));
    if (predicted_gap > 1e-8) CHECK(!report.passed);
  }
}

TEST_CASE("projected pseudo-inverse expectations: hand case") {
  const NonNegativePair nnp = make_nnp(Matrix::Identity(2, 2), Matrix::Ones(2, 1));
  const auto reports = check_prop51(nnp, 1.0);
  CHECK(reports[0].passed);  // E[I(C)] = P_perp / 2
  CHECK(reports[0].max_abs_deviation < 1e-10);
  CHECK(reports[1].passed);
}

TEST_CASE("projected pseudo-inverse expectations on random instances") {
  Rng rng(83);
  for (int trial = 0; trial < 6; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 4);
    const Index p = 1 + static_cast<Index>(rng() % 3);
    const NonNegativePair nnp = testutil::random_nnp(n, p, rng);
    const double lambda = 0.4 + 0.3 * static_cast<double>(trial % 3);
    const auto reports = check_prop51(nnp, lambda);

    // The first two identities hold; the third carries the same boundary
    // defect as the general quadratic form and fails on generic instances.
    CHECK(reports[0].passed);
    CHECK(reports[0].max_abs_deviation < 1e-8);
    CHECK(reports[1].passed);
    CHECK(reports[1].max_abs_deviation < 1e-8);
    CHECK(!reports[2].passed);
    CHECK(reports[2].max_abs_deviation > 1e-4);
  }
}

TEST_CASE("Nystrom error expectation and unprojected companions") {
  Rng rng(84);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 2);
    const Index p = 1 + static_cast<Index>(rng() % 2);
    const NonNegativePair nnp = testutil::random_nnp(n, p, rng);
    const double lambda = 0.5 + 0.25 * trial;
    const auto reports = check_cor56_cor57(nnp, lambda);
    CHECK(reports[0].passed);  // expected error + expected size
    CHECK(reports[1].passed);  // E[K - L(C)]
    CHECK(reports[2].passed);  // mixed line
    CHECK(!reports[3].passed);  // quadratic line inherits the boundary defect
  }
}

TEST_CASE("random design identities: unbiasedness holds, moment factors do not") {
  Rng rng(85);
  for (int trial = 0; trial < 4; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 3);
    const Index p = 1 + static_cast<Index>(rng() % 2);
    const Matrix v = testutil::random_full_rank(n, p, rng);
    const double t = 0.6 + 0.4 * trial;
    const auto reports = check_random_design(v, t);
    CHECK(!reports[0].passed);  // expected projector
    CHECK(reports[1].passed);   // E[(C V_C)^+] = V^+
    CHECK(reports[1].max_abs_deviation < 1e-8);
    CHECK(!reports[2].passed);  // second moment factor
    CHECK(!reports[3].passed);  // variance formula
  }
}

TEST_CASE("random design second moment matches the size-conditioned mixture") {
  // Independent oracle: conditioned on |C| = k the law is volume sampling, so
  // E[(V_C^T V_C)^-1] = E[(n-p+1)/(|C|-p+1)] (V^T V)^-1.
  Rng rng(86);
  const Index n = 6;
  const Index p = 2;
  const Matrix v = testutil::random_full_rank(n, p, rng);
  const double t = 0.9;
  const NonNegativePair nnp = make_nnp(t * Matrix::Identity(n, n), v);
  const EnsembleModel model = build_ensemble(nnp, 1.0);
  const PmfTable table = enumerate_distribution(model);

  Matrix acc = Matrix::Zero(p, p);
  double mixture = 0.0;
  for (std::uint64_t mask = 0; mask < table.probabilities().size(); ++mask) {
    const double prob = table.probability(mask);
    if (prob <= 0.0) continue;
    const Subset c = Subset::from_mask(mask, n);
    const Matrix v_c = rows_of(v, c);
    acc += prob * (v_c.transpose() * v_c).inverse();
    mixture += prob * static_cast<double>(n - p + 1) /
               static_cast<double>(c.size() - p + 1);
  }
  const Matrix target = mixture * (v.transpose() * v).inverse();
  CHECK(max_abs(acc - target) < 1e-9);
}

TEST_CASE("ensemble of interpolators averages to the regularized fit") {
  Rng rng(87);
  for (int trial = 0; trial < 3; ++trial) {
    const Index n = 6 + static_cast<Index>(rng() % 3);
    const Matrix x = testutil::random_matrix(n, 1, rng);
    const Vector y = testutil::random_vector(n, rng);
    const RegressionProblem problem =
        make_problem(x, y, KernelSpec::gaussian(1.0), BasisSpec::constant_linear());
    const Matrix probes = testutil::random_matrix(5, 1, rng);
    const IdentityReport report = check_cor42(problem, 0.05 + 0.05 * trial, probes);
    CHECK(report.passed);
    CHECK(report.max_abs_deviation < 1e-8);
  }
}

TEST_CASE("risk bound holds with closed-form Gaussian risks") {
  Rng rng(88);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 4);
    const Index p = 1 + static_cast<Index>(rng() % 3);
    const NonNegativePair nnp = testutil::random_nnp(n, p, rng);
    const Vector z = testutil::random_vector(n, rng);
    const IdentityReport report =
        check_risk_bound(nnp, z, 0.3, 0.05 + 0.02 * trial, 0.5 + 0.25 * trial);
    CHECK(report.passed);
    CHECK(report.max_abs_deviation <= 1e-8);
  }

  SUBCASE("zero-signal case") {
    const NonNegativePair nnp = testutil::random_nnp(6, 2, rng);
    const IdentityReport report = check_risk_bound(nnp, zeros(6), 0.5, 0.1, 1.0);
    CHECK(report.passed);
  }

  SUBCASE("zero full risk is rejected") {
    const NonNegativePair nnp = testutil::random_nnp(5, 1, rng);
    CHECK_THROWS_AS(check_risk_bound(nnp, zeros(5), 0.0, 0.1, 1.0), InvalidArgument);
  }
}

TEST_CASE("plain L-ensemble expected pseudo-inverse") {
  Rng rng(89);
  for (int trial = 0; trial < 4; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 3);
    const Matrix k =
        testutil::random_psd(n, rng) + 0.3 * Matrix::Identity(n, n);  // PD required
    const IdentityReport report = check_eq12_lensemble(k, 0.5 + 0.25 * trial);
    CHECK(report.passed);
    CHECK(report.max_abs_deviation < 1e-8);
  }
}

TEST_CASE("monte-carlo mode agrees with enumeration for the true identities") {
  Rng rng(90);
  const NonNegativePair nnp = testutil::random_nnp(6, 2, rng);
  const Vector u0 = testutil::random_vector(6, rng);
  const Vector v0 = testutil::random_vector(6, rng);
  const Vector u1 = testutil::random_vector(2, rng);
  const IdentityReport report =
      check_thm31(nnp, u0, u1, v0, zeros(2), CheckMethod::monte_carlo, 1234);
  CHECK(report.method == CheckMethod::monte_carlo);
  CHECK(report.samples_or_subsets == kMonteCarloDraws);
  CHECK(report.passed);  // within the 4-standard-error band
}

TEST_CASE("size limits raise TooLarge") {
  Rng rng(91);
  const NonNegativePair nnp = testutil::random_nnp(11, 1, rng);
  const Vector u0 = zeros(11), v0 = zeros(11);
  const Vector u1 = zeros(1), v1 = zeros(1);
  CHECK_THROWS_AS(check_thm31(nnp, u0, u1, v0, v1), TooLarge);
  CHECK_THROWS_AS(check_prop51(nnp, 1.0), TooLarge);
  CHECK_THROWS_AS(check_cor56_cor57(nnp, 1.0), TooLarge);
}

TEST_CASE("verification instances are deterministic and enumerable") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const VerificationInstance a = make_verification_instance(seed);
    const VerificationInstance b = make_verification_instance(seed);
    CHECK(max_abs(a.problem.nnp.kernel() - b.problem.nnp.kernel()) == 0.0);
    CHECK(a.lambda == b.lambda);
    CHECK(a.problem.nnp.n() <= 8);
    CHECK(a.problem.nnp.p() >= 1);
    CHECK(a.problem.nnp.p() <= 3);
  }
}
