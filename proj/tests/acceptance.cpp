// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Returns nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "detreg/experiments.hpp"
#include "detreg/nystrom.hpp"
#include "detreg/regression.hpp"
#include "detreg/verify.hpp"
#include "testutil.hpp"

using namespace detreg;

namespace {

struct Criterion {
  std::string id;
  bool passed;
  std::string detail;
  double seconds;
};

std::vector<Criterion> results;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(const std::string& id, bool passed, const std::string& detail,
            double seconds) {
  results.push_back({id, passed, detail, seconds});
  std::printf("[%s] %s: %s (%.1f s)\n", passed ? "PASS" : "FAIL", id.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

// Criterion 1: pmf normalization over 20 seeded instances, 1e-10, < 10 s.
void criterion_01() {
  Timer timer;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const VerificationInstance inst = make_verification_instance(seed);
    const EnsembleModel model = build_ensemble(inst.problem.nnp, inst.lambda);
    const PmfTable table = enumerate_distribution(model);
    worst = std::max(worst, std::abs(table.total_mass() - 1.0));
  }
  const double sec = timer.seconds();
  report("C01 normalization", worst <= 1e-10 && sec < 10.0,
         "max |total mass - 1| = " + fmt(worst) + " over 20 instances", sec);
}

// Criterion 2: quadratic-form identity with 5 random probe pairs, 1e-8, < 30 s.
void criterion_02() {
  Timer timer;
  double worst_generic = 0.0;
  double worst_restricted = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const VerificationInstance inst = make_verification_instance(seed);
    const NonNegativePair& nnp = inst.problem.nnp;
    Rng rng(seed + 1000);
    for (int probe = 0; probe < 5; ++probe) {
      const Vector u0 = testutil::random_vector(nnp.n(), rng);
      const Vector v0 = testutil::random_vector(nnp.n(), rng);
      const Vector u1 = testutil::random_vector(nnp.p(), rng);
      const Vector v1 = testutil::random_vector(nnp.p(), rng);
      worst_generic =
          std::max(worst_generic, check_thm31(nnp, u0, u1, v0, v1).max_abs_deviation);
      worst_restricted = std::max(
          worst_restricted,
          check_thm31(nnp, u0, u1, v0, Vector::Zero(nnp.p())).max_abs_deviation);
    }
  }
  const double sec = timer.seconds();
  report("C02 thm31", worst_generic <= 1e-8 && sec < 30.0,
         "max deviation = " + fmt(worst_generic) +
             " with unrestricted probes; restricted probes (v1 = 0) reach " +
             fmt(worst_restricted),
         sec);
}

// Criterion 3: the three expected pseudo-inverse identities, 1e-8, < 30 s.
void criterion_03() {
  Timer timer;
  double worst[3] = {0.0, 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const VerificationInstance inst = make_verification_instance(seed);
    const auto reports = check_prop51(inst.problem.nnp, inst.lambda);
    for (int i = 0; i < 3; ++i) {
      worst[i] = std::max(worst[i], reports[i].max_abs_deviation);
    }
  }
  const double sec = timer.seconds();
  const bool passed =
      worst[0] <= 1e-8 && worst[1] <= 1e-8 && worst[2] <= 1e-8 && sec < 30.0;
  report("C03 prop51", passed,
         "deviations: id0 = " + fmt(worst[0]) + ", id1 = " + fmt(worst[1]) +
             ", id2 = " + fmt(worst[2]),
         sec);
}

// Criterion 4: Nystrom sandwich at 1e-9, expected error and size at 1e-8.
void criterion_04() {
  Timer timer;
  double worst_sandwich = 0.0;
  double worst_error = 0.0;
  double worst_size = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const VerificationInstance inst = make_verification_instance(seed);
    const NonNegativePair& nnp = inst.problem.nnp;
    const EnsembleModel model = build_ensemble(nnp, inst.lambda);
    const PmfTable table = enumerate_distribution(model);
    for (std::uint64_t mask = 0; mask < table.probabilities().size(); ++mask) {
      if (table.probability(mask) <= 0.0) continue;
      const Subset c = Subset::from_mask(mask, nnp.n());
      if (c.size() <= nnp.p()) continue;
      worst_sandwich =
          std::max(worst_sandwich, sandwich_violation(nnp, projected_nystrom(nnp, c)));
    }
    worst_error =
        std::max(worst_error, check_cor56_cor57(nnp, inst.lambda)[0].max_abs_deviation);
    worst_size =
        std::max(worst_size, std::abs(table.expected_size() - model.expected_size()));
  }
  const double sec = timer.seconds();
  const bool passed = worst_sandwich <= 1e-9 && worst_error <= 1e-8 && worst_size <= 1e-8;
  report("C04 cor56", passed,
         "sandwich violation = " + fmt(worst_sandwich) +
             ", expected-error deviation = " + fmt(worst_error) +
             ", expected-size deviation = " + fmt(worst_size),
         sec);
}

// Criterion 5: random-design identities at 1e-8 with the stated factors.
void criterion_05() {
  Timer timer;
  double worst[4] = {0.0, 0.0, 0.0, 0.0};
  Rng rng(500);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 5);  // up to 9
    const Index p = 1 + static_cast<Index>(rng() % 3);
    const Matrix v = testutil::random_full_rank(n, p, rng);
    const double t = 0.5 + 0.2 * trial;
    const auto reports = check_random_design(v, t);
    for (int i = 0; i < 4; ++i) {
      worst[i] = std::max(worst[i], reports[i].max_abs_deviation);
    }
  }
  const double sec = timer.seconds();
  const bool passed =
      worst[0] <= 1e-8 && worst[1] <= 1e-8 && worst[2] <= 1e-8 && worst[3] <= 1e-8;
  report("C05 random-design", passed,
         "deviations: projector = " + fmt(worst[0]) + ", unbiasedness = " + fmt(worst[1]) +
             ", second moment = " + fmt(worst[2]) + ", variance = " + fmt(worst[3]),
         sec);
}

// Criterion 6: sampler laws by chi-square at significance 0.999, 1e5 draws.
void criterion_06() {
  Timer timer;
  const double draws = 100000;

  // Two-stage volume + Bernoulli sampler against the rescaled volume law.
  Rng gen(600);
  const Index n = 5;
  const Index p = 2;
  const Matrix v = testutil::random_full_rank(n, p, gen);
  const double t = 0.8;
  const double q = t / (1.0 + t);
  const double det_vv = (v.transpose() * v).determinant();
  std::vector<double> vb_probs(1 << n, 0.0);
  for (std::uint64_t mask = 0; mask < vb_probs.size(); ++mask) {
    const Subset c = Subset::from_mask(mask, n);
    if (c.size() < p) continue;
    const Matrix v_c = rows_of(v, c);
    vb_probs[mask] = std::pow(q, static_cast<double>(c.size() - p)) *
                     std::pow(1.0 - q, static_cast<double>(n - c.size())) *
                     (v_c.transpose() * v_c).determinant() / det_vv;
  }
  Rng vb_rng(601);
  const auto vb = testutil::subset_gof(n, vb_probs, draws, [&] {
    return sample_volume_bernoulli(v, t, vb_rng);
  });

  // Spectral samplers against the enumerated distribution, n <= 6.
  Rng inst_rng(602);
  const NonNegativePair nnp = testutil::random_nnp(6, 2, inst_rng);
  const EnsembleModel model = build_ensemble(nnp, 1.0);
  const PmfTable table = enumerate_distribution(model);
  Rng free_rng(603);
  const auto random_size = testutil::subset_gof(6, table.probabilities(), draws, [&] {
    return sample(model, free_rng);
  });

  std::vector<double> fixed_probs(table.probabilities().size(), 0.0);
  double slice_mass = 0.0;
  for (std::uint64_t mask = 0; mask < fixed_probs.size(); ++mask) {
    if (Subset::from_mask(mask, 6).size() == 4) {
      fixed_probs[mask] = table.probability(mask);
      slice_mass += fixed_probs[mask];
    }
  }
  for (auto& prob : fixed_probs) prob /= slice_mass;
  Rng fixed_rng(604);
  const auto fixed_size = testutil::subset_gof(6, fixed_probs, draws, [&] {
    return sample_fixed_size(model, 4, fixed_rng);
  });

  const double sec = timer.seconds();
  const bool passed =
      vb.pvalue > 0.001 && random_size.pvalue > 0.001 && fixed_size.pvalue > 0.001;
  report("C06 samplers", passed,
         "chi-square p-values: two-stage = " + fmt(vb.pvalue) +
             ", random-size = " + fmt(random_size.pvalue) +
             ", fixed-size = " + fmt(fixed_size.pvalue),
         sec);
}

// Criterion 7: enumeration average of interpolators vs the regularized fit.
void criterion_07() {
  Timer timer;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const VerificationInstance inst = make_verification_instance(seed);
    Rng rng(seed + 700);
    const Matrix probes = testutil::random_matrix(5, inst.problem.x.cols(), rng);
    worst = std::max(worst,
                     check_cor42(inst.problem, inst.gamma, probes).max_abs_deviation);
  }
  const double sec = timer.seconds();
  report("C07 cor42", worst <= 1e-8,
         "max deviation over 20 instances and 5 probes = " + fmt(worst), sec);
}

// Criterion 8: risk-bound stability on 10 seeded instances, slack >= -1e-8.
void criterion_08() {
  Timer timer;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const VerificationInstance inst = make_verification_instance(seed);
    const IdentityReport rep = check_risk_bound(inst.problem.nnp, inst.z_true,
                                                inst.sigma_sq, inst.gamma, inst.lambda);
    worst = std::max(worst, rep.max_abs_deviation);
  }
  const double sec = timer.seconds();
  report("C08 thm59", worst <= 1e-8,
         "max bound violation = " + fmt(worst) + " over 10 instances", sec);
}

// Criterion 9: sketched-solver consistency.
void criterion_09() {
  Timer timer;
  Rng rng(900);
  double worst_full = 0.0;
  double worst_pcg = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 10 + static_cast<Index>(rng() % 15);
    const Index p = 1 + static_cast<Index>(rng() % 3);
    const NonNegativePair nnp = testutil::random_nnp(n, p, rng);
    const Vector y = testutil::random_vector(n, rng);
    const double gamma = std::pow(10.0, -1.0 - static_cast<double>(trial % 3));

    const FitCoefficients full = fit_full_coefficients(nnp, y, gamma);
    const FitCoefficients sketch = nystrom_coefficients(nnp, y, gamma, Subset::full(n));
    const Vector z_full = nnp.kernel() * full.alpha + nnp.basis() * full.beta;
    const Vector z_sketch = nnp.kernel() * sketch.alpha + nnp.basis() * sketch.beta;
    worst_full = std::max(worst_full, (z_full - z_sketch).cwiseAbs().maxCoeff());

    const EnsembleModel model = build_ensemble(nnp, 1.0);
    const Subset c = sample_fixed_size(model, std::min<Index>(n, p + 5), rng);
    const FitCoefficients direct = nystrom_coefficients(nnp, y, gamma, c);
    const FitCoefficients pcg = nystrom_coefficients(nnp, y, gamma, c, NystromSolver::pcg);
    worst_pcg = std::max(worst_pcg, (direct.alpha - pcg.alpha).cwiseAbs().maxCoeff());
    worst_pcg = std::max(worst_pcg, (direct.beta - pcg.beta).cwiseAbs().maxCoeff());
  }
  const double sec = timer.seconds();
  const bool passed = worst_full <= 1e-8 && worst_pcg <= 1e-7;
  report("C09 sketched-solver", passed,
         "full-subset deviation = " + fmt(worst_full) +
             ", direct vs pcg = " + fmt(worst_pcg),
         sec);
}

// Criterion 10a: Franke interpolation, DPP <= uniform at sizes {30, 60, 120}.
void criterion_10a() {
  Timer timer;
  ExperimentConfig cfg;
  cfg.name = "franke";
  cfg.seed = 100;
  const ExperimentResult result = run_experiment(cfg);
  bool ordered = true;
  std::string detail = "mean test MSE (dpp vs uniform):";
  for (Index size : {30, 60, 120}) {
    const double dpp = result.aggregate_mean("dpp", size, "test_mse");
    const double uniform = result.aggregate_mean("uniform", size, "test_mse");
    ordered = ordered && dpp <= uniform;
    detail += " k=" + std::to_string(size) + ": " + fmt(dpp) + " vs " + fmt(uniform) + ";";
  }
  const double sec = timer.seconds();
  report("C10a franke", ordered && sec < 120.0, detail, sec);
}

// Criterion 10b: the semi-parametric toy model beats LS-SVM and KRR at best
// gamma on the widened test interval.
void criterion_10b() {
  Timer timer;
  ExperimentConfig cfg;
  cfg.name = "toy";
  cfg.seed = 100;
  const ExperimentResult result = run_experiment(cfg);
  const double m1 = result.aggregate_mean("full", 0, "best_test_mse/model1");
  const double m2 = result.aggregate_mean("full", 0, "best_test_mse/model2");
  const double m3 = result.aggregate_mean("full", 0, "best_test_mse/model3");
  const double sec = timer.seconds();
  report("C10b toy", m1 < m2 && m1 < m3 && sec < 120.0,
         "best mean test MSE: semi-parametric = " + fmt(m1) + ", constant-only = " +
             fmt(m2) + ", kernel-only = " + fmt(m3),
         sec);
}

// Criterion 10c: ridge-leverage preconditioning shrinks the condition number.
void criterion_10c() {
  Timer timer;
  ExperimentConfig cfg;
  cfg.name = "precond";
  cfg.seed = 100;
  const ExperimentResult result = run_experiment(cfg);
  std::vector<double> raw, pre;
  for (const auto& run : result.runs) {
    if (run.sampler != "dpp") continue;
    if (run.metric == "cond_raw") raw.push_back(run.value);
    if (run.metric == "cond_precond") pre.push_back(run.value);
  }
  std::sort(raw.begin(), raw.end());
  std::sort(pre.begin(), pre.end());
  const double median_raw = raw[raw.size() / 2];
  const double median_pre = pre[pre.size() / 2];
  const double sec = timer.seconds();
  report("C10c precond", median_pre < median_raw && sec < 120.0,
         "median condition number: raw = " + fmt(median_raw) +
             ", preconditioned = " + fmt(median_pre),
         sec);
}

// Criterion 11: projected Gaussian Gram matrices stay PSD.
void criterion_11() {
  Timer timer;
  Rng rng(1100);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 15 + static_cast<Index>(rng() % 10);
    const Index d = 3 + static_cast<Index>(rng() % 3);
    const Matrix x = testutil::random_matrix(n, d, rng);
    std::vector<Index> mask;
    for (Index c = 0; c < d; ++c) {
      if (rng() % 2 == 0) mask.push_back(c);
    }
    if (mask.empty()) mask.push_back(0);
    const Matrix gram =
        projected_gaussian_kernel_matrix(x, 0.5 + 0.1 * trial, mask);
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    worst = std::min(worst, es.eigenvalues().minCoeff());
  }
  const double sec = timer.seconds();
  report("C11 projected-gaussian", worst >= -1e-10,
         "min eigenvalue over 20 instances = " + fmt(worst), sec);
}

}  // namespace

int main() {
  std::printf("detreg acceptance criteria\n");
  criterion_01();
  criterion_02();
  criterion_03();
  criterion_04();
  criterion_05();
  criterion_06();
  criterion_07();
  criterion_08();
  criterion_09();
  criterion_10a();
  criterion_10b();
  criterion_10c();
  criterion_11();

  int failed = 0;
  for (const auto& criterion : results) {
    if (!criterion.passed) ++failed;
  }
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
