// detreg: semi-parametric kernel regression with determinantal landmark
// sampling. Subcommands: verify, sample, fit, experiment.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "detreg/experiments.hpp"
#include "detreg/regression.hpp"
#include "detreg/verify.hpp"

namespace {

using namespace detreg;

struct CommonOptions {
  std::string csv_path;
  std::string target_column;
  std::string kernel = "gaussian";
  std::string bandwidth_sq = "median";
  std::string basis = "linear";
  std::optional<double> lambda;
  double gamma = 0.0;
  Index subset_size = 0;
  bool fixed_size = false;
  std::string sampler = "dpp";
  double t = 1.0;
  int repeats = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--csv", opt.csv_path, "Input CSV file (RFC-4180, headered)");
  cmd->add_option("--target", opt.target_column, "Name of the target column");
  cmd->add_option("--kernel", opt.kernel, "Kernel family: gaussian|thin-plate")
      ->check(CLI::IsMember({"gaussian", "thin-plate"}));
  cmd->add_option("--bandwidth-sq", opt.bandwidth_sq,
                  "Squared bandwidth (a number) or 'median'");
  cmd->add_option("--basis", opt.basis, "Parametric basis: constant|linear|poly:K");
  cmd->add_option("--lambda", opt.lambda, "Sampling regularization (subset-size dial)");
  cmd->add_option("--gamma", opt.gamma, "Ridge regularization; 0 selects interpolation");
  cmd->add_option("--subset-size", opt.subset_size, "Number of landmarks");
  cmd->add_flag("--fixed-size", opt.fixed_size, "Condition the DPP on the subset size");
  cmd->add_option("--sampler", opt.sampler, "dpp|uniform|volume-bernoulli")
      ->check(CLI::IsMember({"dpp", "uniform", "volume-bernoulli"}));
  cmd->add_option("--t", opt.t, "Bernoulli dial of the volume-bernoulli sampler");
  cmd->add_option("--repeats", opt.repeats, "Number of repeats / draws");
  cmd->add_option("--seed", opt.seed, "Random seed");
  cmd->add_option("--out", opt.out, "Output file (a CSV/JSON mirror is written too)");
  cmd->add_option("--format", opt.format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));
}

BasisSpec parse_basis(const std::string& text) {
  if (text == "constant") return BasisSpec::constant();
  if (text == "linear") return BasisSpec::constant_linear();
  if (text.rfind("poly:", 0) == 0) {
    const int order = std::stoi(text.substr(5));
    if (order < 0) throw ConfigError("--basis poly:K requires K >= 0");
    return BasisSpec::poly(order);
  }
  throw ConfigError("--basis must be constant, linear or poly:K, got '" + text + "'");
}

KernelSpec parse_kernel(const std::string& kernel, const std::string& bandwidth_sq,
                        const Matrix& x) {
  if (kernel == "thin-plate") return KernelSpec::thin_plate(2);
  double bw = 0.0;
  if (bandwidth_sq == "median") {
    bw = median_heuristic_bandwidth(x);
    if (!(bw > 0.0)) throw ConfigError("median heuristic bandwidth is zero");
  } else {
    try {
      bw = std::stod(bandwidth_sq);
    } catch (const std::exception&) {
      throw ConfigError("--bandwidth-sq must be a number or 'median', got '" +
                        bandwidth_sq + "'");
    }
  }
  return KernelSpec::gaussian(bw);
}

Dataset require_dataset(const CommonOptions& opt, const char* cmd) {
  if (opt.csv_path.empty()) {
    throw ConfigError(std::string(cmd) + ": --csv is required");
  }
  if (opt.target_column.empty()) {
    throw ConfigError(std::string(cmd) + ": --target is required");
  }
  return load_csv(opt.csv_path, opt.target_column);
}

std::string swap_extension(const std::string& path, const std::string& ext) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return path + ext;
  }
  return path.substr(0, dot) + ext;
}

void emit(const ExperimentResult& result, const CommonOptions& opt) {
  const std::string primary = opt.format == "csv" ? to_csv(result) : to_json(result);
  if (opt.out.empty()) {
    std::fputs(primary.c_str(), stdout);
    return;
  }
  std::ofstream main_out(opt.out, std::ios::binary);
  if (!main_out) throw ConfigError("cannot open output file '" + opt.out + "'");
  main_out << primary;
  // Mirror in the other format next to the requested file.
  const bool json_primary = opt.format != "csv";
  const std::string mirror_path =
      swap_extension(opt.out, json_primary ? ".csv" : ".json");
  std::ofstream mirror(mirror_path, std::ios::binary);
  mirror << (json_primary ? to_csv(result) : to_json(result));
  std::fprintf(stderr, "wrote %s and %s\n", opt.out.c_str(), mirror_path.c_str());
}

int run_verify(const CommonOptions& opt) {
  ExperimentConfig cfg;
  cfg.name = "identities";
  cfg.seed = opt.seed;
  cfg.instances = opt.repeats > 0 ? opt.repeats : 20;
  const ExperimentResult result = run_experiment(cfg);

  // Per-identity worst deviation over the instance suite.
  std::vector<std::pair<std::string, double>> worst;
  for (const auto& run : result.runs) {
    if (run.metric == "all_passed") continue;
    auto it = std::find_if(worst.begin(), worst.end(),
                           [&](const auto& w) { return w.first == run.metric; });
    if (it == worst.end()) {
      worst.emplace_back(run.metric, run.value);
    } else {
      it->second = std::max(it->second, run.value);
    }
  }
  bool all_passed = true;
  std::printf("identity checks over %d instances (enumeration):\n", cfg.instances);
  for (const auto& [metric, value] : worst) {
    const double tol = metric == "normalization_dev" ? 1e-10 : 1e-8;
    const bool ok = value <= tol;
    all_passed = all_passed && ok;
    std::printf("  %-24s max deviation %.3e  [%s]\n", metric.c_str(), value,
                ok ? "ok" : "violated");
  }
  if (!opt.out.empty()) emit(result, opt);
  return all_passed ? 0 : 1;
}

int run_sample(const CommonOptions& opt) {
  const Dataset data = require_dataset(opt, "sample");
  const KernelSpec kernel = parse_kernel(opt.kernel, opt.bandwidth_sq, data.x);
  const BasisSpec basis = parse_basis(opt.basis);
  const int draws = opt.repeats > 0 ? opt.repeats : 10;
  Rng rng(opt.seed);

  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  const Matrix v = polynomial_basis_matrix(data.x, basis);

  std::optional<EnsembleModel> model;
  if (opt.sampler == "dpp") {
    const Matrix k = kernel_matrix(kernel, data.x);
    model.emplace(make_nnp(k, v), opt.lambda.value_or(1.0));
    std::fprintf(stderr, "expected subset size %.3f (p = %lld, d_eff = %.3f)\n",
                 model->expected_size(), static_cast<long long>(model->p()),
                 model->effective_dimension());
  }

  for (int draw = 0; draw < draws; ++draw) {
    Subset c;
    if (opt.sampler == "dpp") {
      c = (opt.fixed_size && opt.subset_size > 0)
              ? sample_fixed_size(*model, opt.subset_size, rng)
              : sample(*model, rng);
    } else if (opt.sampler == "uniform") {
      if (opt.subset_size <= 0) throw ConfigError("sample: uniform needs --subset-size");
      c = sample_uniform(data.n(), opt.subset_size, rng);
    } else {
      c = sample_volume_bernoulli(v, opt.t, rng);
    }
    nlohmann::ordered_json rec;
    rec["draw"] = draw;
    rec["sampler"] = opt.sampler;
    rec["size"] = c.size();
    rec["indices"] = c.indices();  // 0-based row indices
    records.push_back(std::move(rec));
  }
  const std::string text = records.dump(2) + "\n";
  if (opt.out.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream out(opt.out, std::ios::binary);
    out << text;
  }
  return 0;
}

int run_fit(const CommonOptions& opt) {
  const Dataset data = require_dataset(opt, "fit");
  const KernelSpec kernel = parse_kernel(opt.kernel, opt.bandwidth_sq, data.x);
  BasisSpec basis = parse_basis(opt.basis);
  if (opt.kernel == "thin-plate") basis = BasisSpec::poly(1);
  const RegressionProblem problem = make_problem(data.x, data.y, kernel, basis);
  Rng rng(opt.seed);

  SemiParamFit fit;
  std::string mode;
  if (opt.subset_size > 0) {
    Subset c;
    if (opt.sampler == "uniform") {
      c = sample_uniform(data.n(), opt.subset_size, rng);
    } else {
      const EnsembleModel model = build_ensemble(problem.nnp, opt.lambda.value_or(1.0));
      c = sample_fixed_size(model, opt.subset_size, rng);
    }
    if (opt.gamma > 0.0) {
      fit = fit_nystrom(problem, opt.gamma, c);
      mode = "nystrom";
    } else {
      fit = fit_subset_interpolator(problem, c);
      mode = "interpolation_subset";
    }
  } else {
    if (!(opt.gamma > 0.0)) {
      throw ConfigError("fit: --gamma > 0 is required for the full fit");
    }
    fit = fit_full(problem, opt.gamma);
    mode = "full";
  }

  const Vector in_sample = predict(fit, data.x);
  const double mse = (in_sample - data.y).squaredNorm() / static_cast<double>(data.n());

  nlohmann::ordered_json rec;
  rec["mode"] = mode;
  rec["kernel"] = to_string(kernel.kind);
  rec["bandwidth_sq"] = kernel.bandwidth_sq;
  rec["gamma"] = opt.gamma;
  rec["landmarks"] = fit.landmarks.indices();
  rec["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  rec["in_sample_mse"] = mse;
  const std::string text = rec.dump(2) + "\n";
  if (opt.out.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream out(opt.out, std::ios::binary);
    out << text;
  }
  return 0;
}

int run_experiment_cmd(const std::string& name, const CommonOptions& opt,
                       Index train_size, Index test_size, int system_id) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.seed = opt.seed;
  cfg.repeats = opt.repeats;
  cfg.lambda = opt.lambda;
  cfg.t = opt.t;
  if (opt.gamma > 0.0) cfg.gamma = opt.gamma;
  if (opt.subset_size > 0) cfg.subset_sizes = {opt.subset_size};
  if (opt.bandwidth_sq != "median") {
    try {
      cfg.bandwidth_sq = std::stod(opt.bandwidth_sq);
    } catch (const std::exception&) {
      throw ConfigError("--bandwidth-sq must be a number or 'median'");
    }
  }
  cfg.csv_path = opt.csv_path;
  cfg.target_column = opt.target_column;
  cfg.train_size = train_size;
  cfg.test_size = test_size;
  cfg.system_id = system_id;
  emit(run_experiment(cfg), opt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-parametric kernel regression with determinantal landmark sampling"};
  app.require_subcommand(1);

  CommonOptions verify_opt;
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "Run the exhaustive expectation-identity checks");
  add_common_flags(verify_cmd, verify_opt);

  CommonOptions sample_opt;
  CLI::App* sample_cmd = app.add_subcommand("sample", "Draw landmark subsets");
  add_common_flags(sample_cmd, sample_opt);

  CommonOptions fit_opt;
  CLI::App* fit_cmd =
      app.add_subcommand("fit", "Fit a semi-parametric model on CSV data");
  add_common_flags(fit_cmd, fit_opt);

  CommonOptions exp_opt;
  CLI::App* exp_cmd = app.add_subcommand("experiment", "Run a named experiment");
  std::string exp_name;
  Index train_size = 0;
  Index test_size = 0;
  int system_id = 0;
  exp_cmd
      ->add_option("name", exp_name,
                   "toy|franke|interp|nystrom_error|timeseries|precond|identities")
      ->required();
  exp_cmd->add_option("--train-size", train_size, "Training points (0 = default)");
  exp_cmd->add_option("--test-size", test_size, "Test points (0 = default)");
  exp_cmd->add_option("--system", system_id, "Time-series system id, 0 = all");
  add_common_flags(exp_cmd, exp_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify_cmd->parsed()) return run_verify(verify_opt);
    if (sample_cmd->parsed()) return run_sample(sample_opt);
    if (fit_cmd->parsed()) return run_fit(fit_opt);
    if (exp_cmd->parsed()) {
      return run_experiment_cmd(exp_name, exp_opt, train_size, test_size, system_id);
    }
  } catch (const ConfigError& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return 2;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
