#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "detreg/data.hpp"
#include "detreg/verify.hpp"

namespace detreg {

/// Configuration shared by all named experiments; zero or empty fields fall
/// back to per-experiment defaults.
struct ExperimentConfig {
  std::string name;  // toy | franke | interp | nystrom_error | timeseries | precond | identities
  std::uint64_t seed = 0;
  int repeats = 0;
  std::vector<Index> subset_sizes;
  std::optional<double> lambda;  // default 1, except precond (1e-6)
  double t = 1.0;
  std::optional<double> gamma;
  std::optional<double> bandwidth_sq;  // empty -> median heuristic where applicable
  std::string csv_path;
  std::string target_column;
  Index train_size = 0;
  Index test_size = 0;
  int system_id = 0;  // timeseries: 0 runs systems 1..3
  int instances = 20; // identities: number of seeded instances
};

struct RunRecord {
  std::uint64_t seed = 0;
  Index subset_size = 0;
  std::string sampler;  // dpp | uniform | full | enumeration
  std::string metric;
  double value = 0.0;
};

struct AggregateRecord {
  std::string sampler;
  Index subset_size = 0;
  std::string metric;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t count = 0;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<RunRecord> runs;
  std::vector<AggregateRecord> aggregates;

  /// Mean of a metric over runs matching (sampler, subset_size); throws
  /// ConfigError when no run matches.
  double aggregate_mean(const std::string& sampler, Index subset_size,
                        const std::string& metric) const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Flat-record serializations; the JSON form is byte-stable for a fixed
/// seed and build.
std::string to_json(const ExperimentResult& result);
std::string to_csv(const ExperimentResult& result);

/// 97.5% two-sided normal interval around the mean.
AggregateRecord aggregate(const std::string& sampler, Index subset_size,
                          const std::string& metric, const std::vector<double>& values);

}  // namespace detreg
