#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detreg/dpp.hpp"
#include "detreg/linalg.hpp"

namespace detreg {

struct Dataset {
  Matrix x;  // n x d
  Vector y;
  std::vector<std::string> feature_names;
  std::string target_name;
  bool standardized = false;

  Index n() const { return x.rows(); }
  Index d() const { return x.cols(); }
};

/// Reads a headered RFC-4180 CSV of finite decimals. The target column is
/// selected by name; the remaining columns become features in file order.
Dataset load_csv(const std::string& path, const std::string& target_column);

/// Writes a dataset back out with round-trip precision.
void write_csv(const Dataset& ds, const std::string& path);

/// Seeded permutation split; standardization statistics come from the first
/// part and are applied to every part (features and target).
std::vector<Dataset> standardize_split(const Dataset& ds,
                                       const std::vector<double>& fractions,
                                       std::uint64_t seed);

/// Linear trend with two Gaussian bumps on [lo, hi]; noise_sd is a standard
/// deviation (pass 0 for noiseless targets).
Dataset gen_toy(Index n, double noise_sd, std::uint64_t seed, double lo = -10.0,
                double hi = 10.0);
double toy_mean_function(double x);

/// Franke surface on the unit square, noiseless.
Dataset gen_franke(Index n, std::uint64_t seed);
double franke_function(double x1, double x2);

/// Static and lagged nonlinear systems encoded as regression datasets.
/// Feature layouts: system 1 -> [z, x1, x2]; systems 2 and 3 pack the two
/// exogenous inputs (or input lags) first and the two output lags last.
Dataset gen_system(int id, Index n, std::uint64_t seed);

/// True parametric coefficients of a system, ordered like the fitted beta of
/// the matching constant_linear basis (lag coefficients first, intercept last).
std::vector<double> system_true_coefficients(int id);

/// Coordinates of the system features the parametric part acts on (0-based).
std::vector<Index> system_linear_coords(int id);
/// Coordinates the kernel acts on.
std::vector<Index> system_kernel_coords(int id);

/// Unnormalized sinc: sin(x)/x with sinc(0) = 1.
double sinc(double x);

}  // namespace detreg
