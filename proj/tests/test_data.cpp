#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "detreg/data.hpp"
#include "testutil.hpp"

using namespace detreg;

namespace {

/// Writes content to a fresh temp file and returns its path.
std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = "detreg_test_" + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("csv loading basics") {
  const std::string path = write_temp("basic.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  const Dataset ds = load_csv(path, "y");
  CHECK(ds.n() == 3);
  CHECK(ds.d() == 2);
  CHECK(ds.x(1, 0) == 4.0);
  CHECK(ds.y(2) == 9.0);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  std::remove(path.c_str());
}

TEST_CASE("csv target column can sit anywhere") {
  const std::string path = write_temp("mid.csv", "a,y,b\n1,2,3\n4,5,6\n");
  const Dataset ds = load_csv(path, "y");
  CHECK(ds.d() == 2);
  CHECK(ds.y(0) == 2.0);
  CHECK(ds.x(0, 0) == 1.0);
  CHECK(ds.x(0, 1) == 3.0);
  std::remove(path.c_str());
}

TEST_CASE("csv quoting, CRLF and escaped quotes") {
  const std::string path = write_temp(
      "quoted.csv", "\"a,1\",\"b\"\"q\"\",\",y\r\n1.5,2.25,3\r\n-1,0.5,2\r\n");
  const Dataset ds = load_csv(path, "y");
  CHECK(ds.feature_names[0] == "a,1");
  CHECK(ds.feature_names[1] == "b\"q\",");
  CHECK(ds.n() == 2);
  CHECK(ds.x(0, 1) == 2.25);
  std::remove(path.c_str());
}

TEST_CASE("csv error reporting") {
  const std::string bad = write_temp("bad.csv", "a,y\n1,2\nx,3\n");
  CHECK_THROWS_AS(load_csv(bad, "y"), ParseError);
  try {
    load_csv(bad, "y");
  } catch (const ParseError& err) {
    CHECK(err.line == 3);
    CHECK(err.column == 1);
  }
  std::remove(bad.c_str());

  const std::string nan = write_temp("nan.csv", "a,y\nNaN,2\n");
  CHECK_THROWS_AS(load_csv(nan, "y"), NonFiniteValue);
  std::remove(nan.c_str());

  const std::string missing = write_temp("missing.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(load_csv(missing, "nope"), ConfigError);
  std::remove(missing.c_str());

  const std::string ragged = write_temp("ragged.csv", "a,y\n1,2\n1\n");
  CHECK_THROWS_AS(load_csv(ragged, "y"), ParseError);
  std::remove(ragged.c_str());
}

TEST_CASE("csv round trip preserves full precision") {
  Rng rng(101);
  Dataset ds;
  ds.x = testutil::random_matrix(7, 3, rng) * 1e-7;
  ds.y = testutil::random_vector(7, rng) * 1e9;
  ds.feature_names = {"f1", "f2", "f3"};
  ds.target_name = "target";
  const std::string path = "detreg_test_roundtrip.csv";
  write_csv(ds, path);
  const Dataset back = load_csv(path, "target");
  CHECK((back.x - ds.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.y - ds.y).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("standardized splits") {
  Rng rng(102);
  Dataset ds;
  ds.x = testutil::random_matrix(100, 2, rng);
  ds.x.col(1) *= 50.0;
  ds.y = testutil::random_vector(100, rng) * 3.0 + Vector::Ones(100);
  ds.feature_names = {"a", "b"};
  ds.target_name = "y";

  SUBCASE("fifty-fifty") {
    const auto parts = standardize_split(ds, {0.5, 0.5}, 7);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].n() == 50);
    CHECK(parts[1].n() == 50);
    CHECK(parts[0].standardized);
    // Training statistics: mean 0, unit variance.
    for (Index j = 0; j < 2; ++j) {
      CHECK(std::abs(parts[0].x.col(j).mean()) < 1e-9);
      const double var = parts[0].x.col(j).squaredNorm() / 50.0;
      CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(std::abs(parts[0].y.mean()) < 1e-9);
  }

  SUBCASE("three-way split sizes") {
    const auto parts = standardize_split(ds, {0.5, 0.25, 0.25}, 7);
    REQUIRE(parts.size() == 3);
    CHECK(parts[0].n() == 50);
    CHECK(parts[1].n() == 25);
    CHECK(parts[2].n() == 25);
  }

  SUBCASE("degenerate feature is rejected") {
    Dataset flat = ds;
    flat.x.col(0).setConstant(3.0);
    CHECK_THROWS_AS(standardize_split(flat, {0.5, 0.5}, 7), InvalidArgument);
  }

  SUBCASE("fractions must sum to one") {
    CHECK_THROWS_AS(standardize_split(ds, {0.6, 0.6}, 7), ConfigError);
  }

  SUBCASE("same seed reproduces the split") {
    const auto a = standardize_split(ds, {0.5, 0.5}, 11);
    const auto b = standardize_split(ds, {0.5, 0.5}, 11);
    CHECK((a[0].x - b[0].x).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("toy generator") {
  CHECK(toy_mean_function(0.0) == doctest::Approx(7.0));
  CHECK(toy_mean_function(4.0) ==
        doctest::Approx(11.0 + 4.0 - 4.0 * std::exp(-64.0)).epsilon(1e-12));

  const Dataset noiseless = gen_toy(50, 0.0, 3);
  for (Index i = 0; i < noiseless.n(); ++i) {
    CHECK(noiseless.y(i) == toy_mean_function(noiseless.x(i, 0)));
    CHECK(noiseless.x(i, 0) >= -10.0);
    CHECK(noiseless.x(i, 0) <= 10.0);
  }
  const Dataset wide = gen_toy(50, 0.0, 3, -11.0, 11.0);
  CHECK(wide.x.col(0).minCoeff() >= -11.0);
  CHECK(wide.x.col(0).maxCoeff() <= 11.0);
  CHECK_THROWS_AS(gen_toy(1, 0.0, 3), InvalidArgument);
}

TEST_CASE("franke generator") {
  CHECK(franke_function(0.0, 0.0) == doctest::Approx(0.7664).epsilon(1e-3));
  const Dataset ds = gen_franke(200, 5);
  CHECK(ds.d() == 2);
  for (Index i = 0; i < ds.n(); ++i) {
    CHECK(ds.x(i, 0) >= 0.0);
    CHECK(ds.x(i, 0) <= 1.0);
    CHECK(std::abs(ds.y(i)) <= 2.2);
    CHECK(ds.y(i) == franke_function(ds.x(i, 0), ds.x(i, 1)));
  }
  const Dataset again = gen_franke(200, 5);
  CHECK((again.x - ds.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sinc convention") {
  CHECK(sinc(0.0) == 1.0);
  CHECK(sinc(3.14159) == doctest::Approx(std::sin(3.14159) / 3.14159));
}

TEST_CASE("system generators") {
  SUBCASE("layouts and first-step recurrences") {
    const Dataset s1 = gen_system(1, 10, 1);
    CHECK(s1.d() == 3);
    CHECK(s1.feature_names[0] == "z");

    const Dataset s2 = gen_system(2, 10, 1);
    CHECK(s2.d() == 4);
    // First step has zero output lags.
    CHECK(s2.x(0, 2) == 0.0);
    CHECK(s2.x(0, 3) == 0.0);
    // Second step carries the first output as lag one.
    CHECK(s2.x(1, 2) == s2.y(0));

    const Dataset s3 = gen_system(3, 10, 1);
    CHECK(s3.d() == 4);
    CHECK(s3.x(0, 0) == 0.0);  // u lags start at zero
    CHECK(s3.x(0, 1) == 0.0);
    CHECK(s3.x(1, 1) == 0.0);  // u^{t-2} still zero at the second step
    // First step: 0.6 + 0.7 sinc(0) + 0.6 sinc(0) = 1.9 plus noise.
    CHECK(std::abs(s3.y(0) - 1.9) < 6.0 * std::sqrt(0.05));
  }

  SUBCASE("noise-free recurrence values") {
    // Regenerate system 2 with the same inputs and verify the recurrence
    // y_t = 0.3 + 0.2 y_{t-1} + 0.1 y_{t-2} + 2 sinc(x1 + x2) + noise by
    // recomputing it from the stored features.
    const Dataset s2 = gen_system(2, 50, 9);
    double worst = 0.0;
    for (Index t = 0; t < s2.n(); ++t) {
      const double det_part = 0.3 + 0.2 * s2.x(t, 2) + 0.1 * s2.x(t, 3) +
                              2.0 * sinc(s2.x(t, 0) + s2.x(t, 1));
      worst = std::max(worst, std::abs(s2.y(t) - det_part));
    }
    // Residual is exactly the Gaussian noise, sd = sqrt(0.05).
    CHECK(worst < 6.0 * std::sqrt(0.05));
    CHECK(worst > 0.0);
  }

  SUBCASE("true coefficients and coordinate masks") {
    CHECK(system_true_coefficients(1) == std::vector<double>{0.2, 0.4});
    CHECK(system_true_coefficients(2) == std::vector<double>{0.2, 0.1, 0.3});
    CHECK(system_true_coefficients(3) == std::vector<double>{0.4, 0.2, 0.6});
    CHECK(system_linear_coords(1) == std::vector<Index>{0});
    CHECK(system_kernel_coords(1) == std::vector<Index>{1, 2});
    CHECK(system_kernel_coords(3) == std::vector<Index>{0, 1});
    CHECK_THROWS_AS(gen_system(4, 10, 1), InvalidArgument);
  }
}
