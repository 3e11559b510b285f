#include "detreg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace detreg {

namespace {

struct CsvCell {
  std::string text;
  std::size_t line;    // 1-based
  std::size_t column;  // 1-based field index
};

/// RFC-4180 tokenizer: quoted fields may contain separators, doubled quotes
/// and line breaks; records end at CR, LF or CRLF outside quotes.
std::vector<std::vector<CsvCell>> tokenize_csv(const std::string& content) {
  std::vector<std::vector<CsvCell>> rows;
  std::vector<CsvCell> row;
  std::string field;
  bool quoted = false;
  bool any_char = false;
  std::size_t line = 1;
  std::size_t column = 1;

  auto push_field = [&] {
    row.push_back(CsvCell{field, line, column});
    field.clear();
    ++column;
  };
  auto push_row = [&] {
    push_field();
    rows.push_back(std::move(row));
    row.clear();
    ++line;
    column = 1;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char ch = content[i];
    any_char = true;
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty()) {
          throw ParseError("csv: stray quote inside unquoted field", line, column);
        }
        quoted = true;
        break;
      case ',':
        push_field();
        break;
      case '\r':
        if (i + 1 < content.size() && content[i + 1] == '\n') ++i;
        push_row();
        break;
      case '\n':
        push_row();
        break;
      default:
        field.push_back(ch);
    }
  }
  if (quoted) throw ParseError("csv: unterminated quoted field", line, column);
  if (!field.empty() || !row.empty()) {
    if (any_char) push_row();
  }
  return rows;
}

double parse_cell(const CsvCell& cell) {
  const std::string& s = cell.text;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("csv: cannot parse '" + s + "' as a decimal number", cell.line,
                     cell.column);
  }
  if (!std::isfinite(value)) {
    throw NonFiniteValue("csv: non-finite value '" + s + "' at line " +
                         std::to_string(cell.line) + ", column " +
                         std::to_string(cell.column));
  }
  return value;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("load_csv: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto rows = tokenize_csv(buffer.str());
  if (rows.size() < 2) {
    throw ParseError("csv: need a header row and at least one data row", 1, 1);
  }

  const auto& header = rows.front();
  Index target_idx = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j].text == target_column) target_idx = static_cast<Index>(j);
  }
  if (target_idx < 0) {
    throw ConfigError("load_csv: target column '" + target_column + "' not in header");
  }

  const std::size_t width = header.size();
  const Index n = static_cast<Index>(rows.size() - 1);
  const Index d = static_cast<Index>(width) - 1;
  Dataset ds;
  ds.x = Matrix(n, d);
  ds.y = Vector(n);
  ds.target_name = target_column;
  for (std::size_t j = 0; j < width; ++j) {
    if (static_cast<Index>(j) != target_idx) ds.feature_names.push_back(header[j].text);
  }

  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i) + 1];
    if (row.size() != width) {
      throw ParseError("csv: row has " + std::to_string(row.size()) + " fields, expected " +
                           std::to_string(width),
                       row.front().line, 1);
    }
    Index feature = 0;
    for (std::size_t j = 0; j < width; ++j) {
      const double value = parse_cell(row[j]);
      if (static_cast<Index>(j) == target_idx) {
        ds.y(i) = value;
      } else {
        ds.x(i, feature++) = value;
      }
    }
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("write_csv: cannot open '" + path + "'");
  for (const auto& name : ds.feature_names) out << name << ',';
  out << ds.target_name << '\n';
  char buf[64];
  for (Index i = 0; i < ds.n(); ++i) {
    for (Index j = 0; j < ds.d(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.x(i, j));
      out << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", ds.y(i));
    out << buf << '\n';
  }
}

std::vector<Dataset> standardize_split(const Dataset& ds,
                                       const std::vector<double>& fractions,
                                       std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("standardize_split: no fractions given");
  const double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("standardize_split: fractions must sum to 1");
  }
  const Index n = ds.n();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  // Cumulative rounding keeps part sizes deterministic and exhaustive.
  std::vector<Index> bounds{0};
  double cum = 0.0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    cum += fractions[i];
    bounds.push_back(i + 1 == fractions.size()
                         ? n
                         : static_cast<Index>(std::llround(cum * static_cast<double>(n))));
  }

  std::vector<Dataset> parts;
  for (std::size_t part = 0; part < fractions.size(); ++part) {
    const Index begin = bounds[part];
    const Index end = bounds[part + 1];
    Dataset out;
    out.x = Matrix(end - begin, ds.d());
    out.y = Vector(end - begin);
    out.feature_names = ds.feature_names;
    out.target_name = ds.target_name;
    for (Index i = begin; i < end; ++i) {
      out.x.row(i - begin) = ds.x.row(perm[static_cast<std::size_t>(i)]);
      out.y(i - begin) = ds.y(perm[static_cast<std::size_t>(i)]);
    }
    parts.push_back(std::move(out));
  }

  // Statistics from the first (training) part only.
  const Dataset& train = parts.front();
  if (train.n() < 2) throw ConfigError("standardize_split: training part too small");
  Vector x_mean = train.x.colwise().mean();
  Vector x_sd(ds.d());
  for (Index j = 0; j < ds.d(); ++j) {
    const double var =
        (train.x.col(j).array() - x_mean(j)).square().sum() / static_cast<double>(train.n());
    if (var <= 1e-12) {
      throw InvalidArgument("standardize_split: feature '" +
                            (static_cast<std::size_t>(j) < ds.feature_names.size()
                                 ? ds.feature_names[static_cast<std::size_t>(j)]
                                 : std::to_string(j)) +
                            "' is degenerate (zero variance)");
    }
    x_sd(j) = std::sqrt(var);
  }
  const double y_mean = train.y.mean();
  const double y_var =
      (train.y.array() - y_mean).square().sum() / static_cast<double>(train.n());
  if (y_var <= 1e-12) {
    throw InvalidArgument("standardize_split: target is degenerate (zero variance)");
  }
  const double y_sd = std::sqrt(y_var);

  for (auto& part : parts) {
    for (Index j = 0; j < ds.d(); ++j) {
      part.x.col(j) = (part.x.col(j).array() - x_mean(j)) / x_sd(j);
    }
    part.y = (part.y.array() - y_mean) / y_sd;
    part.standardized = true;
  }
  return parts;
}

double toy_mean_function(double x) {
  return x + 7.0 + 4.0 * std::exp(-(x - 4.0) * (x - 4.0)) -
         4.0 * std::exp(-(x + 4.0) * (x + 4.0));
}

Dataset gen_toy(Index n, double noise_sd, std::uint64_t seed, double lo, double hi) {
  if (n < 2) throw InvalidArgument("gen_toy: need at least two points");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(lo, hi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.x = Matrix(n, 1);
  ds.y = Vector(n);
  ds.feature_names = {"x"};
  ds.target_name = "y";
  for (Index i = 0; i < n; ++i) {
    ds.x(i, 0) = unif(rng);
    ds.y(i) = toy_mean_function(ds.x(i, 0)) + (noise_sd > 0.0 ? noise_sd * gauss(rng) : 0.0);
  }
  return ds;
}

double franke_function(double x1, double x2) {
  const double t1 =
      0.75 * std::exp(-std::pow(9.0 * x1 - 2.0, 2) / 4.0 - std::pow(9.0 * x2 - 2.0, 2) / 4.0);
  const double t2 =
      0.75 * std::exp(-std::pow(9.0 * x1 + 1.0, 2) / 49.0 - (9.0 * x2 + 1.0) / 10.0);
  const double t3 =
      0.5 * std::exp(-std::pow(9.0 * x1 - 7.0, 2) / 4.0 - std::pow(9.0 * x2 - 3.0, 2) / 4.0);
  const double t4 = 0.2 * std::exp(-std::pow(9.0 * x1 - 4.0, 2) - std::pow(9.0 * x2 - 7.0, 2));
  return t1 + t2 + t3 - t4;
}

Dataset gen_franke(Index n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("gen_franke: need at least one point");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset ds;
  ds.x = Matrix(n, 2);
  ds.y = Vector(n);
  ds.feature_names = {"x1", "x2"};
  ds.target_name = "y";
  for (Index i = 0; i < n; ++i) {
    ds.x(i, 0) = unif(rng);
    ds.x(i, 1) = unif(rng);
    ds.y(i) = franke_function(ds.x(i, 0), ds.x(i, 1));
  }
  return ds;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(x) / x;
}

Dataset gen_system(int id, Index n, std::uint64_t seed) {
  if (n < 3) throw InvalidArgument("gen_system: need at least three time steps");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Distribution parameters are variances; standard deviations below.
  const double noise_sd = std::sqrt(0.05);

  Dataset ds;
  ds.y = Vector(n);
  ds.target_name = "y";

  switch (id) {
    case 1: {
      const double a2 = 0.2;
      const double a1 = 0.4;
      const double z_sd = std::sqrt(2.5);
      const double x_sd = std::sqrt(2.0);
      ds.x = Matrix(n, 3);
      ds.feature_names = {"z", "x1", "x2"};
      for (Index t = 0; t < n; ++t) {
        const double z = z_sd * gauss(rng);
        const double x1 = x_sd * gauss(rng);
        const double x2 = x_sd * gauss(rng);
        ds.x(t, 0) = z;
        ds.x(t, 1) = x1;
        ds.x(t, 2) = x2;
        ds.y(t) = a2 * z + a1 + sinc(x1 + x2) + noise_sd * gauss(rng);
      }
      return ds;
    }
    case 2: {
      const double a1 = 0.3;
      const double a2 = 0.2;
      const double a3 = 0.1;
      const double x_sd = std::sqrt(2.0);
      ds.x = Matrix(n, 4);
      ds.feature_names = {"x1", "x2", "ylag1", "ylag2"};
      double y1 = 0.0;  // y^{t-1}, starts at y^0 = 0
      double y2 = 0.0;  // y^{t-2}, starts at y^{-1} = 0
      for (Index t = 0; t < n; ++t) {
        const double x1 = x_sd * gauss(rng);
        const double x2 = x_sd * gauss(rng);
        const double yt =
            a1 + a2 * y1 + a3 * y2 + 2.0 * sinc(x1 + x2) + noise_sd * gauss(rng);
        ds.x(t, 0) = x1;
        ds.x(t, 1) = x2;
        ds.x(t, 2) = y1;
        ds.x(t, 3) = y2;
        ds.y(t) = yt;
        y2 = y1;
        y1 = yt;
      }
      return ds;
    }
    case 3: {
      const double a1 = 0.6;
      const double a2 = 0.4;
      const double a3 = 0.2;
      const double b1 = 0.7;
      const double b2 = 0.6;
      const double u_sd = std::sqrt(4.0);
      ds.x = Matrix(n, 4);
      ds.feature_names = {"ulag1", "ulag2", "ylag1", "ylag2"};
      double y1 = 0.0;
      double y2 = 0.0;
      double u1 = 0.0;  // u^{t-1}, starts at u^0 = 0
      double u2 = 0.0;  // u^{t-2}, starts at u^{-1} = 0
      for (Index t = 0; t < n; ++t) {
        const double yt = a1 + a2 * y1 + a3 * y2 + b1 * sinc(u1) + b2 * sinc(u2) +
                          noise_sd * gauss(rng);
        ds.x(t, 0) = u1;
        ds.x(t, 1) = u2;
        ds.x(t, 2) = y1;
        ds.x(t, 3) = y2;
        ds.y(t) = yt;
        y2 = y1;
        y1 = yt;
        u2 = u1;
        u1 = u_sd * gauss(rng);
      }
      return ds;
    }
    default:
      throw InvalidArgument("gen_system: id must be 1, 2 or 3");
  }
}

std::vector<double> system_true_coefficients(int id) {
  switch (id) {
    case 1: return {0.2, 0.4};        // [z coefficient, intercept]
    case 2: return {0.2, 0.1, 0.3};   // [ylag1, ylag2, intercept]
    case 3: return {0.4, 0.2, 0.6};   // [ylag1, ylag2, intercept]
    default: throw InvalidArgument("system_true_coefficients: id must be 1, 2 or 3");
  }
}

std::vector<Index> system_linear_coords(int id) {
  switch (id) {
    case 1: return {0};
    case 2:
    case 3: return {2, 3};
    default: throw InvalidArgument("system_linear_coords: id must be 1, 2 or 3");
  }
}

std::vector<Index> system_kernel_coords(int id) {
  switch (id) {
    case 1: return {1, 2};
    case 2:
    case 3: return {0, 1};
    default: throw InvalidArgument("system_kernel_coords: id must be 1, 2 or 3");
  }
}

}  // namespace detreg
