#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prescript/core.hpp"

namespace prescript {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Per-column affine scaler for covariates. Constant columns are flagged and
// pass through untouched.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> constant;

  [[nodiscard]] double forward(std::size_t j, double v) const {
    return constant[j] ? v : (v - mean[j]) / stddev[j];
  }
  [[nodiscard]] double inverse(std::size_t j, double v) const {
    return constant[j] ? v : v * stddev[j] + mean[j];
  }
  [[nodiscard]] VectorXd forward(const VectorXd& x) const {
    VectorXd out(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) out[j] = forward(static_cast<std::size_t>(j), x[j]);
    return out;
  }
};

// n records of (X_i, Z_i, Y_i). Immutable once built; share freely across threads.
struct ObservationalDataset {
  MatrixXd covariates;  // n x d
  MatrixXd decisions;   // n x p
  MatrixXd outcomes;    // n x q
  std::vector<std::string> covariate_names;
  std::vector<std::string> decision_names;
  std::vector<std::string> outcome_names;
  std::optional<Scaler> normalization;

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(decisions.rows()); }
  [[nodiscard]] std::size_t covariate_dim() const { return static_cast<std::size_t>(covariates.cols()); }
  [[nodiscard]] std::size_t decision_dim() const { return static_cast<std::size_t>(decisions.cols()); }
  [[nodiscard]] std::size_t outcome_dim() const { return static_cast<std::size_t>(outcomes.cols()); }
  [[nodiscard]] std::size_t feature_dim() const { return covariate_dim() + decision_dim(); }

  // Concatenated (X_i, Z_i).
  [[nodiscard]] VectorXd feature_row(std::size_t i) const {
    VectorXd v(static_cast<Eigen::Index>(feature_dim()));
    const auto d = covariates.cols();
    const auto r = static_cast<Eigen::Index>(i);
    if (d > 0) v.head(d) = covariates.row(r).transpose();
    v.tail(decisions.cols()) = decisions.row(r).transpose();
    return v;
  }

  // Row-major n x (d+p) copy of the joint feature matrix.
  [[nodiscard]] Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> feature_matrix() const {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f(decisions.rows(),
                                                                             static_cast<Eigen::Index>(feature_dim()));
    if (covariates.cols() > 0) f.leftCols(covariates.cols()) = covariates;
    f.rightCols(decisions.cols()) = decisions;
    return f;
  }

  void validate() const {
    const auto n = decisions.rows();
    if (n < 1) throw Error("dataset has no rows");
    if (covariates.rows() != n || outcomes.rows() != n)
      throw Error("covariate, decision and outcome blocks disagree on row count");
    if (decisions.cols() < 1) throw Error("dataset needs at least one decision column");
    if (!covariates.allFinite() || !decisions.allFinite() || !outcomes.allFinite())
      throw Error("dataset contains non-finite entries");
  }

  [[nodiscard]] ObservationalDataset subset(std::span<const std::size_t> idx) const {
    ObservationalDataset out;
    const auto m = static_cast<Eigen::Index>(idx.size());
    out.covariates.resize(m, covariates.cols());
    out.decisions.resize(m, decisions.cols());
    out.outcomes.resize(m, outcomes.cols());
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto src = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]);
      out.covariates.row(r) = covariates.row(src);
      out.decisions.row(r) = decisions.row(src);
      out.outcomes.row(r) = outcomes.row(src);
    }
    out.covariate_names = covariate_names;
    out.decision_names = decision_names;
    out.outcome_names = outcome_names;
    out.normalization = normalization;
    return out;
  }
};

// A query point; the distance between two points is the norm of the concatenated difference.
struct FeaturePoint {
  VectorXd x;
  VectorXd z;

  [[nodiscard]] VectorXd concat() const {
    VectorXd v(x.size() + z.size());
    v << x, z;
    return v;
  }
  [[nodiscard]] double distance(const FeaturePoint& other) const { return (concat() - other.concat()).norm(); }
};

struct LinearConstraint {
  VectorXd a;
  double b = 0.0;  // a.z <= b
};

// Bounded box plus optional a.z <= b constraints.
struct DecisionSpace {
  VectorXd lower;
  VectorXd upper;
  std::vector<LinearConstraint> constraints;

  DecisionSpace() = default;
  DecisionSpace(VectorXd lo, VectorXd hi, std::vector<LinearConstraint> cons = {})
      : lower(std::move(lo)), upper(std::move(hi)), constraints(std::move(cons)) {
    validate();
  }

  static DecisionSpace box(std::size_t p, double lo, double hi) {
    return {VectorXd::Constant(static_cast<Eigen::Index>(p), lo), VectorXd::Constant(static_cast<Eigen::Index>(p), hi)};
  }

  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }

  void validate() const {
    if (lower.size() != upper.size() || lower.size() == 0) throw Error("decision space bounds have mismatched length");
    for (Eigen::Index k = 0; k < lower.size(); ++k) {
      if (!std::isfinite(lower[k]) || !std::isfinite(upper[k])) throw Error("decision space must be bounded");
      if (lower[k] > upper[k]) throw Error("decision space lower bound exceeds upper bound");
    }
    for (const auto& c : constraints)
      if (c.a.size() != lower.size()) throw Error("linear constraint has wrong dimension");
  }

  [[nodiscard]] double diameter() const { return (upper - lower).norm(); }
  [[nodiscard]] VectorXd center() const { return 0.5 * (lower + upper); }

  [[nodiscard]] bool in_box(const VectorXd& z, double tol = 1e-9) const {
    for (Eigen::Index k = 0; k < z.size(); ++k)
      if (z[k] < lower[k] - tol || z[k] > upper[k] + tol) return false;
    return true;
  }
  [[nodiscard]] bool satisfies_constraints(const VectorXd& z, double tol = 1e-9) const {
    return std::all_of(constraints.begin(), constraints.end(),
                       [&](const LinearConstraint& c) { return c.a.dot(z) <= c.b + tol; });
  }
  [[nodiscard]] bool contains(const VectorXd& z, double tol = 1e-9) const {
    return in_box(z, tol) && satisfies_constraints(z, tol);
  }

  [[nodiscard]] VectorXd clamp(const VectorXd& z) const { return z.cwiseMax(lower).cwiseMin(upper); }

  // Feasible interval of coordinate k with the others held at z. Returns
  // {lo, hi} with lo > hi when empty.
  [[nodiscard]] std::pair<double, double> coordinate_interval(const VectorXd& z, Eigen::Index k) const {
    double lo = lower[k];
    double hi = upper[k];
    for (const auto& c : constraints) {
      const double slack = c.b - (c.a.dot(z) - c.a[k] * z[k]);
      if (c.a[k] > 0) {
        hi = std::min(hi, slack / c.a[k]);
      } else if (c.a[k] < 0) {
        lo = std::max(lo, slack / c.a[k]);
      } else if (slack < -1e-12) {
        return {1.0, 0.0};
      }
    }
    return {lo, hi};
  }

  // Box projection followed by bisection toward the box center until the
  // linear constraints hold. Throws when the center itself is infeasible.
  [[nodiscard]] VectorXd project(const VectorXd& z) const {
    VectorXd p = clamp(z);
    if (constraints.empty() || satisfies_constraints(p, 0.0)) return p;
    const VectorXd c = center();
    if (!satisfies_constraints(c, 0.0)) throw Error("decision space infeasible: box center violates constraints");
    double feasible = 0.0;  // fraction toward p
    double infeasible = 1.0;
    for (int it = 0; it < 200 && infeasible - feasible > 1e-15; ++it) {
      const double mid = 0.5 * (feasible + infeasible);
      if (satisfies_constraints(c + mid * (p - c), 0.0))
        feasible = mid;
      else
        infeasible = mid;
    }
    return c + feasible * (p - c);
  }
};

// ---------------------------------------------------------------------------
// CSV ingestion

enum class ColumnRole { covariate, decision, outcome, ignore };

inline ColumnRole parse_role(std::string_view s) {
  if (s == "covariate") return ColumnRole::covariate;
  if (s == "decision") return ColumnRole::decision;
  if (s == "outcome") return ColumnRole::outcome;
  if (s == "ignore") return ColumnRole::ignore;
  throw Error("unknown column role: " + std::string(s));
}

// Ordered column -> role mapping. Order fixes the column order of each block.
struct Schema {
  std::vector<std::pair<std::string, ColumnRole>> columns;

  static Schema from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw Error("schema must be a JSON object {column: role}");
    Schema s;
    for (const auto& [name, role] : j.items()) s.columns.emplace_back(name, parse_role(role.get<std::string>()));
    return s;
  }
  static Schema from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open schema file: " + path);
    return from_json(nlohmann::ordered_json::parse(in));
  }
};

struct ColumnStats {
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::vector<ColumnStats> columns;

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["rows_read"] = rows_read;
    j["rows_dropped"] = rows_dropped;
    j["columns"] = nlohmann::ordered_json::array();
    for (const auto& c : columns)
      j["columns"].push_back({{"name", c.name}, {"count", c.count}, {"mean", c.mean}, {"min", c.min}, {"max", c.max}});
    return j;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == ',' && !quoted) {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(line.substr(start)));
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

struct LoadedDataset {
  ObservationalDataset data;
  LoadReport report;
};

// Parses CSV text with a header row. Rows with an unparsable or missing value
// in any schema column (other than ignored ones) are dropped and counted.
inline LoadedDataset parse_dataset(std::istream& in, const Schema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error("CSV input is empty (header row required)");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = detail::split_csv_line(line);

  std::vector<std::size_t> position;
  std::vector<std::string> cov_names, dec_names, out_names;
  std::vector<ColumnRole> roles;
  for (const auto& [name, role] : schema.columns) {
    if (role == ColumnRole::ignore) continue;
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("column not found: " + name);
    position.push_back(static_cast<std::size_t>(it - header.begin()));
    roles.push_back(role);
    if (role == ColumnRole::covariate) cov_names.push_back(name);
    if (role == ColumnRole::decision) dec_names.push_back(name);
    if (role == ColumnRole::outcome) out_names.push_back(name);
  }
  if (dec_names.empty()) throw Error("schema must name at least one decision column");
  if (out_names.empty()) throw Error("schema must name at least one outcome column");

  LoadReport report;
  std::vector<std::vector<double>> kept;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++report.rows_read;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(position.size());
    bool ok = true;
    for (std::size_t c = 0; c < position.size() && ok; ++c) {
      if (position[c] >= cells.size()) {
        ok = false;
        break;
      }
      auto v = detail::parse_number(cells[position[c]]);
      if (!v) ok = false;
      else row.push_back(*v);
    }
    if (!ok) {
      ++report.rows_dropped;
      continue;
    }
    kept.push_back(std::move(row));
  }
  if (kept.empty()) throw Error("no usable rows in CSV input");

  const auto n = static_cast<Eigen::Index>(kept.size());
  ObservationalDataset ds;
  ds.covariates.resize(n, static_cast<Eigen::Index>(cov_names.size()));
  ds.decisions.resize(n, static_cast<Eigen::Index>(dec_names.size()));
  ds.outcomes.resize(n, static_cast<Eigen::Index>(out_names.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index ci = 0, di = 0, oi = 0;
    for (std::size_t c = 0; c < roles.size(); ++c) {
      const double v = kept[static_cast<std::size_t>(r)][c];
      switch (roles[c]) {
        case ColumnRole::covariate: ds.covariates(r, ci++) = v; break;
        case ColumnRole::decision: ds.decisions(r, di++) = v; break;
        case ColumnRole::outcome: ds.outcomes(r, oi++) = v; break;
        case ColumnRole::ignore: break;
      }
    }
  }
  ds.covariate_names = std::move(cov_names);
  ds.decision_names = std::move(dec_names);
  ds.outcome_names = std::move(out_names);
  ds.validate();

  std::size_t col = 0;
  for (const auto& [name, role] : schema.columns) {
    if (role == ColumnRole::ignore) continue;
    ColumnStats st;
    st.name = name;
    st.count = kept.size();
    st.min = st.max = kept.front()[col];
    double sum = 0.0;
    for (const auto& row : kept) {
      sum += row[col];
      st.min = std::min(st.min, row[col]);
      st.max = std::max(st.max, row[col]);
    }
    st.mean = sum / static_cast<double>(kept.size());
    report.columns.push_back(st);
    ++col;
  }
  return {std::move(ds), std::move(report)};
}

inline LoadedDataset load_dataset(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file: " + path);
  return parse_dataset(in, schema);
}

// Writes a dataset back out as CSV (covariates, decisions, outcomes).
inline void write_dataset_csv(std::ostream& out, const ObservationalDataset& ds) {
  std::vector<std::string> names;
  names.insert(names.end(), ds.covariate_names.begin(), ds.covariate_names.end());
  names.insert(names.end(), ds.decision_names.begin(), ds.decision_names.end());
  names.insert(names.end(), ds.outcome_names.begin(), ds.outcome_names.end());
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  char buf[64];
  auto put = [&](double v, bool first) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (!first) out << ',';
    out.write(buf, end - buf);
  };
  for (Eigen::Index r = 0; r < ds.decisions.rows(); ++r) {
    bool first = true;
    for (Eigen::Index c = 0; c < ds.covariates.cols(); ++c, first = false) put(ds.covariates(r, c), first);
    for (Eigen::Index c = 0; c < ds.decisions.cols(); ++c, first = false) put(ds.decisions(r, c), first);
    for (Eigen::Index c = 0; c < ds.outcomes.cols(); ++c, first = false) put(ds.outcomes(r, c), first);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Normalization and splitting

// Standardizes each covariate column with the sample (n-1) standard deviation.
inline ObservationalDataset normalize_covariates(const ObservationalDataset& ds) {
  const auto n = ds.covariates.rows();
  if (n < 2) throw Error("normalization needs at least two rows");
  Scaler sc;
  const auto d = ds.covariates.cols();
  sc.mean.resize(static_cast<std::size_t>(d));
  sc.stddev.resize(static_cast<std::size_t>(d));
  sc.constant.resize(static_cast<std::size_t>(d));
  ObservationalDataset out = ds;
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto col = ds.covariates.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    const auto u = static_cast<std::size_t>(j);
    sc.mean[u] = mean;
    sc.stddev[u] = sd;
    sc.constant[u] = !(sd > 0.0);
    if (!sc.constant[u]) out.covariates.col(j) = (col.array() - mean) / sd;
  }
  out.normalization = std::move(sc);
  return out;
}

inline ObservationalDataset inverse_transform_covariates(const ObservationalDataset& ds) {
  if (!ds.normalization) return ds;
  ObservationalDataset out = ds;
  const auto& sc = *ds.normalization;
  for (Eigen::Index j = 0; j < ds.covariates.cols(); ++j)
    for (Eigen::Index r = 0; r < ds.covariates.rows(); ++r)
      out.covariates(r, j) = sc.inverse(static_cast<std::size_t>(j), ds.covariates(r, j));
  out.normalization.reset();
  return out;
}

// Applies a stored scaler to another dataset's covariates (e.g. a test set).
inline ObservationalDataset apply_normalization(const ObservationalDataset& ds, const Scaler& sc) {
  ObservationalDataset out = ds;
  for (Eigen::Index j = 0; j < ds.covariates.cols(); ++j)
    for (Eigen::Index r = 0; r < ds.covariates.rows(); ++r)
      out.covariates(r, j) = sc.forward(static_cast<std::size_t>(j), ds.covariates(r, j));
  out.normalization = sc;
  return out;
}

struct DataSplit {
  ObservationalDataset train;
  ObservationalDataset validation;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> validation_index;
};

inline DataSplit train_validation_split(const ObservationalDataset& ds, double validation_fraction,
                                        std::uint64_t seed) {
  const std::size_t n = ds.rows();
  if (n < 2) throw Error("splitting needs at least two rows");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw Error("validation fraction must lie in (0, 1)");
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) throw Error("validation fraction yields an empty part");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  DataSplit s;
  s.validation_index.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train_index.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.validation_index.begin(), s.validation_index.end());
  std::sort(s.train_index.begin(), s.train_index.end());
  s.train = ds.subset(s.train_index);
  s.validation = ds.subset(s.validation_index);
  return s;
}

}  // namespace prescript
