#pragma once

#include <cmath>
#include <span>
#include <variant>

#include "prescript/cost.hpp"
#include "prescript/dataset.hpp"
#include "prescript/honest_forest.hpp"
#include "prescript/honest_tree.hpp"
#include "prescript/linear.hpp"
#include "prescript/weights.hpp"

namespace prescript {

// lambda1 multiplies sqrt(V) with V = sigma2 * sum w_i^2 (homoscedastic); lambda2
// multiplies B. sigma2 is kept separate so it can also be folded into lambda1
// by setting sigma2 = 1.
struct PenaltyConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double sigma2 = 1.0;
  ObjectiveMode mode = ObjectiveMode::plain;

  void validate() const {
    for (double v : {lambda1, lambda2, sigma2})
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error("penalty parameters must be finite and nonnegative");
  }
};

// Objective value with its parts. mean_term is mu (plain) or mu^2 (squared_mean).
struct ObjectiveValue {
  double value = 0.0;
  double mean_term = 0.0;
  double mu = 0.0;
  double sqrt_v = 0.0;
  double bias = 0.0;
};

inline double combine(const PenaltyConfig& cfg, double mu, double sum_sq_weights, double bias, ObjectiveValue* parts) {
  const double mean_term = cfg.mode == ObjectiveMode::plain ? mu : mu * mu;
  const double sqrt_v = std::sqrt(cfg.sigma2 * sum_sq_weights);
  const double value = mean_term + cfg.lambda1 * sqrt_v + cfg.lambda2 * bias;
  if (parts) *parts = {value, mean_term, mu, sqrt_v, bias};
  return value;
}

// Row-major copies of the training features and outcomes for tight loops.
struct TrainingView {
  FeatureMatrix features;  // n x (d+p)
  FeatureMatrix outcomes;  // n x q
  std::size_t covariate_dim = 0;
  std::size_t decision_dim = 0;

  TrainingView() = default;
  explicit TrainingView(const ObservationalDataset& ds)
      : features(ds.feature_matrix()),
        outcomes(ds.outcomes),
        covariate_dim(ds.covariate_dim()),
        decision_dim(ds.decision_dim()) {}

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  [[nodiscard]] std::size_t feature_dim() const { return covariate_dim + decision_dim; }
  [[nodiscard]] std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * feature_dim(), feature_dim()};
  }
  [[nodiscard]] std::span<const double> outcome_row(std::size_t i) const {
    const auto q = static_cast<std::size_t>(outcomes.cols());
    return {outcomes.data() + i * q, q};
  }
};

// Sums mu, sum w^2 and B over weighted rows. for_each(fn) must call fn(i, w)
// once per nonzero weight. query is the concatenated (x, z).
template <typename ForEach>
ObjectiveValue evaluate_weighted(const TrainingView& tv, const CostFunction& cost, const PenaltyConfig& cfg,
                                 std::span<const double> query, ForEach&& for_each) {
  const auto z = query.subspan(tv.covariate_dim);
  const std::size_t dim = tv.feature_dim();
  double mu = 0.0, ss = 0.0, bias = 0.0;
  for_each([&](std::uint32_t i, double w) {
    mu += w * cost(z, tv.outcome_row(i));
    ss += w * w;
    const double* row = tv.features.data() + static_cast<std::size_t>(i) * dim;
    double d2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = row[k] - query[k];
      d2 += diff * diff;
    }
    bias += w * std::sqrt(d2);
  });
  ObjectiveValue out;
  combine(cfg, mu, ss, bias, &out);
  return out;
}

// mu_hat(x, z) = sum_i w_i c(z; Y_i)
inline double predicted_cost(const WeightVector& w, const CostFunction& cost, const VectorXd& z,
                             const ObservationalDataset& ds) {
  std::vector<double> zb(z.data(), z.data() + z.size());
  std::vector<double> y(ds.outcome_dim());
  double s = 0.0;
  for (std::size_t k = 0; k < w.index.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(w.index[k]);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = ds.outcomes(i, static_cast<Eigen::Index>(j));
    s += w.weight[k] * cost(zb, y);
  }
  return s;
}

// V = sigma^2 * sum_i w_i^2
inline double variance_penalty(const WeightVector& w, double sigma2) {
  if (sigma2 < 0.0) throw Error("noise variance must be nonnegative");
  return sigma2 * w.sum_squares();
}

// B = sum_i w_i ||(X_i, Z_i) - (x, z)||
inline double bias_penalty(const WeightVector& w, const FeaturePoint& q, const ObservationalDataset& ds) {
  const VectorXd v = q.concat();
  if (static_cast<std::size_t>(v.size()) != ds.feature_dim()) throw Error("query dimension does not match dataset");
  double s = 0.0;
  for (std::size_t k = 0; k < w.index.size(); ++k) s += w.weight[k] * (ds.feature_row(w.index[k]) - v).norm();
  return s;
}

// plain:        mu + lambda1 sqrt(V) + lambda2 B
// squared_mean: mu^2 + lambda1 sqrt(V) + lambda2 B, penalties outside the square
inline ObjectiveValue penalized_objective(const WeightVector& w, const FeaturePoint& q, const CostFunction& cost,
                                          const ObservationalDataset& ds, const PenaltyConfig& cfg) {
  cfg.validate();
  ObjectiveValue out;
  combine(cfg, predicted_cost(w, cost, q.z, ds), w.sum_squares(), bias_penalty(w, q, ds), &out);
  return out;
}

// ---------------------------------------------------------------------------
// Noise variance

struct LearnerSpec {
  enum class Kind { ols, cart, forest } kind = Kind::forest;
  TreeParams tree;
  ForestParams forest;
};

struct NoiseEstimate {
  double sigma2 = 0.0;
  bool fallback = false;  // sample variance of the target was used instead
};

inline double sample_variance(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

// Training mean squared error of a model fitted to predict the target from (X, Z).
inline NoiseEstimate estimate_noise_variance(const ObservationalDataset& train, const VectorXd& target,
                                             const LearnerSpec& spec) {
  if (train.rows() == 0) throw Error("noise estimation needs data");
  try {
    double sse = 0.0;
    const auto n = train.rows();
    switch (spec.kind) {
      case LearnerSpec::Kind::ols: {
        const auto m = fit_ols(train, target);
        const MatrixXd a = detail::design_matrix(train);
        sse = (target - a * m.beta).squaredNorm();
        break;
      }
      case LearnerSpec::Kind::cart: {
        const auto m = fit_honest_cart(train, target, spec.tree);
        for (std::size_t i = 0; i < n; ++i) {
          const VectorXd f = train.feature_row(i);
          const auto& members = m.leaf_members[m.route({f.data(), static_cast<std::size_t>(f.size())})];
          double pred = 0.0;
          for (auto j : members) pred += target[j];
          pred /= static_cast<double>(members.size());
          sse += (target[static_cast<Eigen::Index>(i)] - pred) * (target[static_cast<Eigen::Index>(i)] - pred);
        }
        break;
      }
      case LearnerSpec::Kind::forest: {
        const auto m = fit_honest_forest(train, target, spec.forest);
        for (std::size_t i = 0; i < n; ++i) {
          const VectorXd f = train.feature_row(i);
          FeaturePoint q{f.head(static_cast<Eigen::Index>(train.covariate_dim())),
                         f.tail(static_cast<Eigen::Index>(train.decision_dim()))};
          const double r = target[static_cast<Eigen::Index>(i)] - forest_predict(m, target, q);
          sse += r * r;
        }
        break;
      }
    }
    const double mse = sse / static_cast<double>(n);
    if (!std::isfinite(mse)) return {sample_variance(target), true};
    return {mse, false};
  } catch (const Error&) {
    return {sample_variance(target), true};
  }
}

inline NoiseEstimate estimate_noise_variance(const ObservationalDataset& train, const LearnerSpec& spec) {
  return estimate_noise_variance(train, outcome_target(train), spec);
}

}  // namespace prescript
