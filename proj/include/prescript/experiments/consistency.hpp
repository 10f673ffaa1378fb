#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "prescript/optimize.hpp"
#include "prescript/stats.hpp"

namespace prescript {

// One covariate x ~ U[0, 1], decision z in [0, 1], cost Y = (z - g(x))^2 + noise
// with g(x) = 0.2 + 0.6 x. Historical decisions are confounded with x:
// Z = clip(0.8 - 0.6 x + N(0, spread^2), 0, 1).
struct ConsistencyConfig {
  std::vector<std::size_t> n_values{200, 800, 3200};
  std::size_t seeds = 20;
  std::size_t test_points = 200;
  double noise = 0.1;
  double spread = 0.2;
  double lambda1 = 1.0;
  double lambda2 = 0.5;
  double leaf_scale = 1.0;     // gamma_n = ceil(leaf_scale * n^leaf_exponent)
  double leaf_exponent = 0.5;
  std::uint64_t seed = 1;
};

struct ConsistencyRow {
  std::size_t n = 0;
  std::size_t min_leaf = 0;
  std::vector<double> regrets;  // mean test regret per seed
  double median = 0.0;
};

inline double consistency_target(double x) { return 0.2 + 0.6 * x; }

inline ObservationalDataset consistency_data(std::size_t n, const ConsistencyConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ObservationalDataset ds;
  const auto rows = static_cast<Eigen::Index>(n);
  ds.covariates.resize(rows, 1);
  ds.decisions.resize(rows, 1);
  ds.outcomes.resize(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double x = unif(rng);
    const double z = std::clamp(0.8 - 0.6 * x + cfg.spread * normal(rng), 0.0, 1.0);
    const double g = consistency_target(x);
    ds.covariates(i, 0) = x;
    ds.decisions(i, 0) = z;
    ds.outcomes(i, 0) = (z - g) * (z - g) + cfg.noise * normal(rng);
  }
  ds.covariate_names = {"x"};
  ds.decision_names = {"z"};
  ds.outcome_names = {"y"};
  return ds;
}

// UP-CART regret mu(x, z_hat) - min_z mu(x, z) = (z_hat - g(x))^2 averaged over
// an evenly spaced test grid in x.
inline std::vector<ConsistencyRow> consistency_experiment(const ConsistencyConfig& cfg, std::size_t workers = 1) {
  const auto space = DecisionSpace::box(1, 0.0, 1.0);
  std::vector<ConsistencyRow> rows;
  for (auto n : cfg.n_values) {
    ConsistencyRow row;
    row.n = n;
    row.min_leaf = static_cast<std::size_t>(std::ceil(cfg.leaf_scale * std::pow(static_cast<double>(n), cfg.leaf_exponent)));
    row.regrets.resize(cfg.seeds);
    parallel_for(cfg.seeds, workers, [&](std::size_t s) {
      const auto ds = consistency_data(n, cfg, derive_seed(cfg.seed, n, s));
      TreeParams tp;
      tp.min_leaf = row.min_leaf;
      tp.seed = derive_seed(cfg.seed, n, s, 1);
      const VectorXd target = outcome_target(ds);
      const auto tree = fit_honest_cart(ds, target, tp);
      const TrainingView view(ds);
      PenaltyConfig pc;
      pc.lambda1 = cfg.lambda1;
      pc.lambda2 = cfg.lambda2;
      pc.sigma2 = cfg.noise * cfg.noise;
      const TreeOptimizer opt(tree, view, identity_cost(), pc);
      double total = 0.0;
      for (std::size_t t = 0; t < cfg.test_points; ++t) {
        const double x = (static_cast<double>(t) + 0.5) / static_cast<double>(cfg.test_points);
        const auto pres = opt.solve(VectorXd::Constant(1, x), space);
        const double e = pres.z[0] - consistency_target(x);
        total += e * e;
      }
      row.regrets[s] = total / static_cast<double>(cfg.test_points);
    });
    row.median = median_of(row.regrets);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace prescript
