#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "prescript/core.hpp"
#include "prescript/honest_tree.hpp"
#include "prescript/objective.hpp"
#include "prescript/stats.hpp"

namespace prescript {

// Constants of the finite-sample generalization bound for honest tree weights.
struct TheoryInputs {
  double max_leaves = 1;  // Gamma_n
  double min_leaf = 1;    // gamma_n
  double diameter = 1;    // D of X x Z
  double alpha = 0;       // weight Lipschitz constant within a region
  double lipschitz = 1;   // L
  double decision_dim = 1;  // p
  double delta = 0.05;

  void validate() const {
    if (!(max_leaves > 0 && min_leaf > 0 && diameter > 0 && lipschitz > 0 && decision_dim > 0))
      throw Error("theory inputs must be positive");
    if (!(alpha >= 0)) throw Error("alpha must be nonnegative");
    if (!(delta > 0 && delta < 1)) throw Error("delta must lie in (0, 1)");
  }
};

// ln K_n with K_n = Gamma_n (9 D gamma_n (alpha (L D + 1 + sqrt 2) + L (sqrt 2 + 3)))^p.
inline double log_kn(const TheoryInputs& t) {
  t.validate();
  const double s2 = std::sqrt(2.0);
  const double inner =
      9.0 * t.diameter * t.min_leaf * (t.alpha * (t.lipschitz * t.diameter + 1.0 + s2) + t.lipschitz * (s2 + 3.0));
  return std::log(t.max_leaves) + t.decision_dim * std::log(inner);
}

inline double compute_kn(const TheoryInputs& t) { return std::exp(log_kn(t)); }

struct TheoryLambdas {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

// lambda1 = 2 sqrt(ln(2 K_n / delta)), lambda2 = L.
inline TheoryLambdas theory_lambdas(const TheoryInputs& t) {
  const double arg = std::log(2.0) + log_kn(t) - std::log(t.delta);
  return {2.0 * std::sqrt(std::max(0.0, arg)), t.lipschitz};
}

// (4 / (3 gamma_n)) ln(K_n/delta) + 2 sqrt(V ln(K_n/delta)) + L B
inline double generalization_bound(const TheoryInputs& t, double variance, double bias) {
  if (variance < 0.0 || bias < 0.0) throw Error("V and B must be nonnegative");
  const double lk = log_kn(t) - std::log(t.delta);
  return 4.0 / (3.0 * t.min_leaf) * lk + 2.0 * std::sqrt(variance * std::max(0.0, lk)) + t.lipschitz * bias;
}

// ---------------------------------------------------------------------------
// Two-state selection example: m noisy N(mu, 1) actions observed m times each
// versus one deterministic action.

struct Example1Regret {
  double up = 0.0;   // uncertainty-penalized rule
  double pcm = 0.0;  // predicted-cost minimization
};

// Regrets in the state where the deterministic action costs 0 and the noisy
// ones average 1: 1 - Phi(sqrt m + lambda sqrt(ln m))^m and 1 - Phi(sqrt m)^m.
inline Example1Regret example1_analytic(int m, double lambda) {
  if (m < 1) throw Error("m must be at least 1");
  if (lambda < 0.0) throw Error("lambda must be nonnegative");
  const double md = static_cast<double>(m);
  auto one_minus_pow = [&](double a) { return -std::expm1(md * std::log1p(-normal_sf(a))); };
  return {one_minus_pow(std::sqrt(md) + lambda * std::sqrt(std::log(md))), one_minus_pow(std::sqrt(md))};
}

enum class Example1Variance { known, empirical };

struct RegretSummary {
  std::size_t count = 0;
  double mean_up = 0.0;
  double mean_pcm = 0.0;
  double se_up = 0.0;
  double se_pcm = 0.0;
};

struct Example1Simulation {
  RegretSummary overall;
  RegretSummary state_a;  // deterministic action optimal
  RegretSummary state_b;  // noisy actions optimal
};

namespace detail {

struct RegretTally {
  std::size_t n = 0;
  double up = 0.0, up_sq = 0.0, pcm = 0.0, pcm_sq = 0.0;
  void add(double ru, double rp) {
    ++n;
    up += ru;
    up_sq += ru * ru;
    pcm += rp;
    pcm_sq += rp * rp;
  }
  void merge(const RegretTally& o) {
    n += o.n;
    up += o.up;
    up_sq += o.up_sq;
    pcm += o.pcm;
    pcm_sq += o.pcm_sq;
  }
  [[nodiscard]] RegretSummary summary() const {
    RegretSummary s;
    s.count = n;
    if (n == 0) return s;
    const double nn = static_cast<double>(n);
    s.mean_up = up / nn;
    s.mean_pcm = pcm / nn;
    if (n > 1) {
      s.se_up = std::sqrt(std::max(0.0, (up_sq - nn * s.mean_up * s.mean_up) / (nn - 1.0)) / nn);
      s.se_pcm = std::sqrt(std::max(0.0, (pcm_sq - nn * s.mean_pcm * s.mean_pcm) / (nn - 1.0)) / nn);
    }
    return s;
  }
};

}  // namespace detail

// Each simulation picks a state with probability 1/2, draws m samples for
// each noisy action, and applies both rules. UP scores action j by
// mean_j + lambda sqrt(sigma_j^2 ln m / m) with sigma_0 = 0 for the
// deterministic action; sigma_j = 1 (known) or the sample variance.
// Simulations run in fixed blocks with derived seeds.
inline Example1Simulation example1_montecarlo(int m, double lambda, std::size_t n_sims, std::uint64_t seed,
                                              Example1Variance variance = Example1Variance::known,
                                              std::size_t workers = 1) {
  if (m < 1) throw Error("m must be at least 1");
  if (n_sims < 100) throw Error("n_sims must be at least 100");
  constexpr std::size_t block = 4096;
  const std::size_t blocks = (n_sims + block - 1) / block;
  std::vector<detail::RegretTally> a(blocks), b(blocks);
  const double md = static_cast<double>(m);
  const double scale = lambda * std::sqrt(std::log(md) / md);
  parallel_for(blocks, workers, [&](std::size_t blk) {
    std::mt19937_64 rng(derive_seed(seed, blk));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    const std::size_t end = std::min(n_sims, (blk + 1) * block);
    for (std::size_t s = blk * block; s < end; ++s) {
      const bool state_a = coin(rng);
      const double det_cost = state_a ? 0.0 : 1.0;
      const double noisy_mean = state_a ? 1.0 : 0.0;
      int pick_pcm = 0, pick_up = 0;
      double best_pcm = det_cost, best_up = det_cost;
      for (int j = 1; j <= m; ++j) {
        double sum = 0.0, sq = 0.0;
        for (int k = 0; k < m; ++k) {
          const double y = noisy_mean + normal(rng);
          sum += y;
          sq += y * y;
        }
        const double mean = sum / md;
        double sd = 1.0;
        if (variance == Example1Variance::empirical)
          sd = m > 1 ? std::sqrt(std::max(0.0, (sq - md * mean * mean) / (md - 1.0))) : 1.0;
        if (mean < best_pcm) {
          best_pcm = mean;
          pick_pcm = j;
        }
        const double score = mean + scale * sd;
        if (score < best_up) {
          best_up = score;
          pick_up = j;
        }
      }
      // state A: any noisy pick costs 1; otherwise picking the deterministic action costs 1
      const double r_pcm = state_a ? (pick_pcm != 0 ? 1.0 : 0.0) : (pick_pcm == 0 ? 1.0 : 0.0);
      const double r_up = state_a ? (pick_up != 0 ? 1.0 : 0.0) : (pick_up == 0 ? 1.0 : 0.0);
      (state_a ? a[blk] : b[blk]).add(r_up, r_pcm);
    }
  });
  detail::RegretTally ta, tb, all;
  for (std::size_t k = 0; k < blocks; ++k) {
    ta.merge(a[k]);
    tb.merge(b[k]);
  }
  all.merge(ta);
  all.merge(tb);
  return {all.summary(), ta.summary(), tb.summary()};
}

// ---------------------------------------------------------------------------
// Coverage of the generalization bound on a one-dimensional fixed design

struct CoverageConfig {
  std::size_t n = 400;
  std::size_t replications = 200;
  std::size_t min_leaf = 20;
  std::size_t eval_points = 201;
  double delta = 0.05;
  double amplitude = 0.3;   // mu(z) = amplitude * sin(2 pi z) on [0, 1]
  double noise_half_width = 0.5;  // uniform noise keeps |Y| <= 1
  std::uint64_t seed = 1;
};

struct CoverageResult {
  std::size_t replications = 0;
  std::size_t held = 0;
  double coverage = 0.0;
  double worst_margin = 0.0;  // max over draws and z of (mu - mu_hat) - bound
};

// Fixed design Z_i = (i + 1/2)/n; each replication redraws the noise, fits an
// honest CART and checks mu(z) - mu_hat(z) <= bound for every z on a grid.
inline CoverageResult theorem1_coverage(const CoverageConfig& cfg) {
  const double pi = std::acos(-1.0);
  const double lip = cfg.amplitude * 2.0 * pi;
  const double sigma2 = cfg.noise_half_width * cfg.noise_half_width / 3.0;
  auto mu = [&](double z) { return cfg.amplitude * std::sin(2.0 * pi * z); };

  ObservationalDataset ds;
  const auto n = static_cast<Eigen::Index>(cfg.n);
  ds.covariates.resize(n, 0);
  ds.decisions.resize(n, 1);
  ds.outcomes.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) ds.decisions(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  ds.decision_names = {"z"};
  ds.outcome_names = {"y"};

  CoverageResult res;
  res.replications = cfg.replications;
  res.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    std::mt19937_64 rng(derive_seed(cfg.seed, r));
    std::uniform_real_distribution<double> noise(-cfg.noise_half_width, cfg.noise_half_width);
    for (Eigen::Index i = 0; i < n; ++i) ds.outcomes(i, 0) = mu(ds.decisions(i, 0)) + noise(rng);
    TreeParams tp;
    tp.min_leaf = cfg.min_leaf;
    tp.seed = derive_seed(cfg.seed, r, 1);
    const auto tree = fit_honest_cart(ds, ds.outcomes.col(0), tp);
    TheoryInputs t;
    t.max_leaves = static_cast<double>(tree.leaf_count());
    t.min_leaf = static_cast<double>(tree.min_leaf_population());
    t.diameter = 1.0;
    t.alpha = 0.0;
    t.lipschitz = lip;
    t.decision_dim = 1.0;
    t.delta = cfg.delta;
    bool ok = true;
    for (std::size_t g = 0; g < cfg.eval_points; ++g) {
      const double z = static_cast<double>(g) / static_cast<double>(cfg.eval_points - 1);
      FeaturePoint q{VectorXd(0), VectorXd::Constant(1, z)};
      const auto w = tree_weights(tree, q);
      const double mu_hat = predicted_cost(w, identity_cost(), q.z, ds);
      const double v = variance_penalty(w, sigma2);
      const double b = bias_penalty(w, q, ds);
      const double margin = (mu(z) - mu_hat) - generalization_bound(t, v, b);
      res.worst_margin = std::max(res.worst_margin, margin);
      if (margin > 0.0) ok = false;
    }
    if (ok) ++res.held;
  }
  res.coverage = static_cast<double>(res.held) / static_cast<double>(std::max<std::size_t>(1, res.replications));
  return res;
}

}  // namespace prescript
