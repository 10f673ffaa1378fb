#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "prescript/experiments/benchmark.hpp"
#include "prescript/experiments/consistency.hpp"

namespace prescript {
namespace {

TEST(Pricing, DemandAtTens) {
  const VectorXd x = VectorXd::Constant(2, 10.0), z = VectorXd::Constant(5, 10.0);
  const VectorXd mu = pricing::demand(x, z);
  // 500 - 10 - 10 - 10 - 10, and the other four by the same substitution
  EXPECT_DOUBLE_EQ(mu[0], 460.0);
  EXPECT_DOUBLE_EQ(mu[1], 460.0);
  EXPECT_DOUBLE_EQ(mu[2], 490.0);
  EXPECT_DOUBLE_EQ(mu[3], 490.0);
  EXPECT_DOUBLE_EQ(mu[4], 470.0);
  EXPECT_DOUBLE_EQ(pricing::true_revenue(x, z), 23700.0);
  EXPECT_DOUBLE_EQ(pricing::true_revenue(x, VectorXd::Zero(5)), 0.0);
}

TEST(Pricing, RevenueIsCubicPerCoordinate) {
  const VectorXd x = VectorXd::Constant(2, 9.5);
  VectorXd z = VectorXd::Constant(5, 20.0);
  for (Eigen::Index k = 0; k < 5; ++k) {
    auto f = [&](double t) {
      VectorXd zz = z;
      zz[k] = t;
      return pricing::true_revenue(x, zz);
    };
    // demand is quadratic in z_k, so z_k mu_k has leading term -z_k^3 / 10:
    // unit-step third difference -6 / 10, fourth difference 0
    EXPECT_NEAR(f(3) - 3 * f(2) + 3 * f(1) - f(0), -0.6, 1e-9);
    EXPECT_NEAR(f(4) - 4 * f(3) + 6 * f(2) - 4 * f(1) + f(0), 0.0, 1e-9);
  }
}

TEST(Pricing, PriceMeansFollowLoadings) {
  const auto ds = pricing::generate_data(20000, 4);
  for (Eigen::Index k = 0; k < 5; ++k) {
    const double target = pricing::kPriceLoadings[static_cast<std::size_t>(k)][0] * ds.covariates.col(0).mean() +
                          pricing::kPriceLoadings[static_cast<std::size_t>(k)][1] * ds.covariates.col(1).mean();
    EXPECT_NEAR(ds.decisions.col(k).mean(), target, 3 * 10.0 / std::sqrt(20000.0));
  }
}

TEST(Pricing, CovariateMoments) {
  const auto ds = pricing::generate_data(100000, 5);
  const double se_mean = 1.0 / std::sqrt(1e5);
  const double se_var = std::sqrt(2.0 / 1e5);
  for (Eigen::Index k = 0; k < 2; ++k) {
    const auto c = ds.covariates.col(k);
    const double m = c.mean();
    const double v = (c.array() - m).square().sum() / (1e5 - 1);
    EXPECT_NEAR(m, 10.0, 3 * se_mean);
    EXPECT_NEAR(v, 1.0, 3 * se_var);
  }
}

TEST(Pricing, Deterministic) {
  const auto a = pricing::generate_data(50, 9), b = pricing::generate_data(50, 9);
  EXPECT_EQ(a.covariates, b.covariates);
  EXPECT_EQ(a.decisions, b.decisions);
  EXPECT_EQ(a.outcomes, b.outcomes);
}

TEST(Dosing, HistoricalDoseLaw) {
  std::mt19937_64 rng(1);
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = dosing::historical_dose(2.0, false, rng);
    s += z;
    ss += z * z;
  }
  const double m = s / n, sd = std::sqrt(ss / n - m * m);
  EXPECT_NEAR(m, 60.0, 3 * 8.0 / std::sqrt(n));
  EXPECT_NEAR(sd, 8.0, 3 * 8.0 / std::sqrt(2.0 * n));
}

TEST(Dosing, FallbackIntervals) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5000; ++i) {
    const double z = dosing::historical_dose(0.0, true, rng);
    EXPECT_GE(z, 10.0);
    EXPECT_LE(z, 50.0);
    const double w = dosing::historical_dose(-4.0, false, rng);  // mean -30: the U[0, 20] fallback
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 20.0);
  }
}

TEST(Dosing, ResponseCapProbability) {
  std::mt19937_64 rng(3);
  const int n = 100000;
  int top = 0;
  for (int i = 0; i < n; ++i) {
    const double r = dosing::response(50.0, 30.0, rng);
    EXPECT_LE(std::abs(r), 40.0);
    if (r == 40.0) ++top;
  }
  // P(N(20, 400) > 40) = 1 - Phi(1)
  const double p = normal_sf(1.0);
  EXPECT_NEAR(static_cast<double>(top) / n, p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(Dosing, GeneratedDataRespectsLaws) {
  const auto d = dosing::generate_data(2000, {}, 4);
  for (Eigen::Index i = 0; i < d.data.outcomes.rows(); ++i) {
    EXPECT_LE(std::abs(d.data.outcomes(i, 0)), 40.0);
    if (d.data.covariates(i, 1) != 0.0) {
      EXPECT_GE(d.data.decisions(i, 0), 10.0);
      EXPECT_LE(d.data.decisions(i, 0), 50.0);
    }
    EXPECT_GE(d.data.decisions(i, 0), 0.0);
  }
  const auto again = dosing::generate_data(2000, {}, 4);
  EXPECT_EQ(d.data.decisions, again.data.decisions);
  EXPECT_EQ(d.optimal, again.optimal);
}

TEST(Wilcoxon, TextbookSmallSample) {
  const std::vector<double> d{1, 1, 1, -1};
  const auto r = wilcoxon_signed_rank(d);
  EXPECT_DOUBLE_EQ(r.w_plus, 7.5);
  EXPECT_DOUBLE_EQ(r.w_minus, 2.5);
  EXPECT_TRUE(r.exact);
  // 16 equally likely sign patterns, W+ = 2.5 k; P(k >= 3) = 5/16
  EXPECT_DOUBLE_EQ(r.p_value, 10.0 / 16.0);
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(d, Alternative::greater).p_value, 5.0 / 16.0);
}

// Brute-force enumeration over all 2^n sign patterns.
double enumerate_p(const std::vector<double>& d, Alternative alt) {
  std::vector<double> mag;
  for (double v : d)
    if (v != 0) mag.push_back(std::abs(v));
  const auto ranks = average_ranks(mag);
  double obs = 0.0;
  std::size_t k = 0;
  for (double v : d)
    if (v != 0) {
      if (v > 0) obs += ranks[k];
      ++k;
    }
  const std::size_t n = mag.size();
  double up = 0, lo = 0;
  for (std::size_t mask = 0; mask < (1u << n); ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) w += ranks[i];
    if (w >= obs - 1e-9) ++up;
    if (w <= obs + 1e-9) ++lo;
  }
  up /= static_cast<double>(1u << n);
  lo /= static_cast<double>(1u << n);
  if (alt == Alternative::greater) return up;
  if (alt == Alternative::less) return lo;
  return std::min(1.0, 2 * std::min(up, lo));
}

TEST(Wilcoxon, ExactMatchesEnumeration) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> v(-4, 6);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> d(1 + static_cast<std::size_t>(t % 10));
    for (auto& x : d) x = v(rng);
    for (auto alt : {Alternative::two_sided, Alternative::greater, Alternative::less})
      EXPECT_NEAR(wilcoxon_signed_rank(d, alt).p_value, enumerate_p(d, alt), 1e-12);
  }
}

TEST(Wilcoxon, NormalApproximationNearExact) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(0.3, 1.0);
  std::vector<double> d(25);
  for (auto& x : d) x = nd(rng);
  const double exact = wilcoxon_signed_rank(d, Alternative::two_sided, 25).p_value;
  const auto approx = wilcoxon_signed_rank(d, Alternative::two_sided, 0);
  EXPECT_FALSE(approx.exact);
  EXPECT_NEAR(approx.p_value, exact, 0.01);
}

TEST(Wilcoxon, Bonferroni) {
  EXPECT_DOUBLE_EQ(bonferroni(0.02, 3), 0.06);
  EXPECT_DOUBLE_EQ(bonferroni(0.6, 3), 1.0);
}

BenchmarkConfig small_pricing() {
  BenchmarkConfig c;
  c.experiment = "pricing";
  c.methods = {"rf", "up-rf"};
  c.n_values = {100};
  c.replications = 3;
  c.test_points = 10;
  c.selection = LambdaSelection::fixed;
  c.lambda1 = 1.0;
  c.lambda2 = 50.0;
  c.forest.trees = 5;
  c.search.restarts = 1;
  c.search.grid_points = 11;
  return c;
}

TEST(Benchmark, PricingMetricIsTrueRevenue) {
  const auto cfg = small_pricing();
  const auto rep = run_benchmark(cfg);
  const Experiment exp(cfg);
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    ReplicationRunner runner(cfg, exp, 100, r);
    const auto zs = runner.prescribe("rf", 1.0, 50.0);
    double s = 0.0;
    for (Eigen::Index i = 0; i < exp.test_covariates().rows(); ++i)
      s += pricing::true_revenue(exp.test_covariates().row(i).transpose(), zs[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(rep.at(100).methods.at("up-rf").values[r], s / 10.0, 1e-9);
  }
}

TEST(Benchmark, ReportIsDeterministic) {
  const auto cfg = small_pricing();
  const auto a = report_to_json(run_benchmark(cfg)).dump();
  auto cfg2 = cfg;
  cfg2.workers = 3;
  const auto b = report_to_json(run_benchmark(cfg2)).dump();
  const auto ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
  EXPECT_EQ(ja.at("results"), jb.at("results"));
  EXPECT_EQ(a, report_to_json(run_benchmark(cfg)).dump());
}

TEST(Benchmark, CurvesCsvShape) {
  const auto rep = run_benchmark(small_pricing());
  std::ostringstream os;
  write_curves_csv(os, rep);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "method,n,replication,metric");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6u);
}

TEST(Benchmark, ComparisonPValuesInRange) {
  const auto rep = run_benchmark(small_pricing());
  ASSERT_EQ(rep.at(100).comparisons.size(), 1u);
  const auto& c = rep.at(100).comparisons[0];
  EXPECT_GE(c.two_sided.p_value, 0.0);
  EXPECT_LE(c.two_sided.p_value, 1.0);
  EXPECT_EQ(c.treatment, "up-rf");
  EXPECT_EQ(c.baseline, "rf");
}

TEST(Benchmark, ConfigValidation) {
  EXPECT_THROW((void)benchmark_config_from_json({{"experiment", "weather"}}), Error);
  EXPECT_THROW((void)benchmark_config_from_json({{"methods", {"svm"}}}), Error);
  EXPECT_THROW((void)benchmark_config_from_json({{"methods", {"constant-dose"}}}), Error);
  const auto c = benchmark_config_from_json({{"experiment", "dosing"}});
  EXPECT_EQ(c.methods.size(), 8u);
  EXPECT_TRUE(c.normalize);
  const auto round = benchmark_config_from_json(benchmark_config_to_json(c));
  EXPECT_EQ(config_fingerprint(round), config_fingerprint(c));
}

BenchmarkConfig small_dosing() {
  auto c = benchmark_config_from_json({{"experiment", "dosing"}});
  c.methods = {"cart", "constant-dose", "oracle-lb"};
  c.n_values = {200};
  c.replications = 2;
  c.test_points = 50;
  c.tree.min_leaf = 10;
  c.forest.trees = 5;
  c.oracle.trees = 5;
  return c;
}

TEST(Benchmark, ConstantDoseIsThirtyFive) {
  const auto cfg = small_dosing();
  const auto rep = run_benchmark(cfg);
  const auto patients = dosing::generate_patients(50, cfg.dosing, derive_seed(cfg.seed, kTestStream));
  const double expected = (patients.optimal.array() - 35.0).square().mean();
  for (double v : rep.at(200).methods.at("constant-dose").values) EXPECT_NEAR(v, expected, 1e-9);
}

TEST(Sensitivity, ZeroCellEqualsUnpenalized) {
  const auto cfg = small_dosing();
  const auto rep = run_benchmark(cfg);
  const auto cells = sensitivity_grid(cfg, "cart", {0.0, 1.0}, {0.0, 2.0});
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[0].lambda1, 0.0);
  EXPECT_EQ(cells[0].lambda2, 0.0);
  EXPECT_EQ(cells[0].values, rep.at(200).methods.at("cart").values);
  std::ostringstream os;
  write_sensitivity_csv(os, cells);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "n,lambda1,lambda2,replications,mean_metric,stderr");
}

TEST(Consistency, RowsAndMedians) {
  ConsistencyConfig cfg;
  cfg.n_values = {100, 400};
  cfg.seeds = 3;
  cfg.test_points = 20;
  const auto rows = consistency_experiment(cfg);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].min_leaf, 10u);
  EXPECT_EQ(rows[1].min_leaf, 20u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.regrets.size(), 3u);
    EXPECT_DOUBLE_EQ(r.median, median_of(r.regrets));
  }
}

}  // namespace
}  // namespace prescript
