#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "prescript/objective.hpp"

namespace prescript {
namespace {

WeightVector make_weights(std::size_t n, std::vector<std::uint32_t> idx, std::vector<double> w) {
  WeightVector v;
  v.n = n;
  v.index = std::move(idx);
  v.weight = std::move(w);
  return v;
}

ObservationalDataset points(const std::vector<double>& z, const std::vector<double>& y) {
  ObservationalDataset ds;
  const auto n = static_cast<Eigen::Index>(z.size());
  ds.covariates.resize(n, 0);
  ds.decisions.resize(n, 1);
  ds.outcomes.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.decisions(i, 0) = z[static_cast<std::size_t>(i)];
    ds.outcomes(i, 0) = y[static_cast<std::size_t>(i)];
  }
  return ds;
}

FeaturePoint at(double z) { return {VectorXd(0), VectorXd::Constant(1, z)}; }

TEST(PredictedCost, HandSum) {
  const auto ds = points({0, 0}, {0, 2});
  EXPECT_DOUBLE_EQ(predicted_cost(make_weights(2, {0, 1}, {0.5, 0.5}), squared_error_cost(), VectorXd::Ones(1), ds), 1.0);
}

TEST(PredictedCost, PointMass) {
  const auto ds = points({0, 0, 0}, {4, 2, 9});
  EXPECT_DOUBLE_EQ(predicted_cost(make_weights(3, {0}, {1.0}), squared_error_cost(), VectorXd::Constant(1, 1.5), ds),
                   6.25);
}

TEST(PredictedCost, NegativeRevenueIsLinear) {
  ObservationalDataset ds;
  ds.covariates.resize(2, 0);
  ds.decisions = MatrixXd::Zero(2, 2);
  ds.outcomes.resize(2, 2);
  ds.outcomes << 10, 20, 30, 40;
  VectorXd z(2);
  z << 1.5, 2.0;
  // -z . mean(Y) = -(1.5 * 20 + 2 * 30)
  EXPECT_DOUBLE_EQ(predicted_cost(make_weights(2, {0, 1}, {0.5, 0.5}), negative_revenue_cost(), z, ds), -90.0);
}

TEST(VariancePenalty, Examples) {
  EXPECT_DOUBLE_EQ(variance_penalty(make_weights(4, {0, 1, 2, 3}, {.25, .25, .25, .25}), 1.0), 0.25);
  EXPECT_DOUBLE_EQ(variance_penalty(make_weights(4, {2}, {1.0}), 3.0), 3.0);
  const auto a = make_weights(2, {0, 1}, {0.5, 0.5});
  const auto b = make_weights(4, {0, 1, 2, 3}, {.25, .25, .25, .25});
  EXPECT_DOUBLE_EQ(variance_penalty(b, 2.0), 0.5 * variance_penalty(a, 2.0));
  EXPECT_THROW((void)variance_penalty(a, -1.0), Error);
}

TEST(BiasPenalty, Examples) {
  const auto ds = points({3, 1, 5}, {0, 0, 0});
  EXPECT_DOUBLE_EQ(bias_penalty(make_weights(3, {0}, {1.0}), at(1.0), ds), 2.0);
  EXPECT_DOUBLE_EQ(bias_penalty(make_weights(3, {0}, {1.0}), at(3.0), ds), 0.0);
  // distances 1 and 3 from z = 2
  EXPECT_DOUBLE_EQ(bias_penalty(make_weights(3, {0, 2}, {0.25, 0.75}), at(2.0), ds), 2.5);
}

TEST(PenalizedObjective, PenaltiesOff) {
  const auto ds = points({0, 1}, {1, 3});
  const auto w = make_weights(2, {0, 1}, {0.5, 0.5});
  const auto v = penalized_objective(w, at(0.5), identity_cost(), ds, {});
  EXPECT_DOUBLE_EQ(v.value, predicted_cost(w, identity_cost(), VectorXd::Constant(1, 0.5), ds));
}

TEST(PenalizedObjective, SquaredMean) {
  const auto ds = points({0, 1}, {-2, -4});
  PenaltyConfig cfg;
  cfg.mode = ObjectiveMode::squared_mean;
  EXPECT_DOUBLE_EQ(penalized_objective(make_weights(2, {0, 1}, {0.5, 0.5}), at(0.5), identity_cost(), ds, cfg).value,
                   9.0);
}

TEST(PenalizedObjective, Arithmetic) {
  // mu = 1, V = 0.25 (four equal weights, sigma^2 = 1), B = 2
  const auto ds = points({2, 2, 2, 2}, {1, 1, 1, 1});
  PenaltyConfig cfg;
  cfg.lambda1 = 2.0;
  cfg.lambda2 = 0.5;
  const auto v =
      penalized_objective(make_weights(4, {0, 1, 2, 3}, {.25, .25, .25, .25}), at(0.0), identity_cost(), ds, cfg);
  EXPECT_DOUBLE_EQ(v.mu, 1.0);
  EXPECT_DOUBLE_EQ(v.sqrt_v, 0.5);
  EXPECT_DOUBLE_EQ(v.bias, 2.0);
  EXPECT_DOUBLE_EQ(v.value, 3.0);
}

TEST(PenalizedObjective, RejectsNegativeLambda) {
  const auto ds = points({0}, {0});
  PenaltyConfig cfg;
  cfg.lambda1 = -1.0;
  EXPECT_THROW((void)penalized_objective(make_weights(1, {0}, {1.0}), at(0), identity_cost(), ds, cfg), Error);
}

TEST(EvaluateWeighted, MatchesDatasetPath) {
  const auto ds = testing::make_data(50, 2, 1, 3, [](const VectorXd& x, const VectorXd& z) { return x[0] - z[0]; });
  const TrainingView view(ds);
  const auto w = make_weights(50, {3, 7, 20}, {0.2, 0.3, 0.5});
  const FeaturePoint q{VectorXd::Constant(2, 0.4), VectorXd::Constant(1, 0.6)};
  PenaltyConfig cfg;
  cfg.lambda1 = 0.7;
  cfg.lambda2 = 1.3;
  cfg.sigma2 = 2.0;
  const VectorXd f = q.concat();
  const auto a = evaluate_weighted(view, identity_cost(), cfg, {f.data(), 3}, [&](auto&& fn) {
    for (std::size_t k = 0; k < w.index.size(); ++k) fn(w.index[k], w.weight[k]);
  });
  const auto b = penalized_objective(w, q, identity_cost(), ds, cfg);
  EXPECT_NEAR(a.value, b.value, 1e-12);
}

TEST(NoiseVariance, NoiselessOlsIsZero) {
  const auto ds = testing::make_data(100, 2, 1, 4, [](const VectorXd& x, const VectorXd& z) { return 2 * x[0] - x[1] + 3 * z[0]; });
  LearnerSpec spec;
  spec.kind = LearnerSpec::Kind::ols;
  const auto est = estimate_noise_variance(ds, spec);
  EXPECT_NEAR(est.sigma2, 0.0, 1e-10);
  EXPECT_FALSE(est.fallback);
}

TEST(NoiseVariance, ConstantTargetIsZero) {
  const auto ds = testing::make_data(100, 2, 1, 5, [](const VectorXd&, const VectorXd&) { return 7.0; });
  for (auto kind : {LearnerSpec::Kind::cart, LearnerSpec::Kind::forest}) {
    LearnerSpec spec;
    spec.kind = kind;
    spec.forest.trees = 10;
    EXPECT_NEAR(estimate_noise_variance(ds, spec).sigma2, 0.0, 1e-20);
  }
}

TEST(NoiseVariance, ForestRecoversNoiseLevel) {
  // Y = mu + N(0, 4) with n = 2000
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto ds = testing::make_data(
        2000, 2, 1, seed, [](const VectorXd& x, const VectorXd& z) { return 3 * x[0] + 2 * z[0] * x[1]; }, 2.0);
    LearnerSpec spec;
    spec.kind = LearnerSpec::Kind::forest;
    spec.forest.trees = 50;
    spec.forest.min_leaf = 10;
    spec.forest.seed = seed;
    const double s2 = estimate_noise_variance(ds, spec).sigma2;
    EXPECT_GE(s2, 2.5);
    EXPECT_LE(s2, 6.0);
  }
}

TEST(NoiseVariance, FailedFitFallsBack) {
  const auto ds = testing::make_data(4, 1, 1, 6, [](const VectorXd& x, const VectorXd&) { return x[0]; });
  LearnerSpec spec;
  spec.kind = LearnerSpec::Kind::cart;
  spec.tree.min_leaf = 10;
  const auto est = estimate_noise_variance(ds, spec);
  EXPECT_TRUE(est.fallback);
  EXPECT_NEAR(est.sigma2, sample_variance(outcome_target(ds)), 1e-15);
}

}  // namespace
}  // namespace prescript
