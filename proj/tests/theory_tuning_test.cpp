#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "prescript/theory.hpp"
#include "prescript/tuning.hpp"

namespace prescript {
namespace {

TheoryInputs unit_inputs() {
  TheoryInputs t;
  t.max_leaves = 1;
  t.min_leaf = 1;
  t.diameter = 1;
  t.alpha = 0;
  t.lipschitz = 1;
  t.decision_dim = 1;
  t.delta = 0.05;
  return t;
}

TEST(Kn, UnitSubstitution) { EXPECT_NEAR(compute_kn(unit_inputs()), 39.72792206135785, 1e-10); }

TEST(Kn, LinearInLeafCount) {
  auto t = unit_inputs();
  t.max_leaves = 7;
  const double a = compute_kn(t);
  t.max_leaves = 14;
  EXPECT_NEAR(compute_kn(t), 2 * a, 1e-9 * a);
}

TEST(Kn, ExponentLaw) {
  auto t = unit_inputs();
  const double k1 = compute_kn(t);
  t.decision_dim = 2;
  EXPECT_NEAR(compute_kn(t), k1 * k1, 1e-9 * k1 * k1);
}

TEST(Kn, MonotoneInEachInput) {
  const auto base = [] {
    auto t = unit_inputs();
    t.max_leaves = 4;
    t.min_leaf = 10;
    t.diameter = 2;
    t.alpha = 0.5;
    t.lipschitz = 3;
    return t;
  }();
  const double k = compute_kn(base);
  for (int field = 0; field < 5; ++field) {
    auto t = base;
    double* f[] = {&t.max_leaves, &t.min_leaf, &t.diameter, &t.alpha, &t.lipschitz};
    *f[field] *= 1.5;
    EXPECT_GT(compute_kn(t), k) << field;
  }
}

TEST(Kn, LogFormAvoidsOverflow) {
  auto t = unit_inputs();
  t.decision_dim = 400;
  EXPECT_TRUE(std::isfinite(log_kn(t)));
}

TEST(TheoryInputs, Validation) {
  auto t = unit_inputs();
  t.delta = 1.5;
  EXPECT_THROW((void)compute_kn(t), Error);
  t = unit_inputs();
  t.max_leaves = 0;
  EXPECT_THROW((void)compute_kn(t), Error);
}

TEST(Lambdas, Substitution) {
  const auto l = theory_lambdas(unit_inputs());
  EXPECT_NEAR(l.lambda1, 5.429892713883576, 1e-9);
  EXPECT_DOUBLE_EQ(l.lambda2, 1.0);
}

TEST(Lambdas, Lambda2IsLipschitz) {
  auto t = unit_inputs();
  t.lipschitz = 17.5;
  t.max_leaves = 30;
  EXPECT_DOUBLE_EQ(theory_lambdas(t).lambda2, 17.5);
}

TEST(Lambdas, DeltaNearOne) {
  auto t = unit_inputs();
  t.delta = 1.0 - 1e-12;
  EXPECT_NEAR(theory_lambdas(t).lambda1, 2 * std::sqrt(std::log(2 * compute_kn(t))), 1e-6);
}

TEST(Bound, PenaltiesOff) {
  auto t = unit_inputs();
  t.min_leaf = 20;
  EXPECT_NEAR(generalization_bound(t, 0, 0), 4.0 / 60.0 * std::log(compute_kn(t) / 0.05), 1e-12);
}

TEST(Bound, QuadruplingVarianceDoublesMiddleTerm) {
  auto t = unit_inputs();
  const double base = generalization_bound(t, 0, 0);
  const double one = generalization_bound(t, 1.0, 0) - base;
  const double four = generalization_bound(t, 4.0, 0) - base;
  EXPECT_NEAR(four, 2 * one, 1e-12);
}

TEST(Bound, FirstTermShrinksWithLeafSize) {
  double prev = std::numeric_limits<double>::infinity();
  double prev_log = 0.0;
  for (double g : {10.0, 100.0, 1000.0}) {
    auto t = unit_inputs();
    t.min_leaf = g;
    const double first = generalization_bound(t, 0, 0);
    EXPECT_LT(first, prev);
    EXPECT_GT(log_kn(t), prev_log);
    prev = first;
    prev_log = log_kn(t);
  }
}

// Reference regrets from an mpmath evaluation at 50 digits.
TEST(Example1, AnalyticValues) {
  const auto r1 = example1_analytic(1, 3.0);
  EXPECT_NEAR(r1.up, 0.15865525393145707, 1e-15);
  EXPECT_NEAR(r1.pcm, 0.15865525393145707, 1e-15);
  const auto r4 = example1_analytic(4, std::sqrt(2.0));
  EXPECT_NEAR(r4.pcm, 0.08794194790060539, 1e-14);
  EXPECT_NEAR(r4.up, 0.0004943744185125221, 1e-15);
  const auto r16 = example1_analytic(16, std::sqrt(2.0));
  EXPECT_NEAR(r16.up / 1.6693660856040357e-9, 1.0, 1e-6);
  EXPECT_NEAR(r16.pcm / 0.0005066195190112788, 1.0, 1e-9);
  const auto r64 = example1_analytic(64, std::sqrt(2.0));
  EXPECT_NEAR(r64.up / 4.3941521512829081e-26, 1.0, 1e-6);
  EXPECT_NEAR(r64.pcm / 3.9814147675338638e-14, 1.0, 1e-4);
}

TEST(Example1, RatioDecreases) {
  double prev = 1.0;
  for (int m : {4, 16, 64}) {
    const auto r = example1_analytic(m, std::sqrt(2.0));
    EXPECT_LT(r.up / r.pcm, prev);
    prev = r.up / r.pcm;
  }
}

TEST(Example1, ZeroLambdaMonteCarloRulesCoincide) {
  const auto s = example1_montecarlo(8, 0.0, 2000, 3);
  EXPECT_EQ(s.overall.mean_up, s.overall.mean_pcm);
  EXPECT_EQ(s.state_a.mean_up, s.state_a.mean_pcm);
}

TEST(Example1, MonteCarloAgreesWithAnalytic) {
  for (int m : {1, 4}) {
    const auto an = example1_analytic(m, std::sqrt(2.0));
    const auto mc = example1_montecarlo(m, std::sqrt(2.0), 20000, 11);
    EXPECT_LE(std::abs(mc.state_a.mean_pcm - an.pcm), 3 * mc.state_a.se_pcm + 1e-12) << m;
    EXPECT_LE(std::abs(mc.state_a.mean_up - an.up), 3 * mc.state_a.se_up + 2e-3) << m;
  }
}

TEST(Example1, Deterministic) {
  const auto a = example1_montecarlo(4, 1.0, 1000, 5, Example1Variance::empirical);
  const auto b = example1_montecarlo(4, 1.0, 1000, 5, Example1Variance::empirical);
  EXPECT_EQ(a.overall.mean_up, b.overall.mean_up);
  EXPECT_EQ(a.overall.mean_pcm, b.overall.mean_pcm);
  EXPECT_THROW((void)example1_montecarlo(4, 1.0, 50, 5), Error);
}

TEST(Coverage, SmallRunHolds) {
  CoverageConfig cfg;
  cfg.replications = 20;
  const auto r = theorem1_coverage(cfg);
  EXPECT_EQ(r.replications, 20u);
  EXPECT_GE(r.coverage, 0.95);
}

// ---------------------------------------------------------------------------
// tuning

TEST(Imputation, RecoversDecisionOutcome) {
  const auto ds = testing::make_data(600, 1, 1, 3, [](const VectorXd&, const VectorXd& z) { return z[0]; });
  ForestParams fp;
  fp.trees = 30;
  fp.min_leaf = 3;
  const auto imp = impute_counterfactuals(ds, fp);
  for (double z : {0.1, 0.35, 0.6, 0.9}) EXPECT_NEAR(imp.predict(VectorXd::Constant(1, 0.5), VectorXd::Constant(1, z)), z, 0.2);
}

TEST(Imputation, ConstantOutcome) {
  const auto ds = testing::make_data(100, 2, 1, 4, [](const VectorXd&, const VectorXd&) { return -2.5; });
  ForestParams fp;
  fp.trees = 5;
  const auto imp = impute_counterfactuals(ds, fp);
  EXPECT_DOUBLE_EQ(imp.predict(VectorXd::Constant(2, 0.1), VectorXd::Constant(1, 0.7)), -2.5);
}

TEST(Imputation, DeepForestNearTrainingPoints) {
  const auto ds = testing::make_data(400, 1, 1, 5, [](const VectorXd& x, const VectorXd& z) { return 3 * x[0] + z[0]; });
  ForestParams fp;
  fp.trees = 50;
  fp.min_leaf = 1;
  fp.max_features = 2;
  const auto imp = impute_counterfactuals(ds, fp);
  double err = 0.0;
  for (std::size_t i = 0; i < 50; ++i)
    err += std::abs(imp.predict(ds.covariates.row(static_cast<Eigen::Index>(i)).transpose(),
                                ds.decisions.row(static_cast<Eigen::Index>(i)).transpose()) -
                    ds.outcomes(static_cast<Eigen::Index>(i), 0));
  EXPECT_LT(err / 50.0, 0.15);
}

CandidateModel constant_candidate(std::string label, double z) {
  CandidateModel c;
  c.label = std::move(label);
  c.prescribe = [z](const MatrixXd& xs) { return std::vector<VectorXd>(static_cast<std::size_t>(xs.rows()), VectorXd::Constant(1, z)); };
  return c;
}

TEST(SelectModel, SingleCandidate) {
  const auto ds = testing::make_data(60, 1, 1, 6, [](const VectorXd&, const VectorXd& z) { return z[0]; });
  ForestParams fp;
  fp.trees = 5;
  const auto imp = impute_counterfactuals(ds, fp);
  EXPECT_EQ(select_model({constant_candidate("only", 0.5)}, ds, outcome_target(ds), imp).best, 0u);
  EXPECT_THROW((void)select_model({}, ds, outcome_target(ds), imp), Error);
}

TEST(SelectModel, HugePenaltyLoses) {
  // cost (z - x)^2: the unpenalized tree tracks x; lambda1 = 1e9 drives every
  // prescription to the lowest-variance leaf
  const auto ds = testing::make_data(800, 1, 1, 7, [](const VectorXd& x, const VectorXd& z) { return (z[0] - x[0]) * (z[0] - x[0]); }, 0.05);
  const auto split = train_validation_split(ds, 0.4, 1);
  LearnerConfig lc;
  lc.kind = "cart";
  lc.tree.min_leaf = 10;
  const auto p = fit_prescriber(split.train, lc, {});
  ForestParams fp;
  fp.trees = 20;
  const auto imp = impute_counterfactuals(split.validation, fp);
  const auto space = DecisionSpace::box(1, 0, 1);
  auto cands = lambda_candidates(*p, {1e9, 0.0}, {0.0}, space, 1);
  const auto res = select_model(cands, split.validation, outcome_target(split.validation), imp);
  EXPECT_EQ(res.best, 1u);
  EXPECT_GT(res.scores[0].imputed_cost, res.scores[1].imputed_cost);
}

TEST(SelectModel, OracleCandidateWins) {
  const auto ds = testing::make_data(500, 1, 1, 8, [](const VectorXd& x, const VectorXd& z) { return (z[0] - x[0]) * (z[0] - x[0]); });
  ForestParams fp;
  fp.trees = 30;
  fp.min_leaf = 2;
  const auto imp = impute_counterfactuals(ds, fp);
  CandidateModel oracle;
  oracle.label = "oracle";
  oracle.predict = [](const VectorXd& x, const VectorXd& z) { return (z[0] - x[0]) * (z[0] - x[0]); };
  oracle.prescribe = [](const MatrixXd& xs) {
    std::vector<VectorXd> out;
    for (Eigen::Index i = 0; i < xs.rows(); ++i) out.push_back(VectorXd::Constant(1, xs(i, 0)));
    return out;
  };
  auto flat = constant_candidate("flat", 0.5);
  flat.predict = [](const VectorXd&, const VectorXd&) { return 1.0 / 6.0; };
  const auto res = select_model({flat, oracle, constant_candidate("low", 0.0)}, ds, outcome_target(ds), imp);
  EXPECT_EQ(res.best, 1u);
  EXPECT_NEAR(res.scores[1].mse, 0.0, 1e-20);
}

TEST(SelectModel, OrderInvariant) {
  const auto ds = testing::make_data(300, 1, 1, 9, [](const VectorXd& x, const VectorXd& z) { return std::abs(z[0] - x[0]); });
  ForestParams fp;
  fp.trees = 10;
  const auto imp = impute_counterfactuals(ds, fp);
  const auto a = constant_candidate("a", 0.2), b = constant_candidate("b", 0.5), c = constant_candidate("c", 0.9);
  const auto r1 = select_model({a, b, c}, ds, outcome_target(ds), imp);
  const auto r2 = select_model({c, a, b}, ds, outcome_target(ds), imp);
  const std::vector<std::string> o1{"a", "b", "c"}, o2{"c", "a", "b"};
  EXPECT_EQ(o1[r1.best], o2[r2.best]);
}

TEST(Prescriber, TheoryInputsFromPartition) {
  const auto ds = testing::make_data(400, 1, 1, 10, [](const VectorXd& x, const VectorXd& z) { return x[0] * z[0]; });
  LearnerConfig lc;
  lc.kind = "cart";
  lc.tree.min_leaf = 15;
  lc.tree.max_leaves = 6;
  const auto p = fit_prescriber(ds, lc, {});
  const auto t = p->theory_inputs(2.0, 1.5, 0.1);
  EXPECT_LE(t.max_leaves, 6.0);
  EXPECT_GE(t.min_leaf, 15.0);
  EXPECT_DOUBLE_EQ(t.lipschitz, 2.0);
  lc.kind = "ols";
  EXPECT_THROW((void)fit_prescriber(ds, lc, {})->theory_inputs(1, 1, 0.1), Error);
}

}  // namespace
}  // namespace prescript
