#pragma once

#include <memory>
#include <string>
#include <vector>

#include "prescript/objective.hpp"
#include "prescript/optimize.hpp"
#include "prescript/theory.hpp"

namespace prescript {

// A fitted learner bundled with what it needs to prescribe: the training view,
// the cost, the objective mode and the noise variance.
class Prescriber {
 public:
  virtual ~Prescriber() = default;

  // Prediction of the scalar training target at (x, z).
  [[nodiscard]] virtual double predict(const VectorXd& x, const VectorXd& z) const = 0;

  // One prescription per row of xs. seed feeds randomized searches; row i uses
  // derive_seed(seed, i).
  [[nodiscard]] virtual std::vector<Prescription> prescribe(const MatrixXd& xs, double lambda1, double lambda2,
                                                            const DecisionSpace& space, std::uint64_t seed) const = 0;

  // Theorem 1 inputs read off the fitted partition (tree family only).
  [[nodiscard]] virtual TheoryInputs theory_inputs(double lipschitz, double diameter, double delta) const = 0;

  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual double sigma2() const = 0;
};

struct PrescriberSettings {
  CostFunction cost = identity_cost();
  ObjectiveMode mode = ObjectiveMode::plain;
  ForestSearchOptions search;
  std::size_t workers = 1;
};

namespace detail {

inline PenaltyConfig penalty(double l1, double l2, double sigma2, ObjectiveMode mode) {
  PenaltyConfig cfg;
  cfg.lambda1 = l1;
  cfg.lambda2 = l2;
  cfg.sigma2 = sigma2;
  cfg.mode = mode;
  cfg.validate();
  return cfg;
}

inline TheoryInputs partition_inputs(const std::vector<const TreeModel*>& trees, double lipschitz, double diameter,
                                     double delta) {
  TheoryInputs t;
  std::size_t leaves = 0, smallest = std::numeric_limits<std::size_t>::max();
  for (const auto* tree : trees) {
    leaves = std::max(leaves, tree->leaf_count());
    smallest = std::min(smallest, tree->min_leaf_population());
  }
  t.max_leaves = static_cast<double>(leaves);
  t.min_leaf = static_cast<double>(smallest);
  t.diameter = diameter;
  t.alpha = 0.0;
  t.lipschitz = lipschitz;
  t.decision_dim = static_cast<double>(trees.front()->decision_dim);
  t.delta = delta;
  return t;
}

}  // namespace detail

class TreePrescriber final : public Prescriber {
 public:
  TreePrescriber(TreeModel model, const ObservationalDataset& train, VectorXd target, double sigma2,
                 PrescriberSettings settings)
      : model_(std::move(model)), view_(train), target_(std::move(target)), sigma2_(sigma2),
        settings_(std::move(settings)) {}

  [[nodiscard]] double predict(const VectorXd& x, const VectorXd& z) const override {
    return tree_predict(model_, target_, {x, z});
  }

  [[nodiscard]] std::vector<Prescription> prescribe(const MatrixXd& xs, double lambda1, double lambda2,
                                                    const DecisionSpace& space, std::uint64_t) const override {
    const TreeOptimizer opt(model_, view_, settings_.cost, detail::penalty(lambda1, lambda2, sigma2_, settings_.mode));
    std::vector<Prescription> out(static_cast<std::size_t>(xs.rows()));
    parallel_for(out.size(), settings_.workers, [&](std::size_t i) {
      out[i] = opt.solve(xs.row(static_cast<Eigen::Index>(i)).transpose(), space);
    });
    return out;
  }

  [[nodiscard]] TheoryInputs theory_inputs(double lipschitz, double diameter, double delta) const override {
    return detail::partition_inputs({&model_}, lipschitz, diameter, delta);
  }

  [[nodiscard]] std::string kind() const override { return "cart"; }
  [[nodiscard]] double sigma2() const override { return sigma2_; }
  [[nodiscard]] const TreeModel& model() const { return model_; }

 private:
  TreeModel model_;
  TrainingView view_;
  VectorXd target_;
  double sigma2_;
  PrescriberSettings settings_;
};

class ForestPrescriber final : public Prescriber {
 public:
  ForestPrescriber(ForestModel model, const ObservationalDataset& train, VectorXd target, double sigma2,
                   PrescriberSettings settings)
      : model_(std::move(model)), view_(train), target_(std::move(target)), sigma2_(sigma2),
        settings_(std::move(settings)) {}

  [[nodiscard]] double predict(const VectorXd& x, const VectorXd& z) const override {
    return forest_predict(model_, target_, {x, z});
  }

  [[nodiscard]] std::vector<Prescription> prescribe(const MatrixXd& xs, double lambda1, double lambda2,
                                                    const DecisionSpace& space, std::uint64_t seed) const override {
    const auto cfg = detail::penalty(lambda1, lambda2, sigma2_, settings_.mode);
    std::vector<Prescription> out(static_cast<std::size_t>(xs.rows()));
    parallel_for(out.size(), settings_.workers, [&](std::size_t i) {
      ForestObjective objective(model_, view_, settings_.cost, cfg);
      auto opt = settings_.search;
      opt.seed = derive_seed(seed, i);
      out[i] = optimize_forest(objective, xs.row(static_cast<Eigen::Index>(i)).transpose(), space, opt);
    });
    return out;
  }

  [[nodiscard]] TheoryInputs theory_inputs(double lipschitz, double diameter, double delta) const override {
    std::vector<const TreeModel*> trees;
    for (const auto& t : model_.trees) trees.push_back(&t);
    return detail::partition_inputs(trees, lipschitz, diameter, delta);
  }

  [[nodiscard]] std::string kind() const override { return "rf"; }
  [[nodiscard]] double sigma2() const override { return sigma2_; }
  [[nodiscard]] const ForestModel& model() const { return model_; }

 private:
  ForestModel model_;
  TrainingView view_;
  VectorXd target_;
  double sigma2_;
  PrescriberSettings settings_;
};

// Linear family: lambda2 is ignored and lambda1 multiplies sigma sqrt(v'Mv).
class LinearPrescriber final : public Prescriber {
 public:
  LinearPrescriber(LinearModel model, PrescriberSettings settings)
      : model_(std::move(model)), settings_(std::move(settings)) {}

  [[nodiscard]] double predict(const VectorXd& x, const VectorXd& z) const override {
    return model_.predict(model_.design_row(x, z));
  }

  [[nodiscard]] std::vector<Prescription> prescribe(const MatrixXd& xs, double lambda1, double,
                                                    const DecisionSpace& space, std::uint64_t) const override {
    std::vector<Prescription> out(static_cast<std::size_t>(xs.rows()));
    parallel_for(out.size(), settings_.workers, [&](std::size_t i) {
      out[i] = optimize_linear(model_, xs.row(static_cast<Eigen::Index>(i)).transpose(), lambda1, space,
                               settings_.mode);
    });
    return out;
  }

  [[nodiscard]] TheoryInputs theory_inputs(double, double, double) const override {
    throw Error("theory constants are defined for tree weights only");
  }

  [[nodiscard]] std::string kind() const override { return to_string(model_.kind); }
  [[nodiscard]] double sigma2() const override { return model_.sigma * model_.sigma; }
  [[nodiscard]] const LinearModel& model() const { return model_; }

 private:
  LinearModel model_;
  PrescriberSettings settings_;
};

// Learner choice for fit_prescriber.
struct LearnerConfig {
  std::string kind = "rf";  // cart | rf | ols | ridge | lasso
  TreeParams tree;
  ForestParams forest;
  double alpha = 1.0;  // ridge / lasso strength
};

// Fits the learner to the cost target and estimates sigma^2 as the training
// mean squared error of the same learner.
inline std::unique_ptr<Prescriber> fit_prescriber(const ObservationalDataset& train, const LearnerConfig& learner,
                                                  const PrescriberSettings& settings) {
  const VectorXd target = cost_target(train, settings.cost);
  if (learner.kind == "cart") {
    LearnerSpec spec;
    spec.kind = LearnerSpec::Kind::cart;
    spec.tree = learner.tree;
    auto model = fit_honest_cart(train, target, learner.tree);
    const double s2 = estimate_noise_variance(train, target, spec).sigma2;
    return std::make_unique<TreePrescriber>(std::move(model), train, target, s2, settings);
  }
  if (learner.kind == "rf") {
    auto model = fit_honest_forest(train, target, learner.forest);
    double sse = 0.0;
    for (std::size_t i = 0; i < train.rows(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double e = target[r] - forest_predict(model, target, {train.covariates.row(r).transpose(),
                                                                  train.decisions.row(r).transpose()});
      sse += e * e;
    }
    const double s2 = sse / static_cast<double>(train.rows());
    return std::make_unique<ForestPrescriber>(std::move(model), train, target, s2, settings);
  }
  if (learner.kind == "ols") return std::make_unique<LinearPrescriber>(fit_ols(train, target), settings);
  if (learner.kind == "ridge") return std::make_unique<LinearPrescriber>(fit_ridge(train, target, learner.alpha), settings);
  if (learner.kind == "lasso")
    return std::make_unique<LinearPrescriber>(fit_lasso_approx(train, target, learner.alpha), settings);
  throw Error("unknown learner: " + learner.kind);
}

}  // namespace prescript
