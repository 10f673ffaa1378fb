#pragma once

#include <json.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "prescript/honest_tree.hpp"

namespace prescript {

struct ForestParams {
  std::size_t trees = 100;
  std::size_t min_leaf = 5;
  std::size_t max_leaves = std::numeric_limits<std::uint32_t>::max();
  double honesty_fraction = 0.5;
  std::size_t max_features = 0;  // 0 = ceil((d+p)/3)
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<TreeModel> trees;
  ForestParams params;
  std::size_t covariate_dim = 0;
  std::size_t decision_dim = 0;
  std::size_t n_train = 0;

  [[nodiscard]] std::size_t size() const { return trees.size(); }
  [[nodiscard]] std::size_t feature_dim() const { return covariate_dim + decision_dim; }
};

// Each member tree: rows shuffled and split into a structure half and an
// estimation half; the structure half is bootstrap-resampled before growing.
// Estimation rows stay distinct, so every member weight is at most 1/min_leaf.
inline ForestModel fit_honest_forest(const ObservationalDataset& train, const VectorXd& target,
                                     const ForestParams& params) {
  const std::size_t n = train.rows();
  if (params.trees < 1) throw Error("forest needs at least one tree");
  if (params.min_leaf < 1) throw Error("min_leaf must be at least 1");
  if (static_cast<std::size_t>(target.size()) != n) throw Error("target length differs from row count");
  if (n < 2 * params.min_leaf) throw Error("too few rows for the honesty split: need at least 2 * min_leaf");

  ForestModel forest;
  forest.params = params;
  forest.covariate_dim = train.covariate_dim();
  forest.decision_dim = train.decision_dim();
  forest.n_train = n;
  const FeatureMatrix f = train.feature_matrix();
  const std::size_t dim = train.feature_dim();

  TreeParams tp;
  tp.min_leaf = params.min_leaf;
  tp.max_leaves = params.max_leaves;
  tp.honesty_fraction = params.honesty_fraction;
  tp.max_features = params.max_features == 0 ? (dim + 2) / 3 : params.max_features;

  forest.trees.resize(params.trees);
  for (std::size_t t = 0; t < params.trees; ++t) {
    tp.seed = derive_seed(params.seed, t);
    std::mt19937_64 rng(tp.seed);
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_struct = static_cast<std::size_t>(std::llround(params.honesty_fraction * static_cast<double>(n)));
    n_struct = std::clamp<std::size_t>(n_struct, 1, n - params.min_leaf);
    std::vector<std::uint32_t> structure(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_struct));
    std::vector<std::uint32_t> estimation(idx.begin() + static_cast<std::ptrdiff_t>(n_struct), idx.end());
    if (params.bootstrap) {
      std::vector<std::uint32_t> boot(structure.size());
      std::uniform_int_distribution<std::size_t> pick(0, structure.size() - 1);
      for (auto& b : boot) b = structure[pick(rng)];
      structure = std::move(boot);
    }
    forest.trees[t] = detail::grow_tree(f, std::span<const double>(target.data(), n), std::move(structure),
                                        std::move(estimation), tp, train.covariate_dim(), rng);
  }
  return forest;
}

// Uniform average of member-tree weights.
inline WeightVector forest_weights(const ForestModel& model, const FeaturePoint& q) {
  if (static_cast<std::size_t>(q.x.size()) != model.covariate_dim ||
      static_cast<std::size_t>(q.z.size()) != model.decision_dim)
    throw Error("query dimension does not match the forest");
  const VectorXd v = q.concat();
  const std::span<const double> f(v.data(), static_cast<std::size_t>(v.size()));
  WeightAccumulator acc(model.n_train);
  const double per_tree = 1.0 / static_cast<double>(model.trees.size());
  for (const auto& tree : model.trees) {
    const auto& members = tree.leaf_members[tree.route(f)];
    const double w = per_tree / static_cast<double>(members.size());
    for (auto i : members) acc.add(i, w);
  }
  return acc.to_weights();
}

// sum_i w_i(q) * target_i
inline double forest_predict(const ForestModel& model, const VectorXd& target, const FeaturePoint& q) {
  const VectorXd v = q.concat();
  const std::span<const double> f(v.data(), static_cast<std::size_t>(v.size()));
  double s = 0.0;
  for (const auto& tree : model.trees) {
    const auto& members = tree.leaf_members[tree.route(f)];
    double leaf = 0.0;
    for (auto i : members) leaf += target[i];
    s += leaf / static_cast<double>(members.size());
  }
  return s / static_cast<double>(model.trees.size());
}

inline double tree_predict(const TreeModel& model, const VectorXd& target, const FeaturePoint& q) {
  const VectorXd v = q.concat();
  const auto& members = model.leaf_members[model.route({v.data(), static_cast<std::size_t>(v.size())})];
  double leaf = 0.0;
  for (auto i : members) leaf += target[i];
  return leaf / static_cast<double>(members.size());
}

inline nlohmann::json forest_to_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  return {{"covariate_dim", m.covariate_dim},
          {"decision_dim", m.decision_dim},
          {"n_train", m.n_train},
          {"params",
           {{"trees", m.params.trees},
            {"min_leaf", m.params.min_leaf},
            {"max_leaves", m.params.max_leaves},
            {"honesty_fraction", m.params.honesty_fraction},
            {"max_features", m.params.max_features},
            {"bootstrap", m.params.bootstrap},
            {"seed", m.params.seed}}},
          {"trees", trees}};
}

inline ForestParams forest_params_from_json(const nlohmann::json& j, ForestParams p = {}) {
  p.trees = j.value("trees", p.trees);
  p.min_leaf = j.value("min_leaf", p.min_leaf);
  p.max_leaves = j.value("max_leaves", p.max_leaves);
  p.honesty_fraction = j.value("honesty_fraction", p.honesty_fraction);
  p.max_features = j.value("max_features", p.max_features);
  p.bootstrap = j.value("bootstrap", p.bootstrap);
  p.seed = j.value("seed", p.seed);
  return p;
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
  ForestModel m;
  m.covariate_dim = j.at("covariate_dim").get<std::size_t>();
  m.decision_dim = j.at("decision_dim").get<std::size_t>();
  m.n_train = j.at("n_train").get<std::size_t>();
  m.params = forest_params_from_json(j.at("params"));
  for (const auto& tj : j.at("trees")) m.trees.push_back(tree_from_json(tj));
  return m;
}

}  // namespace prescript
