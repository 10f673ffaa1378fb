#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <span>
#include <vector>

#include "prescript/core.hpp"
#include "prescript/cost.hpp"
#include "prescript/dataset.hpp"
#include "prescript/weights.hpp"

namespace prescript {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TreeParams {
  std::size_t min_leaf = 5;  // gamma_n: estimation rows per leaf
  std::size_t max_leaves = std::numeric_limits<std::uint32_t>::max();  // Gamma_n
  double honesty_fraction = 0.5;  // share of rows used to choose splits
  std::size_t max_features = 0;   // candidate features per split, 0 = all
  std::uint64_t seed = 0;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 for leaves
  double threshold = 0.0;     // value <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;
};

// Axis-aligned cell of the (x, z) feature space. Each coordinate interval is
// (lower, upper]; infinite bounds mark unconstrained directions.
struct LeafRegion {
  std::size_t id = 0;
  VectorXd lower;
  VectorXd upper;
  std::vector<std::uint32_t> estimation;

  [[nodiscard]] bool contains(std::span<const double> f) const {
    for (Eigen::Index k = 0; k < lower.size(); ++k) {
      const double v = f[static_cast<std::size_t>(k)];
      if (!(v > lower[k] && v <= upper[k])) return false;
    }
    return true;
  }

  // Whether the covariate part of the cell contains x.
  [[nodiscard]] bool contains_covariates(const VectorXd& x) const {
    for (Eigen::Index k = 0; k < x.size(); ++k)
      if (!(x[k] > lower[k] && x[k] <= upper[k])) return false;
    return true;
  }

  // Closed z-box of this cell intersected with the space box. Empty when
  // lo > hi for any coordinate.
  [[nodiscard]] std::pair<VectorXd, VectorXd> decision_box(const DecisionSpace& space, std::size_t covariate_dim) const {
    const auto p = space.lower.size();
    VectorXd lo(p), hi(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      const auto f = static_cast<Eigen::Index>(covariate_dim) + k;
      lo[k] = std::max(lower[f], space.lower[k]);
      hi[k] = std::min(upper[f], space.upper[k]);
      // the lower cell bound is open, so touching the space's upper end from above is empty
      if (lower[f] >= space.upper[k]) lo[k] = std::numeric_limits<double>::infinity();
    }
    return {lo, hi};
  }
};

class TreeModel {
 public:
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<std::vector<std::uint32_t>> leaf_members;  // estimation row ids per leaf, ascending
  std::size_t covariate_dim = 0;
  std::size_t decision_dim = 0;
  std::size_t n_train = 0;
  TreeParams params;

  [[nodiscard]] std::size_t feature_dim() const { return covariate_dim + decision_dim; }
  [[nodiscard]] std::size_t leaf_count() const { return leaf_members.size(); }

  [[nodiscard]] std::size_t route(std::span<const double> f) const {
    std::size_t node = 0;
    while (nodes[node].feature >= 0) {
      const auto& nd = nodes[node];
      node = static_cast<std::size_t>(f[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
    }
    return static_cast<std::size_t>(nodes[node].leaf);
  }

  [[nodiscard]] std::size_t min_leaf_population() const {
    std::size_t m = std::numeric_limits<std::size_t>::max();
    for (const auto& l : leaf_members) m = std::min(m, l.size());
    return m;
  }

  friend bool operator==(const TreeModel& a, const TreeModel& b) {
    if (a.nodes.size() != b.nodes.size()) return false;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
      const auto& x = a.nodes[i];
      const auto& y = b.nodes[i];
      if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left || x.right != y.right ||
          x.leaf != y.leaf)
        return false;
    }
    return a.leaf_members == b.leaf_members && a.covariate_dim == b.covariate_dim &&
           a.decision_dim == b.decision_dim && a.n_train == b.n_train;
  }
};

namespace detail {

struct SplitChoice {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct OpenNode {
  std::size_t node_id = 0;
  std::vector<std::uint32_t> structure;   // may contain repeats (bootstrap)
  std::vector<std::uint32_t> estimation;  // distinct
  SplitChoice split;
  std::size_t order = 0;
};

// Greedy sum-of-squares split over the structure rows. Admissible splits keep
// at least min_leaf estimation rows and one structure row on each side.
inline SplitChoice best_split(const FeatureMatrix& f, std::span<const double> target,
                              const std::vector<std::uint32_t>& structure, const std::vector<std::uint32_t>& estimation,
                              std::span<const std::int32_t> candidate_features, std::size_t min_leaf) {
  SplitChoice best;
  const std::size_t m = structure.size();
  if (m < 2 || estimation.size() < 2 * min_leaf) return best;

  double total = 0.0;
  for (auto i : structure) total += target[i];
  const double base = total * total / static_cast<double>(m);
  double sse = 0.0;
  {
    const double mean = total / static_cast<double>(m);
    for (auto i : structure) sse += (target[i] - mean) * (target[i] - mean);
  }
  if (!(sse > 0.0)) return best;
  const double min_gain = 1e-12 * sse;

  std::vector<std::pair<double, double>> vals(m);
  std::vector<double> est_vals(estimation.size());
  for (auto feat : candidate_features) {
    for (std::size_t k = 0; k < m; ++k) vals[k] = {f(structure[k], feat), target[structure[k]]};
    std::sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (vals.front().first == vals.back().first) continue;
    for (std::size_t k = 0; k < estimation.size(); ++k) est_vals[k] = f(estimation[k], feat);
    std::sort(est_vals.begin(), est_vals.end());

    double left_sum = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) {
      left_sum += vals[k].second;
      if (vals[k].first == vals[k + 1].first) continue;
      double thr = vals[k].first + 0.5 * (vals[k + 1].first - vals[k].first);
      if (thr >= vals[k + 1].first) thr = vals[k].first;
      const auto est_left =
          static_cast<std::size_t>(std::upper_bound(est_vals.begin(), est_vals.end(), thr) - est_vals.begin());
      if (est_left < min_leaf || est_vals.size() - est_left < min_leaf) continue;
      const double nl = static_cast<double>(k + 1);
      const double nr = static_cast<double>(m - k - 1);
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base;
      // ties keep the earlier (lower feature, smaller threshold) candidate
      if (gain > min_gain && gain > best.gain * (1.0 + 1e-12)) {
        best.feature = feat;
        best.threshold = thr;
        best.gain = gain;
      }
    }
  }
  return best;
}

struct OpenNodeLess {
  bool operator()(const OpenNode& a, const OpenNode& b) const {
    if (a.split.gain != b.split.gain) return a.split.gain < b.split.gain;
    return a.order > b.order;
  }
};

// Best-first growth: always expands the open node with the largest gain until
// max_leaves is reached or no admissible split remains.
inline TreeModel grow_tree(const FeatureMatrix& f, std::span<const double> target, std::vector<std::uint32_t> structure,
                           std::vector<std::uint32_t> estimation, const TreeParams& params, std::size_t covariate_dim,
                           std::mt19937_64& rng) {
  const auto dim = static_cast<std::int32_t>(f.cols());
  const std::size_t mtry = (params.max_features == 0 || params.max_features >= static_cast<std::size_t>(dim))
                               ? static_cast<std::size_t>(dim)
                               : params.max_features;
  std::vector<std::int32_t> all(static_cast<std::size_t>(dim));
  std::iota(all.begin(), all.end(), 0);
  auto draw_features = [&]() {
    if (mtry == all.size()) return all;
    std::vector<std::int32_t> pool = all;
    for (std::size_t k = 0; k < mtry; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    pool.resize(mtry);
    std::sort(pool.begin(), pool.end());
    return pool;
  };

  TreeModel tree;
  tree.covariate_dim = covariate_dim;
  tree.decision_dim = static_cast<std::size_t>(dim) - covariate_dim;
  tree.n_train = static_cast<std::size_t>(f.rows());
  tree.params = params;
  tree.nodes.emplace_back();
  std::sort(estimation.begin(), estimation.end());

  std::priority_queue<OpenNode, std::vector<OpenNode>, OpenNodeLess> open;
  std::size_t order = 0;
  auto make_open = [&](std::size_t id, std::vector<std::uint32_t> s, std::vector<std::uint32_t> e) {
    OpenNode o;
    o.node_id = id;
    const auto feats = draw_features();
    o.split = best_split(f, target, s, e, feats, params.min_leaf);
    o.structure = std::move(s);
    o.estimation = std::move(e);
    o.order = order++;
    return o;
  };

  std::vector<std::vector<std::uint32_t>> leaf_est;  // indexed by node id
  std::size_t leaves = 1;
  open.push(make_open(0, std::move(structure), std::move(estimation)));
  while (!open.empty()) {
    OpenNode cur = open.top();
    open.pop();
    if (cur.split.feature < 0 || leaves >= params.max_leaves) {
      if (leaf_est.size() <= cur.node_id) leaf_est.resize(cur.node_id + 1);
      leaf_est[cur.node_id] = std::move(cur.estimation);
      continue;
    }
    const auto feat = cur.split.feature;
    const double thr = cur.split.threshold;
    std::vector<std::uint32_t> sl, sr, el, er;
    for (auto i : cur.structure) (f(i, feat) <= thr ? sl : sr).push_back(i);
    for (auto i : cur.estimation) (f(i, feat) <= thr ? el : er).push_back(i);
    const auto left_id = tree.nodes.size();
    const auto right_id = left_id + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& nd = tree.nodes[cur.node_id];
    nd.feature = feat;
    nd.threshold = thr;
    nd.left = static_cast<std::int32_t>(left_id);
    nd.right = static_cast<std::int32_t>(right_id);
    ++leaves;
    open.push(make_open(left_id, std::move(sl), std::move(el)));
    open.push(make_open(right_id, std::move(sr), std::move(er)));
  }
  leaf_est.resize(tree.nodes.size());

  // leaf ids in depth-first, left-first order
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const auto id = stack.back();
    stack.pop_back();
    auto& nd = tree.nodes[id];
    if (nd.feature < 0) {
      nd.leaf = static_cast<std::int32_t>(tree.leaf_members.size());
      tree.leaf_members.push_back(std::move(leaf_est[id]));
    } else {
      stack.push_back(static_cast<std::size_t>(nd.right));
      stack.push_back(static_cast<std::size_t>(nd.left));
    }
  }
  return tree;
}

}  // namespace detail

// Outcome column 0 as the fitting target (requires q = 1).
inline VectorXd outcome_target(const ObservationalDataset& ds) {
  if (ds.outcome_dim() != 1) throw Error("outcome target needs a scalar outcome; use a cost target instead");
  return ds.outcomes.col(0);
}

// c(Z_i; Y_i) per row as the fitting target.
inline VectorXd cost_target(const ObservationalDataset& ds, const CostFunction& cost) {
  VectorXd t(static_cast<Eigen::Index>(ds.rows()));
  std::vector<double> z(ds.decision_dim()), y(ds.outcome_dim());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = ds.decisions(i, static_cast<Eigen::Index>(k));
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = ds.outcomes(i, static_cast<Eigen::Index>(k));
    t[i] = cost(z, y);
  }
  return t;
}

// Honest CART: a random honesty_fraction of the rows picks the splits, the
// rest populate the leaves. Weights never depend on the estimation outcomes.
inline TreeModel fit_honest_cart(const ObservationalDataset& train, const VectorXd& target, const TreeParams& params) {
  const std::size_t n = train.rows();
  if (params.min_leaf < 1) throw Error("min_leaf must be at least 1");
  if (params.max_leaves < 1) throw Error("max_leaves must be at least 1");
  if (static_cast<std::size_t>(target.size()) != n) throw Error("target length differs from row count");
  if (n < 2 * params.min_leaf) throw Error("too few rows for the honesty split: need at least 2 * min_leaf");

  std::mt19937_64 rng(params.seed);
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_struct = static_cast<std::size_t>(std::llround(params.honesty_fraction * static_cast<double>(n)));
  n_struct = std::clamp<std::size_t>(n_struct, 1, n - params.min_leaf);
  std::vector<std::uint32_t> structure(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_struct));
  std::vector<std::uint32_t> estimation(idx.begin() + static_cast<std::ptrdiff_t>(n_struct), idx.end());

  const FeatureMatrix f = train.feature_matrix();
  return detail::grow_tree(f, std::span<const double>(target.data(), n), std::move(structure), std::move(estimation),
                           params, train.covariate_dim(), rng);
}

// Weight 1/N on each estimation row sharing q's leaf.
inline WeightVector tree_weights(const TreeModel& model, const FeaturePoint& q) {
  if (static_cast<std::size_t>(q.x.size()) != model.covariate_dim ||
      static_cast<std::size_t>(q.z.size()) != model.decision_dim)
    throw Error("query dimension does not match the tree");
  const VectorXd v = q.concat();
  const auto& members = model.leaf_members[model.route({v.data(), static_cast<std::size_t>(v.size())})];
  WeightVector w;
  w.n = model.n_train;
  w.index = members;
  w.weight.assign(members.size(), 1.0 / static_cast<double>(members.size()));
  return w;
}

inline std::vector<LeafRegion> enumerate_leaves(const TreeModel& model) {
  const auto dim = static_cast<Eigen::Index>(model.feature_dim());
  std::vector<LeafRegion> out(model.leaf_count());
  struct Frame {
    std::size_t node;
    VectorXd lo, hi;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Frame> stack{{0, VectorXd::Constant(dim, -inf), VectorXd::Constant(dim, inf)}};
  while (!stack.empty()) {
    Frame fr = std::move(stack.back());
    stack.pop_back();
    const auto& nd = model.nodes[fr.node];
    if (nd.feature < 0) {
      auto& r = out[static_cast<std::size_t>(nd.leaf)];
      r.id = static_cast<std::size_t>(nd.leaf);
      r.lower = std::move(fr.lo);
      r.upper = std::move(fr.hi);
      r.estimation = model.leaf_members[r.id];
      continue;
    }
    Frame left{static_cast<std::size_t>(nd.left), fr.lo, fr.hi};
    left.hi[nd.feature] = std::min(left.hi[nd.feature], nd.threshold);
    Frame right{static_cast<std::size_t>(nd.right), std::move(fr.lo), std::move(fr.hi)};
    right.lo[nd.feature] = std::max(right.lo[nd.feature], nd.threshold);
    stack.push_back(std::move(right));
    stack.push_back(std::move(left));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json tree_params_to_json(const TreeParams& p) {
  return {{"min_leaf", p.min_leaf},
          {"max_leaves", p.max_leaves},
          {"honesty_fraction", p.honesty_fraction},
          {"max_features", p.max_features},
          {"seed", p.seed}};
}

inline TreeParams tree_params_from_json(const nlohmann::json& j, TreeParams p = {}) {
  p.min_leaf = j.value("min_leaf", p.min_leaf);
  p.max_leaves = j.value("max_leaves", p.max_leaves);
  p.honesty_fraction = j.value("honesty_fraction", p.honesty_fraction);
  p.max_features = j.value("max_features", p.max_features);
  p.seed = j.value("seed", p.seed);
  return p;
}

inline nlohmann::json tree_to_json(const TreeModel& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : t.nodes) {
    if (nd.feature < 0)
      nodes.push_back({{"leaf", nd.leaf}});
    else
      nodes.push_back({{"feature", nd.feature}, {"threshold", nd.threshold}, {"left", nd.left}, {"right", nd.right}});
  }
  return {{"covariate_dim", t.covariate_dim}, {"decision_dim", t.decision_dim},
          {"n_train", t.n_train},             {"params", tree_params_to_json(t.params)},
          {"nodes", nodes},                   {"leaves", t.leaf_members}};
}

inline TreeModel tree_from_json(const nlohmann::json& j) {
  TreeModel t;
  t.covariate_dim = j.at("covariate_dim").get<std::size_t>();
  t.decision_dim = j.at("decision_dim").get<std::size_t>();
  t.n_train = j.at("n_train").get<std::size_t>();
  t.params = tree_params_from_json(j.at("params"));
  for (const auto& nj : j.at("nodes")) {
    TreeNode nd;
    if (nj.contains("leaf")) {
      nd.leaf = nj.at("leaf").get<std::int32_t>();
    } else {
      nd.feature = nj.at("feature").get<std::int32_t>();
      nd.threshold = nj.at("threshold").get<double>();
      nd.left = nj.at("left").get<std::int32_t>();
      nd.right = nj.at("right").get<std::int32_t>();
    }
    t.nodes.push_back(nd);
  }
  t.leaf_members = j.at("leaves").get<std::vector<std::vector<std::uint32_t>>>();
  return t;
}

}  // namespace prescript
