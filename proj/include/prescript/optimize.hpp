#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "prescript/objective.hpp"

namespace prescript {

struct Prescription {
  VectorXd z;
  double value = std::numeric_limits<double>::infinity();
  ObjectiveValue parts;
  std::int64_t leaf = -1;     // tree solves
  std::int64_t restart = -1;  // forest solves
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = true;
};

inline nlohmann::ordered_json prescription_to_json(const Prescription& p) {
  nlohmann::ordered_json j;
  j["z"] = std::vector<double>(p.z.data(), p.z.data() + p.z.size());
  j["value"] = p.value;
  j["decomposition"] = {{"mean_term", p.parts.mean_term},
                        {"mu", p.parts.mu},
                        {"sqrt_v", p.parts.sqrt_v},
                        {"bias", p.parts.bias}};
  j["diagnostics"] = {{"leaf", p.leaf},
                      {"restart", p.restart},
                      {"iterations", p.iterations},
                      {"evaluations", p.evaluations},
                      {"converged", p.converged}};
  return j;
}

// ---------------------------------------------------------------------------
// Reference oracle

// Exhaustive search over the product grid (endpoints included). Points that
// violate the linear constraints are skipped; ties go to the lexicographically
// smallest grid point.
template <typename Objective>
Prescription grid_oracle(Objective&& f, const DecisionSpace& space, std::size_t resolution) {
  space.validate();
  const std::size_t p = space.dim();
  if (resolution < 2) throw Error("grid resolution must be at least 2");
  if (static_cast<double>(p) * std::log10(static_cast<double>(resolution)) > 8.0 + 1e-12)
    throw Error("grid too large: resolution^p exceeds 1e8");
  std::vector<std::size_t> counter(p, 0);
  VectorXd z(static_cast<Eigen::Index>(p));
  auto coord = [&](std::size_t k, std::size_t j) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (j + 1 == resolution) return space.upper[kk];
    return space.lower[kk] +
           (space.upper[kk] - space.lower[kk]) * static_cast<double>(j) / static_cast<double>(resolution - 1);
  };
  Prescription best;
  bool found = false;
  while (true) {
    for (std::size_t k = 0; k < p; ++k) z[static_cast<Eigen::Index>(k)] = coord(k, counter[k]);
    if (space.satisfies_constraints(z, 1e-12)) {
      const double v = f(z);
      ++best.evaluations;
      if (!found || v < best.value) {
        best.value = v;
        best.z = z;
        found = true;
      }
    }
    std::size_t k = p;
    while (k > 0) {
      --k;
      if (++counter[k] < resolution) break;
      counter[k] = 0;
      if (k == 0) {
        k = p + 1;
        break;
      }
    }
    if (k == p + 1) break;
  }
  if (!found) throw Error("grid oracle: no feasible grid point");
  best.parts.value = best.value;
  best.parts.mean_term = best.value;
  return best;
}

// ---------------------------------------------------------------------------
// One-dimensional convex minimization

struct LineMin {
  double x = 0.0;
  double fx = 0.0;
  std::size_t evaluations = 0;
};

template <typename F>
LineMin golden_section(F&& f, double lo, double hi, double rel_tol = 1e-11) {
  LineMin out;
  if (!(hi > lo)) {
    out.x = lo;
    out.fx = f(lo);
    out.evaluations = 1;
    return out;
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double tol = rel_tol * std::max(1.0, hi - lo);
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  std::size_t evals = 2;
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++evals;
  }
  out.x = fc <= fd ? c : d;
  out.fx = std::min(fc, fd);
  for (double cand : {lo, hi}) {
    const double v = f(cand);
    ++evals;
    if (v < out.fx) {
      out.fx = v;
      out.x = cand;
    }
  }
  out.evaluations = evals;
  return out;
}

// Midpoint of the interval {t in [lo, hi] : f(t) <= f(x) + tol}; f convex, x a minimizer.
template <typename F>
LineMin plateau_center(F&& f, double lo, double hi, double x, double fx) {
  const double level = fx + 1e-12 * std::max(1.0, std::abs(fx));
  std::size_t evals = 0;
  auto edge = [&](double inside, double outside) {
    double fo = f(outside);
    ++evals;
    if (fo <= level) return outside;
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (inside + outside);
      if (mid == inside || mid == outside) break;
      ++evals;
      if (f(mid) <= level)
        inside = mid;
      else
        outside = mid;
    }
    return inside;
  };
  const double a = edge(x, lo);
  const double b = edge(x, hi);
  LineMin out;
  out.x = 0.5 * (a + b);
  out.fx = f(out.x);
  out.evaluations = evals + 1;
  if (out.fx > fx) {
    out.x = x;
    out.fx = fx;
  }
  return out;
}

struct BoxMin {
  VectorXd z;
  double value = std::numeric_limits<double>::infinity();
  std::size_t cycles = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  bool feasible = false;
};

namespace detail {

// Alternating projections onto the box and violated half-spaces.
inline bool feasible_start(VectorXd& z, const VectorXd& lo, const VectorXd& hi,
                           const std::vector<LinearConstraint>& cons) {
  z = z.cwiseMax(lo).cwiseMin(hi);
  for (int it = 0; it < 1000; ++it) {
    bool ok = true;
    for (const auto& c : cons) {
      const double viol = c.a.dot(z) - c.b;
      if (viol > 1e-12) {
        ok = false;
        const double nn = c.a.squaredNorm();
        if (nn > 0) z -= (viol / nn) * c.a;
      }
    }
    z = z.cwiseMax(lo).cwiseMin(hi);
    if (ok) return true;
  }
  return std::all_of(cons.begin(), cons.end(), [&](const auto& c) { return c.a.dot(z) <= c.b + 1e-9; });
}

inline std::pair<double, double> coordinate_range(const VectorXd& z, Eigen::Index k, const VectorXd& lo,
                                                  const VectorXd& hi, const std::vector<LinearConstraint>& cons) {
  double a = lo[k], b = hi[k];
  for (const auto& c : cons) {
    const double slack = c.b - (c.a.dot(z) - c.a[k] * z[k]);
    if (c.a[k] > 0)
      b = std::min(b, slack / c.a[k]);
    else if (c.a[k] < 0)
      a = std::max(a, slack / c.a[k]);
  }
  if (a > b) a = b = z[k];
  return {a, b};
}

}  // namespace detail

// Minimizes a convex f over [lo, hi] intersected with the constraints:
// golden-section for p = 1, cyclic coordinate descent with golden-section line
// searches otherwise. When center_plateau is set, the returned point is moved
// to the middle of any flat minimizing stretch along each coordinate.
template <typename F>
BoxMin minimize_convex_box(F&& f, const VectorXd& lo, const VectorXd& hi, const std::vector<LinearConstraint>& cons,
                           bool center_plateau = true, std::size_t max_cycles = 200) {
  BoxMin out;
  const auto p = lo.size();
  VectorXd z = 0.5 * (lo + hi);
  if (!detail::feasible_start(z, lo, hi, cons)) return out;
  out.feasible = true;
  double fz = f(z);
  out.evaluations = 1;
  for (out.cycles = 1; out.cycles <= max_cycles; ++out.cycles) {
    const double before = fz;
    double moved = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) {
      const auto [a, b] = detail::coordinate_range(z, k, lo, hi, cons);
      const double old = z[k];
      auto line = [&](double t) {
        z[k] = t;
        return f(z);
      };
      auto m = golden_section(line, a, b);
      out.evaluations += m.evaluations;
      if (m.fx < fz) {
        z[k] = m.x;
        fz = m.fx;
        moved = std::max(moved, std::abs(m.x - old));
      } else {
        z[k] = old;
      }
    }
    if (p == 1 || moved <= 1e-12 * (1.0 + z.norm()) || before - fz <= 1e-14 * (1.0 + std::abs(fz))) {
      out.converged = true;
      break;
    }
  }
  out.cycles = std::min(out.cycles, max_cycles);
  if (center_plateau) {
    for (Eigen::Index k = 0; k < p; ++k) {
      const auto [a, b] = detail::coordinate_range(z, k, lo, hi, cons);
      const double old = z[k];
      auto line = [&](double t) {
        z[k] = t;
        return f(z);
      };
      auto m = plateau_center(line, a, b, old, fz);
      out.evaluations += m.evaluations;
      z[k] = m.x;
      fz = m.fx;
    }
  }
  out.z = z;
  out.value = fz;
  return out;
}

// ---------------------------------------------------------------------------
// Trees: one convex problem per leaf

class TreeOptimizer {
 public:
  TreeOptimizer(const TreeModel& model, const TrainingView& view, CostFunction cost, PenaltyConfig cfg)
      : model_(model), view_(view), cost_(std::move(cost)), cfg_(cfg), regions_(enumerate_leaves(model)) {
    cfg_.validate();
    if (!cost_.convex_in_z) throw Error("per-leaf optimization requires a cost declared convex in z");
    if (view.feature_dim() != model.feature_dim()) throw Error("training view does not match the tree");
  }

  [[nodiscard]] const std::vector<LeafRegion>& regions() const { return regions_; }

  // Objective at (x, z) with the weights of a given leaf.
  [[nodiscard]] ObjectiveValue leaf_objective(std::size_t leaf, std::span<const double> query) const {
    const auto& members = model_.leaf_members[leaf];
    const double w = 1.0 / static_cast<double>(members.size());
    return evaluate_weighted(view_, cost_, cfg_, query, [&](auto&& fn) {
      for (auto i : members) fn(i, w);
    });
  }

  // Objective at (x, z) using the leaf (x, z) routes to.
  [[nodiscard]] ObjectiveValue evaluate(const VectorXd& x, const VectorXd& z, std::size_t* leaf_out = nullptr) const {
    VectorXd q(x.size() + z.size());
    q << x, z;
    const std::span<const double> qs(q.data(), static_cast<std::size_t>(q.size()));
    const auto leaf = model_.route(qs);
    if (leaf_out) *leaf_out = leaf;
    return leaf_objective(leaf, qs);
  }

  [[nodiscard]] Prescription solve(const VectorXd& x, const DecisionSpace& space) const {
    space.validate();
    const auto d = static_cast<Eigen::Index>(model_.covariate_dim);
    const auto p = static_cast<Eigen::Index>(model_.decision_dim);
    if (x.size() != d || space.lower.size() != p) throw Error("query or space dimension does not match the tree");
    Prescription best;
    VectorXd q(d + p);
    q.head(d) = x;
    std::size_t evaluations = 0;
    for (const auto& region : regions_) {
      if (!region.contains_covariates(x)) continue;
      auto [lo, hi] = region.decision_box(space, model_.covariate_dim);
      if ((lo.array() > hi.array()).any()) continue;
      auto f = [&](const VectorXd& z) {
        q.tail(p) = z;
        return leaf_objective(region.id, {q.data(), static_cast<std::size_t>(q.size())}).value;
      };
      auto m = minimize_convex_box(f, lo, hi, space.constraints, true);
      evaluations += m.evaluations;
      if (!m.feasible) continue;
      // cells are open at their lower bound; step inside so routing agrees
      VectorXd z = m.z;
      for (Eigen::Index k = 0; k < p; ++k) {
        const double open_lo = region.lower[d + k];
        if (z[k] <= open_lo) z[k] = std::nextafter(open_lo, std::numeric_limits<double>::infinity());
      }
      std::size_t routed = 0;
      const auto val = evaluate(x, z, &routed);
      ++evaluations;
      if (val.value < best.value) {
        best.value = val.value;
        best.parts = val;
        best.z = z;
        best.leaf = static_cast<std::int64_t>(routed);
        best.iterations = m.cycles;
        best.converged = m.converged;
      }
    }
    if (best.z.size() == 0) throw Error("no leaf intersects the feasible decision set");
    best.evaluations = evaluations;
    return best;
  }

 private:
  const TreeModel& model_;
  const TrainingView& view_;
  CostFunction cost_;
  PenaltyConfig cfg_;
  std::vector<LeafRegion> regions_;
};

inline Prescription optimize_tree(const TreeModel& model, const TrainingView& view, const VectorXd& x,
                                  const CostFunction& cost, const PenaltyConfig& cfg, const DecisionSpace& space) {
  return TreeOptimizer(model, view, cost, cfg).solve(x, space);
}

// ---------------------------------------------------------------------------
// Forests: coordinate descent over a per-coordinate discretization

struct ForestSearchOptions {
  std::size_t restarts = 5;
  std::size_t grid_points = 101;
  std::size_t max_cycles = 100;
  double min_improvement = 1e-9;
  std::uint64_t seed = 0;
};

// Not thread-safe: holds scratch buffers. Build one per worker.
class ForestObjective {
 public:
  ForestObjective(const ForestModel& model, const TrainingView& view, CostFunction cost, PenaltyConfig cfg)
      : model_(model), view_(view), cost_(std::move(cost)), cfg_(cfg), acc_(model.n_train) {
    cfg_.validate();
    if (view.feature_dim() != model.feature_dim()) throw Error("training view does not match the forest");
  }

  ObjectiveValue operator()(std::span<const double> query) {
    const double per_tree = 1.0 / static_cast<double>(model_.trees.size());
    for (const auto& tree : model_.trees) {
      const auto& members = tree.leaf_members[tree.route(query)];
      const double w = per_tree / static_cast<double>(members.size());
      for (auto i : members) acc_.add(i, w);
    }
    auto out = evaluate_weighted(view_, cost_, cfg_, query, [&](auto&& fn) { acc_.for_each(fn); });
    acc_.clear();
    ++evaluations_;
    return out;
  }

  ObjectiveValue operator()(const VectorXd& x, const VectorXd& z) {
    query_.resize(x.size() + z.size());
    query_ << x, z;
    return (*this)({query_.data(), static_cast<std::size_t>(query_.size())});
  }

  [[nodiscard]] std::size_t evaluations() const { return evaluations_; }
  [[nodiscard]] const PenaltyConfig& config() const { return cfg_; }

 private:
  const ForestModel& model_;
  const TrainingView& view_;
  CostFunction cost_;
  PenaltyConfig cfg_;
  WeightAccumulator acc_;
  VectorXd query_;
  std::size_t evaluations_ = 0;
};

inline Prescription optimize_forest(ForestObjective& objective, const VectorXd& x, const DecisionSpace& space,
                                    const ForestSearchOptions& opt) {
  space.validate();
  if (opt.restarts < 1) throw Error("restarts must be at least 1");
  if (opt.grid_points < 2) throw Error("grid_points must be at least 2");
  const auto d = x.size();
  const auto p = space.lower.size();
  VectorXd q(d + p);
  q.head(d) = x;
  auto eval = [&](const VectorXd& z) {
    q.tail(p) = z;
    return objective({q.data(), static_cast<std::size_t>(q.size())});
  };
  const std::size_t start_evals = objective.evaluations();
  Prescription best;
  for (std::size_t r = 0; r < opt.restarts; ++r) {
    std::mt19937_64 rng(derive_seed(opt.seed, r));
    VectorXd z(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      std::uniform_real_distribution<double> u(space.lower[k], space.upper[k]);
      z[k] = space.lower[k] == space.upper[k] ? space.lower[k] : u(rng);
    }
    z = space.project(z);
    ObjectiveValue cur = eval(z);
    bool converged = false;
    std::size_t cycle = 0;
    for (cycle = 1; cycle <= opt.max_cycles; ++cycle) {
      bool moved = false;
      for (Eigen::Index k = 0; k < p; ++k) {
        auto [lo, hi] = space.coordinate_interval(z, k);
        if (lo > hi) continue;
        const double old = z[k];
        double best_t = old;
        ObjectiveValue best_v = cur;
        const std::size_t g = lo == hi ? 1 : opt.grid_points;
        for (std::size_t j = 0; j < g; ++j) {
          const double t =
              (j + 1 == g) ? hi : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(g - 1);
          z[k] = t;
          const auto v = eval(z);
          if (v.value < best_v.value) {
            best_v = v;
            best_t = t;
          }
        }
        if (best_v.value < cur.value - opt.min_improvement) {
          z[k] = best_t;
          cur = best_v;
          moved = true;
        } else {
          z[k] = old;
        }
      }
      if (!moved) {
        converged = true;
        break;
      }
    }
    if (cur.value < best.value) {
      best.value = cur.value;
      best.parts = cur;
      best.z = z;
      best.restart = static_cast<std::int64_t>(r);
      best.iterations = std::min(cycle, opt.max_cycles);
      best.converged = converged;
    }
  }
  best.evaluations = objective.evaluations() - start_evals;
  return best;
}

inline Prescription optimize_forest(const ForestModel& model, const TrainingView& view, const VectorXd& x,
                                    const CostFunction& cost, const PenaltyConfig& cfg, const DecisionSpace& space,
                                    const ForestSearchOptions& opt) {
  ForestObjective objective(model, view, cost, cfg);
  return optimize_forest(objective, x, space, opt);
}

// ---------------------------------------------------------------------------
// Linear models: projected gradient with backtracking step control

inline Prescription optimize_linear(const LinearModel& model, const VectorXd& x, double lambda1,
                                    const DecisionSpace& space, ObjectiveMode mode = ObjectiveMode::plain,
                                    std::size_t max_iterations = 10000) {
  space.validate();
  if (static_cast<std::size_t>(x.size()) != model.covariate_dim || space.dim() != model.decision_dim)
    throw Error("query or space dimension does not match the linear model");
  if (lambda1 < 0.0) throw Error("lambda1 must be nonnegative");
  auto f = [&](const VectorXd& z) { return linear_objective(model, x, z, lambda1, mode); };
  VectorXd z = space.project(space.center());
  double fz = f(z);
  double step = 1.0;
  Prescription out;
  out.converged = false;
  std::size_t it = 0;
  for (it = 0; it < max_iterations; ++it) {
    const VectorXd g = linear_objective_gradient(model, x, z, lambda1, mode);
    bool accepted = false;
    while (step > 1e-30) {
      const VectorXd zn = space.project(z - step * g);
      const VectorXd dz = zn - z;
      const double dn = dz.squaredNorm();
      if (dn == 0.0) break;
      const double fn = f(zn);
      if (fn <= fz + g.dot(dz) + dn / (2.0 * step) || fn < fz - 1e-15 * std::abs(fz)) {
        accepted = true;
        z = zn;
        const double drop = fz - fn;
        fz = fn;
        step *= 2.0;
        if (std::sqrt(dn) <= 1e-13 * (1.0 + z.norm()) || drop <= 1e-16 * (1.0 + std::abs(fz))) {
          out.converged = true;
        }
        break;
      }
      step *= 0.5;
    }
    if (!accepted || out.converged) {
      out.converged = true;
      break;
    }
  }
  out.z = z;
  out.value = fz;
  out.iterations = it;
  const VectorXd v = model.design_row(x, z);
  out.parts.mu = model.predict(v);
  out.parts.mean_term = mode == ObjectiveMode::plain ? out.parts.mu : out.parts.mu * out.parts.mu;
  out.parts.sqrt_v = model.sigma * std::sqrt(std::max(0.0, model.variance_shape(v)));
  out.parts.bias = 0.0;
  out.parts.value = fz;
  return out;
}

}  // namespace prescript
