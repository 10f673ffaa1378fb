#pragma once

#include <functional>
#include <span>
#include <string>

#include "prescript/core.hpp"

namespace prescript {

// c(z; y): known cost of decision z under outcome y.
struct CostFunction {
  using Evaluator = std::function<double(std::span<const double> z, std::span<const double> y)>;

  std::string name;
  Evaluator eval;
  double lipschitz = 1.0;  // in z
  double bound = 1.0;      // declared sup |c|; values above 1 are recorded, not rejected
  bool convex_in_z = true;

  [[nodiscard]] double operator()(std::span<const double> z, std::span<const double> y) const { return eval(z, y); }
  [[nodiscard]] bool exceeds_unit_bound() const { return bound > 1.0; }
};

// c(z; y) = y_1. The dosing response and any "predict the cost directly" target.
inline CostFunction identity_cost(double lipschitz = 1.0, double bound = 1.0) {
  return {"identity", [](std::span<const double>, std::span<const double> y) { return y[0]; }, lipschitz, bound,
          true};
}

// c(z; y) = -z.y, so minimizing cost maximizes revenue.
inline CostFunction negative_revenue_cost(double lipschitz = 1.0, double bound = 1.0) {
  return {"negative_revenue",
          [](std::span<const double> z, std::span<const double> y) {
            double s = 0.0;
            for (std::size_t k = 0; k < z.size(); ++k) s -= z[k] * y[k];
            return s;
          },
          lipschitz, bound, true};
}

// c(z; y) = ||z - y||^2.
inline CostFunction squared_error_cost(double lipschitz = 1.0, double bound = 1.0) {
  return {"squared_error",
          [](std::span<const double> z, std::span<const double> y) {
            double s = 0.0;
            for (std::size_t k = 0; k < z.size(); ++k) s += (z[k] - y[k]) * (z[k] - y[k]);
            return s;
          },
          lipschitz, bound, true};
}

inline CostFunction cost_by_name(const std::string& name, double lipschitz = 1.0, double bound = 1.0) {
  if (name == "identity") return identity_cost(lipschitz, bound);
  if (name == "negative_revenue") return negative_revenue_cost(lipschitz, bound);
  if (name == "squared_error") return squared_error_cost(lipschitz, bound);
  throw Error("unknown cost function: " + name);
}

}  // namespace prescript
