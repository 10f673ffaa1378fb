#pragma once

#include <array>
#include <random>

#include "prescript/dataset.hpp"

namespace prescript::pricing {

inline constexpr std::size_t kProducts = 5;
inline constexpr double kPriceCap = 50.0;

// Historical price means: z_mean = M x with x in R^2.
inline constexpr std::array<std::array<double, 2>, kProducts> kPriceLoadings{
    {{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}, {0.5, 0.5}}};

// Expected demand for the five products.
inline VectorXd demand(const VectorXd& x, const VectorXd& z) {
  if (x.size() != 2 || z.size() != static_cast<Eigen::Index>(kProducts)) throw Error("pricing expects x in R^2 and z in R^5");
  const double x1 = x[0], x2 = x[1];
  VectorXd mu(5);
  mu[0] = 500 - z[0] * z[0] / 10 - x1 * z[0] / 10 - x1 * x1 / 10 - z[1];
  mu[1] = 500 - z[1] * z[1] / 10 - x1 * z[1] / 10 - x1 * x1 / 10 - z[0];
  mu[2] = 500 - z[2] * z[2] / 10 - x2 * z[2] / 10 - x2 * x2 / 10 + z[0] + z[1];
  mu[3] = 500 - z[3] * z[3] / 10 - x2 * z[3] / 10 - x2 * x2 / 10 + z[0] + z[1];
  mu[4] = 500 - z[4] * z[4] / 10 - x2 * z[4] / 20 - x1 * z[4] / 20 - x2 * x2 / 10;
  return mu;
}

inline double true_revenue(const VectorXd& x, const VectorXd& z) { return z.dot(demand(x, z)); }

inline DecisionSpace price_space(double cap = kPriceCap) { return DecisionSpace::box(kProducts, 0.0, cap); }

// X ~ N(10, 1)^2, Z ~ N(M X, 100 I), Y ~ N(mu(X, Z), 2500 I). Draw order per
// row: x1, x2, z1..z5, y1..y5.
inline ObservationalDataset generate_data(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error("n must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ObservationalDataset ds;
  const auto rows = static_cast<Eigen::Index>(n);
  ds.covariates.resize(rows, 2);
  ds.decisions.resize(rows, 5);
  ds.outcomes.resize(rows, 5);
  for (Eigen::Index i = 0; i < rows; ++i) {
    VectorXd x(2), z(5);
    for (Eigen::Index k = 0; k < 2; ++k) x[k] = 10.0 + normal(rng);
    for (std::size_t k = 0; k < kProducts; ++k)
      z[static_cast<Eigen::Index>(k)] = kPriceLoadings[k][0] * x[0] + kPriceLoadings[k][1] * x[1] + 10.0 * normal(rng);
    const VectorXd mu = demand(x, z);
    ds.covariates.row(i) = x.transpose();
    ds.decisions.row(i) = z.transpose();
    for (Eigen::Index k = 0; k < 5; ++k) ds.outcomes(i, k) = mu[k] + 50.0 * normal(rng);
  }
  ds.covariate_names = {"x1", "x2"};
  ds.decision_names = {"z1", "z2", "z3", "z4", "z5"};
  ds.outcome_names = {"y1", "y2", "y3", "y4", "y5"};
  return ds;
}

inline MatrixXd test_covariates(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(10.0, 1.0);
  MatrixXd x(static_cast<Eigen::Index>(m), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index k = 0; k < 2; ++k) x(i, k) = normal(rng);
  return x;
}

}  // namespace prescript::pricing
