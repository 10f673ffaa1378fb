#pragma once

#include <random>

#include "prescript/dataset.hpp"

namespace prescript::testing {

// n rows with d uniform covariates, p uniform decisions and y = f(x, z) + noise.
template <typename F>
ObservationalDataset make_data(std::size_t n, std::size_t d, std::size_t p, std::uint64_t seed, F&& f,
                               double noise = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ObservationalDataset ds;
  const auto rows = static_cast<Eigen::Index>(n);
  ds.covariates.resize(rows, static_cast<Eigen::Index>(d));
  ds.decisions.resize(rows, static_cast<Eigen::Index>(p));
  ds.outcomes.resize(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < ds.covariates.cols(); ++k) ds.covariates(i, k) = unif(rng);
    for (Eigen::Index k = 0; k < ds.decisions.cols(); ++k) ds.decisions(i, k) = unif(rng);
    const VectorXd x = ds.covariates.row(i).transpose();
    const VectorXd z = ds.decisions.row(i).transpose();
    ds.outcomes(i, 0) = f(x, z) + noise * normal(rng);
  }
  for (std::size_t k = 0; k < d; ++k) ds.covariate_names.push_back("x" + std::to_string(k + 1));
  for (std::size_t k = 0; k < p; ++k) ds.decision_names.push_back("z" + std::to_string(k + 1));
  ds.outcome_names = {"y"};
  return ds;
}

inline FeaturePoint random_point(std::size_t d, std::size_t p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-0.1, 1.1);
  FeaturePoint q{VectorXd(static_cast<Eigen::Index>(d)), VectorXd(static_cast<Eigen::Index>(p))};
  for (Eigen::Index k = 0; k < q.x.size(); ++k) q.x[k] = unif(rng);
  for (Eigen::Index k = 0; k < q.z.size(); ++k) q.z[k] = unif(rng);
  return q;
}

}  // namespace prescript::testing
