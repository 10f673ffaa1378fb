#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "prescript/dataset.hpp"

namespace prescript::dosing {

inline constexpr double kConstantDose = 35.0;

struct Options {
  double missing_bmi_rate = 0.1;
  std::size_t noise_covariates = 6;
  double genotype1_rate = 0.35;
  double genotype2_rate = 0.25;
  double dose_cap = 80.0;  // upper end of the decision space
};

// Synthetic ground truth: 25 + 10 bmi + 7.5 g1 + 5 g2 + 3 sin(2 age).
inline double optimal_dose(double bmi, double age, double g1, double g2) {
  return 25.0 + 10.0 * bmi + 7.5 * g1 + 5.0 * g2 + 3.0 * std::sin(2.0 * age);
}

// Patients without a treatment history. Covariate columns: bmi (0 when
// missing), bmi_missing, age, g1, g2, noise1..k. bmi and age are standardized
// draws. The optimal dose uses the true BMI even when it is not recorded.
struct Patients {
  MatrixXd covariates;
  VectorXd optimal;
  std::vector<std::string> names;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(covariates.rows()); }
  [[nodiscard]] bool bmi_missing(std::size_t i) const { return covariates(static_cast<Eigen::Index>(i), 1) != 0.0; }
};

inline Patients generate_patients(std::size_t n, const Options& opt, std::uint64_t seed) {
  if (n < 1) throw Error("n must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution missing(opt.missing_bmi_rate), g1(opt.genotype1_rate), g2(opt.genotype2_rate);
  const auto d = static_cast<Eigen::Index>(5 + opt.noise_covariates);
  Patients p;
  p.covariates.resize(static_cast<Eigen::Index>(n), d);
  p.optimal.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.covariates.rows(); ++i) {
    const double bmi = normal(rng);
    const bool miss = missing(rng);
    const double age = normal(rng);
    const double a = g1(rng) ? 1.0 : 0.0;
    const double b = g2(rng) ? 1.0 : 0.0;
    p.covariates(i, 0) = miss ? 0.0 : bmi;
    p.covariates(i, 1) = miss ? 1.0 : 0.0;
    p.covariates(i, 2) = age;
    p.covariates(i, 3) = a;
    p.covariates(i, 4) = b;
    for (Eigen::Index k = 5; k < d; ++k) p.covariates(i, k) = normal(rng);
    p.optimal[i] = optimal_dose(bmi, age, a, b);
  }
  p.names = {"bmi", "bmi_missing", "age", "g1", "g2"};
  for (std::size_t k = 0; k < opt.noise_covariates; ++k) p.names.push_back("noise" + std::to_string(k + 1));
  return p;
}

// Historical dose: N(30 + 15 bmi, 64); a negative draw is replaced by U[0, 20];
// a patient without recorded BMI gets U[10, 50].
inline double historical_dose(double bmi, bool bmi_missing, std::mt19937_64& rng) {
  if (bmi_missing) return std::uniform_real_distribution<double>(10.0, 50.0)(rng);
  const double z = std::normal_distribution<double>(30.0 + 15.0 * bmi, 8.0)(rng);
  if (z < 0.0) return std::uniform_real_distribution<double>(0.0, 20.0)(rng);
  return z;
}

// R ~ N(z - z*, 400) capped to [-40, 40].
inline double response(double dose, double optimal, std::mt19937_64& rng) {
  const double r = std::normal_distribution<double>(dose - optimal, 20.0)(rng);
  return std::clamp(r, -40.0, 40.0);
}

// Assigns historical doses and observed responses to the patients.
inline ObservationalDataset assign_treatment(const Patients& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ObservationalDataset ds;
  const auto n = static_cast<Eigen::Index>(p.size());
  ds.covariates = p.covariates;
  ds.decisions.resize(n, 1);
  ds.outcomes.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = historical_dose(p.covariates(i, 0), p.bmi_missing(static_cast<std::size_t>(i)), rng);
    ds.decisions(i, 0) = z;
    ds.outcomes(i, 0) = response(z, p.optimal[i], rng);
  }
  ds.covariate_names = p.names;
  ds.decision_names = {"dose"};
  ds.outcome_names = {"response"};
  return ds;
}

struct DosingData {
  ObservationalDataset data;
  VectorXd optimal;  // evaluation only
};

inline DosingData generate_data(std::size_t n, const Options& opt, std::uint64_t seed) {
  auto patients = generate_patients(n, opt, derive_seed(seed, 0));
  auto ds = assign_treatment(patients, derive_seed(seed, 1));
  return {std::move(ds), std::move(patients.optimal)};
}

inline DecisionSpace dose_space(const Options& opt = {}) { return DecisionSpace::box(1, 0.0, opt.dose_cap); }

}  // namespace prescript::dosing
