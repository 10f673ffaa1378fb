#pragma once

#include <functional>
#include <string>
#include <vector>

#include "prescript/honest_forest.hpp"
#include "prescript/prescriber.hpp"

namespace prescript {

// Forest fitted on validation (X, Z) -> target, used to score decisions that
// were never taken.
struct ImputationModel {
  ForestModel forest;
  VectorXd target;

  [[nodiscard]] double predict(const VectorXd& x, const VectorXd& z) const { return forest_predict(forest, target, {x, z}); }
};

inline ImputationModel impute_counterfactuals(const ObservationalDataset& validation, const VectorXd& target,
                                              const ForestParams& params) {
  if (validation.rows() == 0) throw Error("imputation needs validation rows");
  return {fit_honest_forest(validation, target, params), target};
}

inline ImputationModel impute_counterfactuals(const ObservationalDataset& validation, const ForestParams& params) {
  return impute_counterfactuals(validation, outcome_target(validation), params);
}

// One (model, lambda1, lambda2) combination, already fitted on the training part.
struct CandidateModel {
  std::string label;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::function<double(const VectorXd& x, const VectorXd& z)> predict;
  std::function<std::vector<VectorXd>(const MatrixXd& xs)> prescribe;
};

struct CandidateScore {
  double mse = 0.0;
  double imputed_cost = 0.0;
  double score = 0.0;
};

struct SelectionResult {
  std::size_t best = 0;
  std::vector<CandidateScore> scores;
};

struct SelectionOptions {
  double mse_weight = 1.0;
  ObjectiveMode mode = ObjectiveMode::plain;  // squared_mean scores g(t) = t^2
  std::size_t max_points = 0;                 // prescribe at the first rows only; 0 = all
};

// score = mse_weight * validation MSE + mean imputed cost of the candidate's
// prescriptions at the validation covariates. Ties keep the earlier candidate.
inline SelectionResult select_model(const std::vector<CandidateModel>& candidates,
                                    const ObservationalDataset& validation, const VectorXd& target,
                                    const ImputationModel& imputer, const SelectionOptions& opt = {}) {
  if (candidates.empty()) throw Error("select_model needs at least one candidate");
  const auto n = static_cast<Eigen::Index>(validation.rows());
  const Eigen::Index m = opt.max_points == 0 ? n : std::min<Eigen::Index>(n, static_cast<Eigen::Index>(opt.max_points));
  const MatrixXd xs = validation.covariates.topRows(m);
  SelectionResult res;
  res.scores.resize(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& cand = candidates[c];
    auto& s = res.scores[c];
    if (cand.predict) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double e = target[i] - cand.predict(validation.covariates.row(i).transpose(),
                                                  validation.decisions.row(i).transpose());
        s.mse += e * e;
      }
      s.mse /= static_cast<double>(n);
    }
    const auto zs = cand.prescribe(xs);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double t = imputer.predict(xs.row(i).transpose(), zs[static_cast<std::size_t>(i)]);
      s.imputed_cost += opt.mode == ObjectiveMode::plain ? t : t * t;
    }
    s.imputed_cost /= static_cast<double>(m);
    s.score = opt.mse_weight * s.mse + s.imputed_cost;
    if (s.score < res.scores[res.best].score) res.best = c;
  }
  return res;
}

// Candidates for every (lambda1, lambda2) pair on one fitted prescriber.
inline std::vector<CandidateModel> lambda_candidates(const Prescriber& p, const std::vector<double>& l1,
                                                     const std::vector<double>& l2, const DecisionSpace& space,
                                                     std::uint64_t seed) {
  std::vector<CandidateModel> out;
  for (double a : l1)
    for (double b : l2) {
      CandidateModel c;
      c.label = p.kind();
      c.lambda1 = a;
      c.lambda2 = b;
      c.predict = [&p](const VectorXd& x, const VectorXd& z) { return p.predict(x, z); };
      c.prescribe = [&p, a, b, &space, seed](const MatrixXd& xs) {
        std::vector<VectorXd> zs;
        for (auto& r : p.prescribe(xs, a, b, space, seed)) zs.push_back(std::move(r.z));
        return zs;
      };
      out.push_back(std::move(c));
    }
  return out;
}

}  // namespace prescript
