#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "prescript/dataset.hpp"

namespace prescript {

enum class LinearKind { ols, ridge, lasso_approx };

inline std::string to_string(LinearKind k) {
  switch (k) {
    case LinearKind::ols: return "ols";
    case LinearKind::ridge: return "ridge";
    case LinearKind::lasso_approx: return "lasso_approx";
  }
  return "ols";
}

inline LinearKind linear_kind_from_string(const std::string& s) {
  if (s == "ols") return LinearKind::ols;
  if (s == "ridge") return LinearKind::ridge;
  if (s == "lasso_approx" || s == "lasso") return LinearKind::lasso_approx;
  throw Error("unknown linear model kind: " + s);
}

// Prediction v.beta with predictive variance sigma^2 * v'Mv, v = (x, z).
struct LinearModel {
  LinearKind kind = LinearKind::ols;
  VectorXd beta;
  MatrixXd shape;  // M
  double sigma = 0.0;
  double alpha_reg = 0.0;
  std::vector<std::size_t> active;
  bool empty_active = false;
  std::size_t covariate_dim = 0;
  std::size_t decision_dim = 0;
  // lasso diagnostics
  std::size_t sweeps = 0;
  bool converged = true;
  double approximation_residual = 0.0;  // max |beta_approx - beta_cd|

  [[nodiscard]] VectorXd design_row(const VectorXd& x, const VectorXd& z) const {
    VectorXd v(x.size() + z.size());
    v << x, z;
    return v;
  }
  [[nodiscard]] double predict(const VectorXd& v) const { return v.dot(beta); }
  [[nodiscard]] double variance_shape(const VectorXd& v) const { return v.dot(shape * v); }
};

namespace detail {

inline MatrixXd design_matrix(const ObservationalDataset& ds) {
  MatrixXd a(ds.decisions.rows(), static_cast<Eigen::Index>(ds.feature_dim()));
  if (ds.covariates.cols() > 0) a.leftCols(ds.covariates.cols()) = ds.covariates;
  a.rightCols(ds.decisions.cols()) = ds.decisions;
  return a;
}

inline double residual_variance(const MatrixXd& a, const VectorXd& y, const VectorXd& beta, std::size_t k) {
  const double rss = (y - a * beta).squaredNorm();
  const auto n = static_cast<double>(a.rows());
  const double dof = std::max(1.0, n - static_cast<double>(k));
  return rss / dof;
}

inline LinearModel fit_normal_equations(const ObservationalDataset& train, const VectorXd& target, double alpha,
                                        LinearKind kind) {
  const MatrixXd a = design_matrix(train);
  if (target.size() != a.rows()) throw Error("target length differs from row count");
  MatrixXd gram = a.transpose() * a;
  if (alpha > 0.0) gram.diagonal().array() += alpha;
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12)
    throw Error("singular design: A'A is rank deficient (use ridge with alpha > 0)");
  LinearModel m;
  m.kind = kind;
  m.alpha_reg = alpha;
  m.covariate_dim = train.covariate_dim();
  m.decision_dim = train.decision_dim();
  m.beta = llt.solve(a.transpose() * target);
  m.shape = llt.solve(MatrixXd::Identity(gram.rows(), gram.cols()));
  m.shape = 0.5 * (m.shape + m.shape.transpose());
  m.sigma = std::sqrt(residual_variance(a, target, m.beta, static_cast<std::size_t>(a.cols())));
  m.active.resize(static_cast<std::size_t>(a.cols()));
  std::iota(m.active.begin(), m.active.end(), std::size_t{0});
  return m;
}

}  // namespace detail

inline LinearModel fit_ols(const ObservationalDataset& train, const VectorXd& target) {
  return detail::fit_normal_equations(train, target, 0.0, LinearKind::ols);
}
inline LinearModel fit_ols(const ObservationalDataset& train) {
  if (train.outcome_dim() != 1) throw Error("fit_ols on a dataset needs a scalar outcome");
  return fit_ols(train, VectorXd(train.outcomes.col(0)));
}

inline LinearModel fit_ridge(const ObservationalDataset& train, const VectorXd& target, double alpha) {
  if (alpha < 0.0) throw Error("ridge alpha must be nonnegative");
  if (alpha == 0.0) {
    auto m = fit_ols(train, target);
    m.kind = LinearKind::ridge;
    return m;
  }
  return detail::fit_normal_equations(train, target, alpha, LinearKind::ridge);
}
inline LinearModel fit_ridge(const ObservationalDataset& train, double alpha) {
  if (train.outcome_dim() != 1) throw Error("fit_ridge on a dataset needs a scalar outcome");
  return fit_ridge(train, VectorXd(train.outcomes.col(0)), alpha);
}

struct LassoSolution {
  VectorXd beta;
  std::size_t sweeps = 0;
  bool converged = false;
};

// Cyclic coordinate descent with soft-thresholding on 0.5 ||y - A b||^2 + alpha ||b||_1.
inline LassoSolution lasso_coordinate_descent(const MatrixXd& a, const VectorXd& y, double alpha,
                                              double tolerance = 1e-8, std::size_t max_sweeps = 100000) {
  const auto p = a.cols();
  LassoSolution sol;
  sol.beta = VectorXd::Zero(p);
  VectorXd residual = y;
  const VectorXd col_sq = a.colwise().squaredNorm().transpose();
  for (sol.sweeps = 1; sol.sweeps <= max_sweeps; ++sol.sweeps) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq[j] <= 0.0) continue;
      const double old = sol.beta[j];
      const double rho = a.col(j).dot(residual) + col_sq[j] * old;
      const double mag = std::max(std::abs(rho) - alpha, 0.0);
      const double updated = (rho > 0 ? mag : -mag) / col_sq[j];
      if (updated != old) {
        residual -= (updated - old) * a.col(j);
        sol.beta[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    if (max_change < tolerance) {
      sol.converged = true;
      break;
    }
  }
  sol.sweeps = std::min(sol.sweeps, max_sweeps);
  return sol;
}

// Lasso coefficients from coordinate descent; the variance shape comes from
// the ridge-like local approximation (P A'A P' + alpha P W)^-1 on the active
// set with W = diag(1/|beta_j|), zero elsewhere.
inline LinearModel fit_lasso_approx(const ObservationalDataset& train, const VectorXd& target, double alpha) {
  if (!(alpha > 0.0)) throw Error("lasso alpha must be positive");
  const MatrixXd a = detail::design_matrix(train);
  if (target.size() != a.rows()) throw Error("target length differs from row count");
  const auto dim = a.cols();
  const auto cd = lasso_coordinate_descent(a, target, alpha);

  LinearModel m;
  m.kind = LinearKind::lasso_approx;
  m.alpha_reg = alpha;
  m.covariate_dim = train.covariate_dim();
  m.decision_dim = train.decision_dim();
  m.sweeps = cd.sweeps;
  m.converged = cd.converged;
  m.beta = VectorXd::Zero(dim);
  m.shape = MatrixXd::Zero(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    if (cd.beta[j] != 0.0) m.active.push_back(static_cast<std::size_t>(j));
  if (m.active.empty()) {
    m.empty_active = true;
    m.sigma = std::sqrt(detail::residual_variance(a, target, m.beta, 0));
    return m;
  }
  const auto k = static_cast<Eigen::Index>(m.active.size());
  MatrixXd ap(a.rows(), k);
  VectorXd inv_abs(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto j = static_cast<Eigen::Index>(m.active[static_cast<std::size_t>(c)]);
    ap.col(c) = a.col(j);
    inv_abs[c] = 1.0 / std::abs(cd.beta[j]);
  }
  MatrixXd h = ap.transpose() * ap;
  h.diagonal() += alpha * inv_abs;
  Eigen::LDLT<MatrixXd> ldlt(h);
  const VectorXd bp = ldlt.solve(ap.transpose() * target);
  MatrixXd hp_inv = ldlt.solve(MatrixXd::Identity(k, k));
  hp_inv = 0.5 * (hp_inv + hp_inv.transpose());
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto j = static_cast<Eigen::Index>(m.active[static_cast<std::size_t>(c)]);
    m.beta[j] = bp[c];
    m.approximation_residual = std::max(m.approximation_residual, std::abs(bp[c] - cd.beta[j]));
    for (Eigen::Index c2 = 0; c2 < k; ++c2)
      m.shape(j, static_cast<Eigen::Index>(m.active[static_cast<std::size_t>(c2)])) = hp_inv(c, c2);
  }
  m.sigma = std::sqrt(detail::residual_variance(a, target, m.beta, m.active.size()));
  return m;
}
inline LinearModel fit_lasso_approx(const ObservationalDataset& train, double alpha) {
  if (train.outcome_dim() != 1) throw Error("fit_lasso_approx on a dataset needs a scalar outcome");
  return fit_lasso_approx(train, VectorXd(train.outcomes.col(0)), alpha);
}

enum class ObjectiveMode { plain, squared_mean };

inline std::string to_string(ObjectiveMode m) { return m == ObjectiveMode::plain ? "plain" : "squared_mean"; }
inline ObjectiveMode objective_mode_from_string(const std::string& s) {
  if (s == "plain") return ObjectiveMode::plain;
  if (s == "squared_mean") return ObjectiveMode::squared_mean;
  throw Error("unknown objective mode: " + s);
}

// v.beta + lambda1 * sigma * sqrt(v'Mv), v = (x, z). The bias weight is zero
// for this family. In squared_mean mode the prediction term is squared.
inline double linear_objective(const LinearModel& m, const VectorXd& x, const VectorXd& z, double lambda1,
                               ObjectiveMode mode = ObjectiveMode::plain) {
  const VectorXd v = m.design_row(x, z);
  const double pred = m.predict(v);
  const double mean_term = mode == ObjectiveMode::plain ? pred : pred * pred;
  return mean_term + lambda1 * m.sigma * std::sqrt(std::max(0.0, m.variance_shape(v)));
}

// Gradient of linear_objective with respect to z.
inline VectorXd linear_objective_gradient(const LinearModel& m, const VectorXd& x, const VectorXd& z, double lambda1,
                                          ObjectiveMode mode = ObjectiveMode::plain) {
  const VectorXd v = m.design_row(x, z);
  const auto d = x.size();
  const auto p = z.size();
  VectorXd g = m.beta.tail(p);
  if (mode == ObjectiveMode::squared_mean) g *= 2.0 * m.predict(v);
  const VectorXd mv = m.shape * v;
  const double q = v.dot(mv);
  if (lambda1 > 0.0 && q > 0.0) g += lambda1 * m.sigma * mv.segment(d, p) / std::sqrt(q);
  return g;
}

inline nlohmann::json linear_to_json(const LinearModel& m) {
  std::vector<double> beta(m.beta.data(), m.beta.data() + m.beta.size());
  std::vector<double> shape;
  for (Eigen::Index r = 0; r < m.shape.rows(); ++r)
    for (Eigen::Index c = 0; c < m.shape.cols(); ++c) shape.push_back(m.shape(r, c));
  return {{"kind", to_string(m.kind)},
          {"beta", beta},
          {"M", shape},
          {"sigma", m.sigma},
          {"alpha_reg", m.alpha_reg},
          {"active", m.active},
          {"empty_active", m.empty_active},
          {"covariate_dim", m.covariate_dim},
          {"decision_dim", m.decision_dim},
          {"approximation_residual", m.approximation_residual}};
}

inline LinearModel linear_from_json(const nlohmann::json& j) {
  LinearModel m;
  m.kind = linear_kind_from_string(j.at("kind").get<std::string>());
  const auto beta = j.at("beta").get<std::vector<double>>();
  const auto dim = static_cast<Eigen::Index>(beta.size());
  m.beta = Eigen::Map<const VectorXd>(beta.data(), dim);
  const auto shape = j.at("M").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(shape.size()) != dim * dim) throw Error("linear model M has wrong size");
  m.shape.resize(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) m.shape(r, c) = shape[static_cast<std::size_t>(r * dim + c)];
  m.sigma = j.at("sigma").get<double>();
  m.alpha_reg = j.at("alpha_reg").get<double>();
  m.active = j.at("active").get<std::vector<std::size_t>>();
  m.empty_active = j.value("empty_active", false);
  m.covariate_dim = j.at("covariate_dim").get<std::size_t>();
  m.decision_dim = j.at("decision_dim").get<std::size_t>();
  m.approximation_residual = j.value("approximation_residual", 0.0);
  return m;
}

}  // namespace prescript
