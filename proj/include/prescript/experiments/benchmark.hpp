#pragma once

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "prescript/experiments/dosing.hpp"
#include "prescript/experiments/pricing.hpp"
#include "prescript/prescriber.hpp"
#include "prescript/stats.hpp"
#include "prescript/tuning.hpp"

namespace prescript {

enum class LambdaSelection { fixed, validation, theory };

inline LambdaSelection lambda_selection_from_string(const std::string& s) {
  if (s == "fixed") return LambdaSelection::fixed;
  if (s == "validation") return LambdaSelection::validation;
  if (s == "theory") return LambdaSelection::theory;
  throw Error("unknown lambda selection: " + s);
}

inline std::string to_string(LambdaSelection s) {
  switch (s) {
    case LambdaSelection::fixed: return "fixed";
    case LambdaSelection::validation: return "validation";
    case LambdaSelection::theory: return "theory";
  }
  return "fixed";
}

struct BenchmarkConfig {
  std::string experiment = "pricing";  // pricing | dosing
  std::vector<std::string> methods{"rf", "up-rf"};
  std::vector<std::size_t> n_values{250, 500, 1000, 2000};
  std::size_t replications = 20;
  std::size_t test_points = 500;
  std::uint64_t seed = 1;

  LambdaSelection selection = LambdaSelection::validation;
  double lambda1 = 1.0;  // fixed mode
  double lambda2 = 1.0;
  std::vector<double> lambda1_grid{0.0, 0.1, 1.0, 10.0};
  std::vector<double> lambda2_grid{0.0, 0.1, 1.0, 10.0};
  double validation_fraction = 0.3;
  std::size_t tuning_points = 100;
  double mse_weight = 1.0;
  double delta = 0.05;      // theory mode
  double lipschitz = 1.0;   // theory mode; also lambda2 in that mode

  TreeParams tree;
  ForestParams forest;
  ForestParams imputer;
  ForestParams oracle;  // oracle-lb forest
  double lasso_alpha = 1.0;
  bool linear_intercept = true;
  ForestSearchOptions search;

  bool normalize = false;
  dosing::Options dosing;
  double price_cap = pricing::kPriceCap;
  std::size_t workers = 1;
};

namespace detail {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"cart", "up-cart", "rf", "up-rf", "lasso", "up-lasso", "constant-dose",
                                          "oracle-lb"};
  return m;
}

inline std::string base_learner(const std::string& method) {
  return method.rfind("up-", 0) == 0 ? method.substr(3) : method;
}

inline void read_forest(const nlohmann::json& j, ForestParams& p) { p = forest_params_from_json(j, p); }

}  // namespace detail

inline BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j) {
  BenchmarkConfig c;
  c.experiment = j.value("experiment", c.experiment);
  if (c.experiment != "pricing" && c.experiment != "dosing") throw Error("unknown experiment: " + c.experiment);
  if (c.experiment == "dosing") {
    c.normalize = true;
    c.methods = {"cart", "up-cart", "rf", "up-rf", "lasso", "up-lasso", "constant-dose", "oracle-lb"};
  }
  c.methods = j.value("methods", c.methods);
  c.n_values = j.value("n_values", c.n_values);
  c.replications = j.value("replications", c.replications);
  c.test_points = j.value("test_points", c.test_points);
  c.seed = j.value("seed", c.seed);
  if (j.contains("lambda_selection")) c.selection = lambda_selection_from_string(j.at("lambda_selection"));
  c.lambda1 = j.value("lambda1", c.lambda1);
  c.lambda2 = j.value("lambda2", c.lambda2);
  c.lambda1_grid = j.value("lambda1_grid", c.lambda1_grid);
  c.lambda2_grid = j.value("lambda2_grid", c.lambda2_grid);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.tuning_points = j.value("tuning_points", c.tuning_points);
  c.mse_weight = j.value("mse_weight", c.mse_weight);
  c.delta = j.value("delta", c.delta);
  c.lipschitz = j.value("lipschitz", c.lipschitz);
  if (j.contains("tree")) c.tree = tree_params_from_json(j.at("tree"), c.tree);
  if (j.contains("forest")) detail::read_forest(j.at("forest"), c.forest);
  c.imputer = c.forest;
  if (j.contains("imputer")) detail::read_forest(j.at("imputer"), c.imputer);
  c.oracle = c.forest;
  if (j.contains("oracle")) detail::read_forest(j.at("oracle"), c.oracle);
  c.lasso_alpha = j.value("lasso_alpha", c.lasso_alpha);
  c.linear_intercept = j.value("linear_intercept", c.linear_intercept);
  if (j.contains("search")) {
    const auto& s = j.at("search");
    c.search.restarts = s.value("restarts", c.search.restarts);
    c.search.grid_points = s.value("grid_points", c.search.grid_points);
    c.search.max_cycles = s.value("max_cycles", c.search.max_cycles);
    c.search.min_improvement = s.value("min_improvement", c.search.min_improvement);
  }
  c.normalize = j.value("normalize", c.normalize);
  if (j.contains("dosing")) {
    const auto& d = j.at("dosing");
    c.dosing.missing_bmi_rate = d.value("missing_bmi_rate", c.dosing.missing_bmi_rate);
    c.dosing.noise_covariates = d.value("noise_covariates", c.dosing.noise_covariates);
    c.dosing.genotype1_rate = d.value("genotype1_rate", c.dosing.genotype1_rate);
    c.dosing.genotype2_rate = d.value("genotype2_rate", c.dosing.genotype2_rate);
    c.dosing.dose_cap = d.value("dose_cap", c.dosing.dose_cap);
  }
  c.price_cap = j.value("price_cap", c.price_cap);
  c.workers = j.value("workers", c.workers);

  if (c.methods.empty()) throw Error("benchmark needs at least one method");
  for (const auto& m : c.methods) {
    const auto& k = detail::known_methods();
    if (std::find(k.begin(), k.end(), m) == k.end()) throw Error("unknown method: " + m);
    if (c.experiment == "pricing" && (m == "oracle-lb" || m == "constant-dose"))
      throw Error(m + " is defined for the dosing experiment only");
  }
  if (c.n_values.empty() || c.replications == 0 || c.test_points == 0)
    throw Error("n_values, replications and test_points must be nonempty");
  if (c.lambda1_grid.empty() || c.lambda2_grid.empty()) throw Error("lambda grids must be nonempty");
  return c;
}

inline nlohmann::ordered_json benchmark_config_to_json(const BenchmarkConfig& c) {
  auto forest = [](const ForestParams& p) {
    return nlohmann::ordered_json{{"trees", p.trees},
                                  {"min_leaf", p.min_leaf},
                                  {"max_leaves", p.max_leaves},
                                  {"honesty_fraction", p.honesty_fraction},
                                  {"max_features", p.max_features},
                                  {"bootstrap", p.bootstrap}};
  };
  nlohmann::ordered_json j;
  j["experiment"] = c.experiment;
  j["methods"] = c.methods;
  j["n_values"] = c.n_values;
  j["replications"] = c.replications;
  j["test_points"] = c.test_points;
  j["seed"] = c.seed;
  j["lambda_selection"] = to_string(c.selection);
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["lambda1_grid"] = c.lambda1_grid;
  j["lambda2_grid"] = c.lambda2_grid;
  j["validation_fraction"] = c.validation_fraction;
  j["tuning_points"] = c.tuning_points;
  j["mse_weight"] = c.mse_weight;
  j["delta"] = c.delta;
  j["lipschitz"] = c.lipschitz;
  j["tree"] = {{"min_leaf", c.tree.min_leaf}, {"max_leaves", c.tree.max_leaves},
               {"honesty_fraction", c.tree.honesty_fraction}, {"max_features", c.tree.max_features}};
  j["forest"] = forest(c.forest);
  j["imputer"] = forest(c.imputer);
  j["oracle"] = forest(c.oracle);
  j["lasso_alpha"] = c.lasso_alpha;
  j["linear_intercept"] = c.linear_intercept;
  j["search"] = {{"restarts", c.search.restarts},
                 {"grid_points", c.search.grid_points},
                 {"max_cycles", c.search.max_cycles},
                 {"min_improvement", c.search.min_improvement}};
  j["normalize"] = c.normalize;
  if (c.experiment == "dosing")
    j["dosing"] = {{"missing_bmi_rate", c.dosing.missing_bmi_rate},
                   {"noise_covariates", c.dosing.noise_covariates},
                   {"genotype1_rate", c.dosing.genotype1_rate},
                   {"genotype2_rate", c.dosing.genotype2_rate},
                   {"dose_cap", c.dosing.dose_cap}};
  else
    j["price_cap"] = c.price_cap;
  return j;
}

// FNV-1a over the canonical config dump (workers excluded).
inline std::string config_fingerprint(const BenchmarkConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : benchmark_config_to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// One experiment instance: training draws, fixed test covariates, scoring.

struct TrainingDraw {
  ObservationalDataset data;
  VectorXd optimal;  // dosing only: true optimal dose per training row
};

// Seed streams. Fit and search seeds depend only on (n, replication, learner)
// so a method's prescriptions do not depend on which other methods run.
enum SeedStream : std::uint64_t { kTrainStream = 1, kTestStream, kFitStream, kSearchStream, kSplitStream, kTuneStream };

class Experiment {
 public:
  explicit Experiment(const BenchmarkConfig& cfg) : cfg_(cfg) {
    if (cfg.experiment == "pricing") {
      settings_.cost = negative_revenue_cost();
      settings_.mode = ObjectiveMode::plain;
      space_ = pricing::price_space(cfg.price_cap);
      test_raw_ = pricing::test_covariates(cfg.test_points, derive_seed(cfg.seed, kTestStream));
    } else {
      settings_.cost = identity_cost();
      settings_.mode = ObjectiveMode::squared_mean;
      space_ = dosing::dose_space(cfg.dosing);
      auto patients = dosing::generate_patients(cfg.test_points, cfg.dosing, derive_seed(cfg.seed, kTestStream));
      test_raw_ = std::move(patients.covariates);
      test_optimal_ = std::move(patients.optimal);
    }
    settings_.search = cfg.search;
    settings_.workers = 1;
  }

  [[nodiscard]] bool higher_is_better() const { return cfg_.experiment == "pricing"; }
  [[nodiscard]] std::string metric_name() const { return higher_is_better() ? "revenue" : "dose_mse"; }
  [[nodiscard]] const DecisionSpace& space() const { return space_; }
  [[nodiscard]] const PrescriberSettings& settings() const { return settings_; }
  [[nodiscard]] const MatrixXd& test_covariates() const { return test_raw_; }

  [[nodiscard]] TrainingDraw draw(std::size_t n, std::size_t replication) const {
    const auto seed = derive_seed(cfg_.seed, kTrainStream, n, replication);
    if (cfg_.experiment == "pricing") return {pricing::generate_data(n, seed), VectorXd()};
    auto d = dosing::generate_data(n, cfg_.dosing, seed);
    return {std::move(d.data), std::move(d.optimal)};
  }

  // Mean test metric of one decision per test row.
  [[nodiscard]] double score(const std::vector<VectorXd>& zs) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < test_raw_.rows(); ++i) {
      const auto& z = zs[static_cast<std::size_t>(i)];
      if (higher_is_better()) {
        s += pricing::true_revenue(test_raw_.row(i).transpose(), z);
      } else {
        const double e = z[0] - test_optimal_[i];
        s += e * e;
      }
    }
    return s / static_cast<double>(test_raw_.rows());
  }

 private:
  const BenchmarkConfig& cfg_;
  PrescriberSettings settings_;
  DecisionSpace space_;
  MatrixXd test_raw_;
  VectorXd test_optimal_;
};

// ---------------------------------------------------------------------------
// Per-replication runner shared by the benchmark and the sensitivity grid.

struct MethodOutcome {
  double metric = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

class ReplicationRunner {
 public:
  ReplicationRunner(const BenchmarkConfig& cfg, const Experiment& exp, std::size_t n, std::size_t replication)
      : cfg_(cfg), exp_(exp), n_(n), rep_(replication), draw_(exp.draw(n, replication)) {
    train_ = draw_.data;
    test_x_ = exp.test_covariates();
    if (cfg.normalize) {
      train_ = normalize_covariates(draw_.data);
      for (Eigen::Index i = 0; i < test_x_.rows(); ++i)
        test_x_.row(i) = train_.normalization->forward(VectorXd(test_x_.row(i).transpose())).transpose();
    }
  }

  [[nodiscard]] const ObservationalDataset& train() const { return train_; }
  [[nodiscard]] const MatrixXd& test_x() const { return test_x_; }

  [[nodiscard]] std::uint64_t search_seed(const std::string& base) const {
    return derive_seed(cfg_.seed, kSearchStream, n_, rep_, learner_id(base));
  }

  // Full-data fit of a base learner, cached.
  const Prescriber& fitted(const std::string& base) {
    auto it = fitted_.find(base);
    if (it != fitted_.end()) return *it->second;
    auto p = fit(base, train_, derive_seed(cfg_.seed, kFitStream, n_, rep_, learner_id(base)));
    return *fitted_.emplace(base, std::move(p)).first->second;
  }

  [[nodiscard]] std::vector<VectorXd> prescribe(const std::string& base, double l1, double l2) {
    const auto& p = fitted(base);
    std::vector<VectorXd> zs;
    for (auto& r : p.prescribe(design(base, test_x_), l1, l2, exp_.space(), search_seed(base))) zs.push_back(std::move(r.z));
    return zs;
  }

  MethodOutcome run(const std::string& method) {
    MethodOutcome out;
    if (method == "constant-dose") {
      out.metric = exp_.score(std::vector<VectorXd>(static_cast<std::size_t>(test_x_.rows()),
                                                    VectorXd::Constant(1, dosing::kConstantDose)));
      return out;
    }
    if (method == "oracle-lb") {
      out.metric = exp_.score(oracle_doses());
      return out;
    }
    const auto base = detail::base_learner(method);
    if (method != base) {
      const auto [l1, l2] = choose_lambdas(base);
      out.lambda1 = l1;
      out.lambda2 = l2;
    }
    out.metric = exp_.score(prescribe(base, out.lambda1, out.lambda2));
    return out;
  }

 private:
  static std::uint64_t learner_id(const std::string& base) {
    if (base == "cart") return 1;
    if (base == "rf") return 2;
    if (base == "lasso") return 3;
    return 4;
  }

  [[nodiscard]] bool linear(const std::string& base) const { return base == "lasso"; }

  // Linear learners see an appended constant covariate when configured.
  [[nodiscard]] MatrixXd design(const std::string& base, const MatrixXd& x) const {
    if (!linear(base) || !cfg_.linear_intercept) return x;
    MatrixXd out(x.rows(), x.cols() + 1);
    out << x, MatrixXd::Ones(x.rows(), 1);
    return out;
  }
  [[nodiscard]] ObservationalDataset design(const std::string& base, const ObservationalDataset& ds) const {
    if (!linear(base) || !cfg_.linear_intercept) return ds;
    ObservationalDataset out = ds;
    out.covariates = design(base, ds.covariates);
    out.covariate_names.push_back("intercept");
    return out;
  }

  [[nodiscard]] std::unique_ptr<Prescriber> fit(const std::string& base, const ObservationalDataset& ds,
                                                std::uint64_t seed) const {
    LearnerConfig lc;
    lc.kind = base;
    lc.tree = cfg_.tree;
    lc.tree.seed = seed;
    lc.forest = cfg_.forest;
    lc.forest.seed = seed;
    lc.alpha = cfg_.lasso_alpha;
    return fit_prescriber(design(base, ds), lc, exp_.settings());
  }

  std::pair<double, double> choose_lambdas(const std::string& base) {
    switch (cfg_.selection) {
      case LambdaSelection::fixed: return {cfg_.lambda1, linear(base) ? 0.0 : cfg_.lambda2};
      case LambdaSelection::theory: {
        const auto& p = fitted(base);
        const auto f = train_.feature_matrix();
        const double diameter = (f.colwise().maxCoeff() - f.colwise().minCoeff()).norm();
        const auto lam = theory_lambdas(p.theory_inputs(cfg_.lipschitz, diameter, cfg_.delta));
        return {lam.lambda1, lam.lambda2};
      }
      case LambdaSelection::validation: break;
    }
    const auto split =
        train_validation_split(train_, cfg_.validation_fraction, derive_seed(cfg_.seed, kSplitStream, n_, rep_));
    const auto tune_seed = derive_seed(cfg_.seed, kTuneStream, n_, rep_, learner_id(base));
    const auto part = fit(base, split.train, tune_seed);
    const ObservationalDataset va = design(base, split.validation);
    const VectorXd va_target = cost_target(va, exp_.settings().cost);
    auto imp_params = cfg_.imputer;
    imp_params.seed = derive_seed(cfg_.seed, kTuneStream, n_, rep_, 0);
    const auto imputer = impute_counterfactuals(va, va_target, imp_params);
    const std::vector<double> l2 = linear(base) ? std::vector<double>{0.0} : cfg_.lambda2_grid;
    const auto candidates = lambda_candidates(*part, cfg_.lambda1_grid, l2, exp_.space(), tune_seed);
    SelectionOptions opt;
    opt.mse_weight = cfg_.mse_weight;
    opt.mode = exp_.settings().mode;
    opt.max_points = cfg_.tuning_points;
    const auto sel = select_model(candidates, va, va_target, imputer, opt);
    return {candidates[sel.best].lambda1, candidates[sel.best].lambda2};
  }

  // Forest fitted on covariates -> true optimal dose; the decision column is a
  // constant placeholder that never splits.
  [[nodiscard]] std::vector<VectorXd> oracle_doses() const {
    if (draw_.optimal.size() == 0) throw Error("oracle-lb needs known optimal doses");
    ObservationalDataset ds = train_;
    ds.decisions = MatrixXd::Zero(ds.decisions.rows(), 1);
    ds.outcomes = draw_.optimal;
    auto params = cfg_.oracle;
    params.seed = derive_seed(cfg_.seed, kFitStream, n_, rep_, 5);
    const auto model = fit_honest_forest(ds, draw_.optimal, params);
    std::vector<VectorXd> out;
    for (Eigen::Index i = 0; i < test_x_.rows(); ++i) {
      const double z = forest_predict(model, draw_.optimal, {test_x_.row(i).transpose(), VectorXd::Zero(1)});
      out.push_back(exp_.space().clamp(VectorXd::Constant(1, z)));
    }
    return out;
  }

  const BenchmarkConfig& cfg_;
  const Experiment& exp_;
  std::size_t n_;
  std::size_t rep_;
  TrainingDraw draw_;
  ObservationalDataset train_;
  MatrixXd test_x_;
  std::map<std::string, std::unique_ptr<Prescriber>> fitted_;
};

// ---------------------------------------------------------------------------
// Report

struct PairComparison {
  std::string treatment;
  std::string baseline;
  double mean_improvement = 0.0;      // positive favors the treatment
  double relative_improvement = 0.0;  // mean_improvement / |baseline mean|
  std::size_t wins = 0;
  WilcoxonResult two_sided;
  WilcoxonResult one_sided;  // alternative: treatment better
  double p_two_sided_adjusted = 1.0;
  double p_one_sided_adjusted = 1.0;
};

struct MethodSeries {
  std::vector<double> values;  // by replication
  std::vector<double> lambda1;
  std::vector<double> lambda2;
  [[nodiscard]] double mean() const { return mean_of(values); }
  [[nodiscard]] double stderr_() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
};

struct SizeResult {
  std::size_t n = 0;
  std::map<std::string, MethodSeries> methods;
  std::vector<PairComparison> comparisons;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::string fingerprint;
  std::string metric;
  bool higher_is_better = true;
  std::vector<SizeResult> sizes;

  [[nodiscard]] const SizeResult& at(std::size_t n) const {
    for (const auto& s : sizes)
      if (s.n == n) return s;
    throw Error("no results for n = " + std::to_string(n));
  }
};

// Paired comparisons of each up-X against X present at the same n. The
// Bonferroni factor is the number of comparisons at that n.
inline std::vector<PairComparison> compare_pairs(const SizeResult& s, const std::vector<std::string>& methods,
                                                 bool higher_is_better) {
  std::vector<PairComparison> out;
  for (const auto& m : methods) {
    const auto base = detail::base_learner(m);
    if (m == base || !s.methods.count(base)) continue;
    const auto& t = s.methods.at(m).values;
    const auto& b = s.methods.at(base).values;
    std::vector<double> diff(t.size());
    for (std::size_t r = 0; r < t.size(); ++r) diff[r] = higher_is_better ? t[r] - b[r] : b[r] - t[r];
    PairComparison c;
    c.treatment = m;
    c.baseline = base;
    c.mean_improvement = mean_of(diff);
    const double bm = mean_of(b);
    c.relative_improvement = bm != 0.0 ? c.mean_improvement / std::abs(bm) : 0.0;
    c.wins = static_cast<std::size_t>(std::count_if(diff.begin(), diff.end(), [](double d) { return d > 0.0; }));
    c.two_sided = wilcoxon_signed_rank(diff, Alternative::two_sided);
    c.one_sided = wilcoxon_signed_rank(diff, Alternative::greater);
    out.push_back(c);
  }
  for (auto& c : out) {
    c.p_two_sided_adjusted = bonferroni(c.two_sided.p_value, out.size());
    c.p_one_sided_adjusted = bonferroni(c.one_sided.p_value, out.size());
  }
  return out;
}

inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  const Experiment exp(cfg);
  BenchmarkReport rep;
  rep.config = cfg;
  rep.fingerprint = config_fingerprint(cfg);
  rep.metric = exp.metric_name();
  rep.higher_is_better = exp.higher_is_better();
  for (auto n : cfg.n_values) {
    SizeResult s;
    s.n = n;
    std::vector<std::vector<MethodOutcome>> slots(cfg.replications);
    parallel_for(cfg.replications, cfg.workers, [&](std::size_t r) {
      ReplicationRunner runner(cfg, exp, n, r);
      for (const auto& m : cfg.methods) slots[r].push_back(runner.run(m));
    });
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
      auto& series = s.methods[cfg.methods[k]];
      for (std::size_t r = 0; r < cfg.replications; ++r) {
        series.values.push_back(slots[r][k].metric);
        series.lambda1.push_back(slots[r][k].lambda1);
        series.lambda2.push_back(slots[r][k].lambda2);
      }
    }
    s.comparisons = compare_pairs(s, cfg.methods, rep.higher_is_better);
    rep.sizes.push_back(std::move(s));
  }
  return rep;
}

inline nlohmann::ordered_json wilcoxon_to_json(const WilcoxonResult& w) {
  return {{"n_used", w.n_used}, {"w_plus", w.w_plus}, {"w_minus", w.w_minus},
          {"p_value", w.p_value}, {"exact", w.exact}, {"z", w.z}};
}

inline nlohmann::ordered_json report_to_json(const BenchmarkReport& r) {
  nlohmann::ordered_json j;
  j["experiment"] = r.config.experiment;
  j["config_fingerprint"] = r.fingerprint;
  j["seed"] = r.config.seed;
  j["metric"] = r.metric;
  j["higher_is_better"] = r.higher_is_better;
  nlohmann::ordered_json sizes = nlohmann::ordered_json::array();
  for (const auto& s : r.sizes) {
    nlohmann::ordered_json sj;
    sj["n"] = s.n;
    nlohmann::ordered_json methods;
    for (const auto& name : r.config.methods) {
      const auto& m = s.methods.at(name);
      nlohmann::ordered_json mj;
      mj["mean"] = m.mean();
      mj["stderr"] = m.stderr_();
      mj["values"] = m.values;
      if (name.rfind("up-", 0) == 0) {
        mj["lambda1"] = m.lambda1;
        mj["lambda2"] = m.lambda2;
      }
      methods[name] = mj;
    }
    sj["methods"] = methods;
    nlohmann::ordered_json comps = nlohmann::ordered_json::array();
    for (const auto& c : s.comparisons) {
      comps.push_back({{"treatment", c.treatment},
                       {"baseline", c.baseline},
                       {"mean_improvement", c.mean_improvement},
                       {"relative_improvement", c.relative_improvement},
                       {"wins", c.wins},
                       {"two_sided", wilcoxon_to_json(c.two_sided)},
                       {"one_sided", wilcoxon_to_json(c.one_sided)},
                       {"p_two_sided_bonferroni", c.p_two_sided_adjusted},
                       {"p_one_sided_bonferroni", c.p_one_sided_adjusted}});
    }
    sj["comparisons"] = comps;
    sizes.push_back(sj);
  }
  j["results"] = sizes;
  j["config"] = benchmark_config_to_json(r.config);
  return j;
}

// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Columns: method, n, replication, metric.
inline void write_curves_csv(std::ostream& out, const BenchmarkReport& r) {
  out << "method,n,replication,metric\n";
  for (const auto& name : r.config.methods)
    for (const auto& s : r.sizes) {
      const auto& v = s.methods.at(name).values;
      for (std::size_t k = 0; k < v.size(); ++k) out << name << ',' << s.n << ',' << k << ',' << format_number(v[k]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Sensitivity grid: one fit per replication, every (lambda1, lambda2) cell
// evaluated on it. The (0, 0) cell reproduces the unpenalized method.

struct SensitivityCell {
  std::size_t n = 0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> values;
};

inline std::vector<SensitivityCell> sensitivity_grid(const BenchmarkConfig& cfg, const std::string& learner,
                                                     const std::vector<double>& l1, const std::vector<double>& l2) {
  if (l1.empty() || l2.empty()) throw Error("sensitivity grid needs nonempty lambda lists");
  if (learner != "cart" && learner != "rf" && learner != "lasso") throw Error("unknown learner: " + learner);
  const Experiment exp(cfg);
  std::vector<SensitivityCell> cells;
  for (auto n : cfg.n_values) {
    std::vector<std::vector<double>> slots(cfg.replications);
    parallel_for(cfg.replications, cfg.workers, [&](std::size_t r) {
      ReplicationRunner runner(cfg, exp, n, r);
      for (double a : l1)
        for (double b : l2) slots[r].push_back(exp.score(runner.prescribe(learner, a, b)));
    });
    std::size_t k = 0;
    for (double a : l1)
      for (double b : l2) {
        SensitivityCell c{n, a, b, {}};
        for (std::size_t r = 0; r < cfg.replications; ++r) c.values.push_back(slots[r][k]);
        cells.push_back(std::move(c));
        ++k;
      }
  }
  return cells;
}

inline void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityCell>& cells) {
  out << "n,lambda1,lambda2,replications,mean_metric,stderr\n";
  for (const auto& c : cells) {
    MethodSeries s;
    s.values = c.values;
    out << c.n << ',' << format_number(c.lambda1) << ',' << format_number(c.lambda2) << ',' << c.values.size() << ','
        << format_number(s.mean()) << ',' << format_number(s.stderr_()) << '\n';
  }
}

}  // namespace prescript
