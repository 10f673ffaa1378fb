// prescript command line front end.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "prescript/prescript.hpp"

namespace ps = prescript;
using nlohmann::json;
using nlohmann::ordered_json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ps::Error("cannot open " + path);
  return json::parse(in);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ps::Error("cannot write " + path);
  out << text;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(v);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ps::Error("stored training matrix has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

ps::ForestSearchOptions search_from_json(const json& j, ps::ForestSearchOptions s = {}) {
  s.restarts = j.value("restarts", s.restarts);
  s.grid_points = j.value("grid_points", s.grid_points);
  s.max_cycles = j.value("max_cycles", s.max_cycles);
  s.min_improvement = j.value("min_improvement", s.min_improvement);
  return s;
}

// ---------------------------------------------------------------------------
// fit

bool tree_family(const std::string& kind) { return kind == "cart" || kind == "rf"; }

// Linear learners have no intercept of their own; fit appends a constant column.
MatrixXd with_intercept(const MatrixXd& x) {
  MatrixXd out(x.rows(), x.cols() + 1);
  out << x, MatrixXd::Ones(x.rows(), 1);
  return out;
}

int cmd_fit(const std::string& data, const std::string& schema_path, const std::string& kind,
            const std::string& params_path, const std::string& out) {
  const json params = params_path.empty() ? json::object() : read_json(params_path);
  const auto schema = ps::Schema::from_file(schema_path);
  auto loaded = ps::load_dataset(data, schema);
  ps::ObservationalDataset train = loaded.data;
  if (params.value("normalize", false)) train = ps::normalize_covariates(train);
  const bool intercept = !tree_family(kind) && params.value("intercept", true);
  if (intercept) {
    train.covariates = with_intercept(train.covariates);
    train.covariate_names.push_back("intercept");
  }

  const std::string cost_name = params.value("cost", std::string("identity"));
  const auto mode = ps::objective_mode_from_string(params.value("mode", std::string("plain")));
  const std::uint64_t seed = params.value("seed", std::uint64_t{0});

  ps::PrescriberSettings settings;
  settings.cost = ps::cost_by_name(cost_name);
  settings.mode = mode;
  ps::LearnerConfig learner;
  learner.kind = kind;
  learner.tree = ps::tree_params_from_json(params);
  learner.tree.seed = seed;
  learner.forest = ps::forest_params_from_json(params);
  learner.forest.seed = seed;
  learner.alpha = params.value("alpha", learner.alpha);
  const auto fitted = ps::fit_prescriber(train, learner, settings);

  ordered_json model;
  model["format"] = "prescript-model";
  model["version"] = 1;
  model["kind"] = kind;
  model["cost"] = cost_name;
  model["mode"] = ps::to_string(mode);
  model["sigma2"] = params.value("sigma2", fitted->sigma2());
  model["intercept"] = intercept;
  if (const auto* t = dynamic_cast<const ps::TreePrescriber*>(fitted.get())) model["model"] = ps::tree_to_json(t->model());
  if (const auto* f = dynamic_cast<const ps::ForestPrescriber*>(fitted.get()))
    model["model"] = ps::forest_to_json(f->model());
  if (const auto* l = dynamic_cast<const ps::LinearPrescriber*>(fitted.get()))
    model["model"] = ps::linear_to_json(l->model());
  if (params.contains("search")) model["search"] = params.at("search");

  ordered_json names;
  names["covariates"] = train.covariate_names;
  names["decisions"] = train.decision_names;
  names["outcomes"] = train.outcome_names;
  model["columns"] = names;
  if (train.normalization) {
    model["normalization"] = {{"mean", train.normalization->mean},
                              {"stddev", train.normalization->stddev},
                              {"constant", train.normalization->constant}};
  } else {
    model["normalization"] = nullptr;
  }
  if (tree_family(kind)) {
    model["training"] = {{"covariates", matrix_to_json(train.covariates)},
                         {"decisions", matrix_to_json(train.decisions)},
                         {"outcomes", matrix_to_json(train.outcomes)}};
  }
  model["load_report"] = loaded.report.to_json();
  write_text(out, model.dump(1) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// prescribe

ps::DecisionSpace space_from_json(const json& j) {
  const auto lo = j.at("lower").get<std::vector<double>>();
  const auto hi = j.at("upper").get<std::vector<double>>();
  if (lo.size() != hi.size()) throw ps::Error("space lower and upper differ in length");
  std::vector<ps::LinearConstraint> cons;
  for (const auto& c : j.value("constraints", json::array())) {
    const auto a = c.at("a").get<std::vector<double>>();
    cons.push_back({Eigen::Map<const VectorXd>(a.data(), static_cast<Eigen::Index>(a.size())), c.at("b").get<double>()});
  }
  return {Eigen::Map<const VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
          Eigen::Map<const VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())), std::move(cons)};
}

// Reads covariate columns by name from a CSV with a header row.
Eigen::MatrixXd read_covariates(const std::string& path, const std::vector<std::string>& names) {
  ps::Schema schema;
  for (const auto& n : names) schema.columns.emplace_back(n, ps::ColumnRole::covariate);
  std::ifstream in(path);
  if (!in) throw ps::Error("cannot open " + path);
  std::stringstream buf;
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  // the loader wants one decision and one outcome column; feed it placeholders
  buf << header << ",__z,__y\n";
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    buf << line << ",0,0\n";
  }
  schema.columns.emplace_back("__z", ps::ColumnRole::decision);
  schema.columns.emplace_back("__y", ps::ColumnRole::outcome);
  auto loaded = ps::parse_dataset(buf, schema);
  if (loaded.report.rows_dropped > 0)
    std::cerr << "prescript: dropped " << loaded.report.rows_dropped << " covariate rows with unusable cells\n";
  return loaded.data.covariates;
}

int cmd_prescribe(const std::string& model_path, const std::string& x_path, const std::string& space_path,
                  double lambda1, double lambda2, std::uint64_t seed, const std::string& out) {
  const json m = read_json(model_path);
  if (m.value("format", std::string()) != "prescript-model") throw ps::Error("not a prescript model file");
  const std::string kind = m.at("kind");
  const auto cost = ps::cost_by_name(m.at("cost").get<std::string>());
  const auto mode = ps::objective_mode_from_string(m.at("mode").get<std::string>());
  const double sigma2 = m.at("sigma2").get<double>();
  const auto space = space_from_json(read_json(space_path));
  const auto cov_names = m.at("columns").at("covariates").get<std::vector<std::string>>();
  const bool intercept = m.value("intercept", false);
  std::vector<std::string> raw_names = cov_names;
  if (intercept) raw_names.pop_back();

  Eigen::MatrixXd xs = read_covariates(x_path, raw_names);
  if (!m.at("normalization").is_null()) {
    ps::Scaler sc;
    sc.mean = m.at("normalization").at("mean").get<std::vector<double>>();
    sc.stddev = m.at("normalization").at("stddev").get<std::vector<double>>();
    sc.constant = m.at("normalization").at("constant").get<std::vector<bool>>();
    for (Eigen::Index i = 0; i < xs.rows(); ++i) xs.row(i) = sc.forward(VectorXd(xs.row(i).transpose())).transpose();
  }
  if (intercept) xs = with_intercept(xs);

  ps::PrescriberSettings settings;
  settings.cost = cost;
  settings.mode = mode;
  if (m.contains("search")) settings.search = search_from_json(m.at("search"));

  std::unique_ptr<ps::Prescriber> p;
  if (tree_family(kind)) {
    ps::ObservationalDataset train;
    const auto& t = m.at("training");
    train.covariate_names = cov_names;
    train.decision_names = m.at("columns").at("decisions").get<std::vector<std::string>>();
    train.outcome_names = m.at("columns").at("outcomes").get<std::vector<std::string>>();
    train.covariates = matrix_from_json(t.at("covariates"), static_cast<Eigen::Index>(train.covariate_names.size()));
    train.decisions = matrix_from_json(t.at("decisions"), static_cast<Eigen::Index>(train.decision_names.size()));
    train.outcomes = matrix_from_json(t.at("outcomes"), static_cast<Eigen::Index>(train.outcome_names.size()));
    VectorXd target = ps::cost_target(train, cost);
    if (kind == "cart")
      p = std::make_unique<ps::TreePrescriber>(ps::tree_from_json(m.at("model")), train, std::move(target), sigma2,
                                               settings);
    else
      p = std::make_unique<ps::ForestPrescriber>(ps::forest_from_json(m.at("model")), train, std::move(target), sigma2,
                                                 settings);
  } else {
    p = std::make_unique<ps::LinearPrescriber>(ps::linear_from_json(m.at("model")), settings);
  }

  const auto results = p->prescribe(xs, lambda1, lambda2, space, seed);
  ordered_json j;
  j["model_kind"] = kind;
  j["mode"] = ps::to_string(mode);
  j["lambda1"] = lambda1;
  j["lambda2"] = tree_family(kind) ? lambda2 : 0.0;
  j["sigma2"] = sigma2;
  j["seed"] = seed;
  j["prescriptions"] = ordered_json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto r = ps::prescription_to_json(results[i]);
    r["row"] = i;
    j["prescriptions"].push_back(r);
  }
  write_text(out, j.dump(1) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark / sensitivity

int cmd_benchmark(const std::string& config, const std::string& out, const std::string& csv) {
  const auto cfg = ps::benchmark_config_from_json(read_json(config));
  const auto report = ps::run_benchmark(cfg);
  write_text(out, ps::report_to_json(report).dump(1) + "\n");
  if (!csv.empty()) {
    std::ostringstream os;
    ps::write_curves_csv(os, report);
    write_text(csv, os.str());
  }
  return 0;
}

int cmd_sensitivity(const std::string& config, const std::vector<double>& l1, const std::vector<double>& l2,
                    const std::string& learner, const std::string& out) {
  const auto cfg = ps::benchmark_config_from_json(read_json(config));
  const auto cells = ps::sensitivity_grid(cfg, learner, l1, l2);
  std::ostringstream os;
  ps::write_sensitivity_csv(os, cells);
  write_text(out, os.str());
  return 0;
}

// ---------------------------------------------------------------------------
// theory

struct TheoryArgs {
  double max_leaves = 1, min_leaf = 1, diameter = 1, alpha = 0, lipschitz = 1, p = 1, delta = 0.05;
  double variance = -1, bias = 0;
  [[nodiscard]] ps::TheoryInputs inputs() const {
    ps::TheoryInputs t;
    t.max_leaves = max_leaves;
    t.min_leaf = min_leaf;
    t.diameter = diameter;
    t.alpha = alpha;
    t.lipschitz = lipschitz;
    t.decision_dim = p;
    t.delta = delta;
    return t;
  }
};

ordered_json theory_inputs_json(const ps::TheoryInputs& t) {
  return {{"max_leaves", t.max_leaves}, {"min_leaf", t.min_leaf}, {"diameter", t.diameter}, {"alpha", t.alpha},
          {"lipschitz", t.lipschitz},   {"p", t.decision_dim},    {"delta", t.delta}};
}

int cmd_theory_kn(const TheoryArgs& a, const std::string& out) {
  const auto t = a.inputs();
  ordered_json j;
  j["inputs"] = theory_inputs_json(t);
  j["Kn"] = ps::compute_kn(t);
  j["log_Kn"] = ps::log_kn(t);
  if (a.variance >= 0.0) j["bound"] = ps::generalization_bound(t, a.variance, a.bias);
  write_text(out, j.dump(1) + "\n");
  return 0;
}

int cmd_theory_lambdas(const TheoryArgs& a, const std::string& out) {
  const auto t = a.inputs();
  const auto lam = ps::theory_lambdas(t);
  ordered_json j;
  j["inputs"] = theory_inputs_json(t);
  j["Kn"] = ps::compute_kn(t);
  j["lambda1"] = lam.lambda1;
  j["lambda2"] = lam.lambda2;
  write_text(out, j.dump(1) + "\n");
  return 0;
}

int cmd_theory_example1(const std::vector<int>& ms, double lambda, std::size_t sims, std::uint64_t seed,
                        const std::string& variance, const std::string& out) {
  const auto var = variance == "empirical" ? ps::Example1Variance::empirical : ps::Example1Variance::known;
  if (variance != "empirical" && variance != "known") throw ps::Error("variance must be known or empirical");
  ordered_json j;
  j["lambda"] = lambda;
  j["sims"] = sims;
  j["seed"] = seed;
  j["variance"] = variance;
  j["rows"] = ordered_json::array();
  for (int m : ms) {
    const auto an = ps::example1_analytic(m, lambda);
    ordered_json row;
    row["m"] = m;
    row["analytic_up"] = an.up;
    row["analytic_pcm"] = an.pcm;
    if (sims > 0) {
      const auto mc = ps::example1_montecarlo(m, lambda, sims, ps::derive_seed(seed, static_cast<std::uint64_t>(m)), var);
      row["mc_up_state_a"] = mc.state_a.mean_up;
      row["mc_pcm_state_a"] = mc.state_a.mean_pcm;
      row["se_up_state_a"] = mc.state_a.se_up;
      row["se_pcm_state_a"] = mc.state_a.se_pcm;
      row["mc_up"] = mc.overall.mean_up;
      row["mc_pcm"] = mc.overall.mean_pcm;
      row["se_up"] = mc.overall.se_up;
      row["se_pcm"] = mc.overall.se_pcm;
    }
    j["rows"].push_back(row);
  }
  write_text(out, j.dump(1) + "\n");
  return 0;
}

void add_theory_options(CLI::App* sub, TheoryArgs& a) {
  sub->add_option("--max-leaves", a.max_leaves, "Gamma_n, the number of partition cells")->capture_default_str();
  sub->add_option("--min-leaf", a.min_leaf, "gamma_n, the smallest leaf population")->capture_default_str();
  sub->add_option("--diameter", a.diameter, "diameter D of the feature space")->capture_default_str();
  sub->add_option("--alpha", a.alpha, "weight Lipschitz constant")->capture_default_str();
  sub->add_option("--lipschitz", a.lipschitz, "cost Lipschitz constant L")->capture_default_str();
  sub->add_option("--p", a.p, "decision dimension")->capture_default_str();
  sub->add_option("--delta", a.delta, "confidence level")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prescript: decisions from observational data with uncertainty penalties"};
  app.require_subcommand(1);

  std::string data, schema, kind, params, out, model, xcsv, space, config, csv, learner = "rf";
  double lambda1 = 0.0, lambda2 = 0.0;
  std::uint64_t seed = 0;

  auto* fit = app.add_subcommand("fit", "fit a learner to a CSV dataset");
  fit->add_option("--data", data, "CSV file")->required();
  fit->add_option("--schema", schema, "JSON {column: role}")->required();
  fit->add_option("--model", kind, "cart | rf | ols | ridge | lasso")
      ->required()
      ->check(CLI::IsMember({"cart", "rf", "ols", "ridge", "lasso"}));
  fit->add_option("--params", params, "learner parameters (JSON)");
  fit->add_option("--out", out, "model JSON")->required();

  auto* pres = app.add_subcommand("prescribe", "prescribe decisions for new covariates");
  pres->add_option("--model", model, "model JSON from fit")->required();
  pres->add_option("--x", xcsv, "covariate CSV")->required();
  pres->add_option("--space", space, "decision space JSON")->required();
  pres->add_option("--lambda1", lambda1, "variance penalty weight")->capture_default_str();
  pres->add_option("--lambda2", lambda2, "bias penalty weight")->capture_default_str();
  pres->add_option("--seed", seed, "seed for randomized searches")->capture_default_str();
  pres->add_option("--out", out, "prescription JSON")->required();

  auto* bench = app.add_subcommand("benchmark", "run a pricing or dosing benchmark");
  bench->add_option("--config", config, "benchmark config JSON")->required();
  bench->add_option("--out", out, "report JSON")->required();
  bench->add_option("--csv", csv, "per-replication curves CSV");

  std::vector<double> l1s, l2s;
  auto* sens = app.add_subcommand("sensitivity", "mean test metric over a lambda grid");
  sens->add_option("--config", config, "benchmark config JSON")->required();
  sens->add_option("--l1", l1s, "lambda1 values")->required();
  sens->add_option("--l2", l2s, "lambda2 values")->required();
  sens->add_option("--learner", learner, "cart | rf | lasso")->capture_default_str();
  sens->add_option("--out", out, "grid CSV")->required();

  auto* theory = app.add_subcommand("theory", "theory constants and Example 1 tables");
  theory->require_subcommand(1);
  TheoryArgs targs;
  std::string tout;
  auto* kn = theory->add_subcommand("kn", "K_n and optionally the generalization bound");
  add_theory_options(kn, targs);
  kn->add_option("--variance", targs.variance, "V for the bound (omit to skip)");
  kn->add_option("--bias", targs.bias, "B for the bound")->capture_default_str();
  kn->add_option("--out", tout, "output JSON (default stdout)");
  auto* lam = theory->add_subcommand("lambdas", "lambda1 and lambda2 from K_n");
  add_theory_options(lam, targs);
  lam->add_option("--out", tout, "output JSON (default stdout)");
  std::vector<int> ms{1, 4, 16, 64};
  double ex_lambda = std::sqrt(2.0);
  std::size_t sims = 100000;
  std::string variance = "known";
  std::uint64_t ex_seed = 1;
  auto* ex1 = theory->add_subcommand("example1", "analytic and Monte Carlo regrets");
  ex1->add_option("--m", ms, "numbers of noisy actions")->capture_default_str();
  ex1->add_option("--lambda", ex_lambda, "penalty weight")->capture_default_str();
  ex1->add_option("--sims", sims, "Monte Carlo draws (0 = analytic only)")->capture_default_str();
  ex1->add_option("--seed", ex_seed, "master seed")->capture_default_str();
  ex1->add_option("--variance", variance, "known | empirical")->capture_default_str();
  ex1->add_option("--out", tout, "output JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*fit) return cmd_fit(data, schema, kind, params, out);
    if (*pres) return cmd_prescribe(model, xcsv, space, lambda1, lambda2, seed, out);
    if (*bench) return cmd_benchmark(config, out, csv);
    if (*sens) return cmd_sensitivity(config, l1s, l2s, learner, out);
    if (*kn) return cmd_theory_kn(targs, tout);
    if (*lam) return cmd_theory_lambdas(targs, tout);
    if (*ex1) {
      if (sims > 0 && sims < 100) throw ps::Error("--sims must be 0 or at least 100");
      return cmd_theory_example1(ms, ex_lambda, sims, ex_seed, variance, tout);
    }
  } catch (const std::exception& e) {
    std::cerr << "prescript: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
