#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "prescript/dataset.hpp"

namespace prescript {
namespace {

Schema dosing_schema() {
  Schema s;
  s.columns = {{"bmi", ColumnRole::covariate}, {"dose", ColumnRole::decision}, {"response", ColumnRole::outcome}};
  return s;
}

ObservationalDataset tiny(const std::vector<double>& x) {
  ObservationalDataset ds;
  const auto n = static_cast<Eigen::Index>(x.size());
  ds.covariates.resize(n, 1);
  ds.decisions = MatrixXd::Zero(n, 1);
  ds.outcomes = MatrixXd::Zero(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) ds.covariates(i, 0) = x[static_cast<std::size_t>(i)];
  return ds;
}

TEST(LoadDataset, ParsesThreeRows) {
  std::istringstream in("bmi,dose,response\n1.5,30,2\n-0.2,25,-1\n0.3,40,5\n");
  const auto loaded = parse_dataset(in, dosing_schema());
  EXPECT_EQ(loaded.data.rows(), 3u);
  EXPECT_EQ(loaded.data.covariate_dim(), 1u);
  EXPECT_EQ(loaded.data.decision_dim(), 1u);
  EXPECT_DOUBLE_EQ(loaded.data.decisions(2, 0), 40.0);
  EXPECT_EQ(loaded.report.rows_dropped, 0u);
}

TEST(LoadDataset, DropsNonNumericRow) {
  std::istringstream in("bmi,dose,response\n1.5,30,2\nfoo,25,-1\n0.3,40,5\n");
  const auto loaded = parse_dataset(in, dosing_schema());
  EXPECT_EQ(loaded.data.rows(), 2u);
  EXPECT_EQ(loaded.report.rows_dropped, 1u);
}

TEST(LoadDataset, MissingColumnIsAnError) {
  std::istringstream in("bmi,dose,response\n1,2,3\n");
  auto schema = dosing_schema();
  schema.columns.emplace_back("age", ColumnRole::covariate);
  try {
    (void)parse_dataset(in, schema);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("column not found"), std::string::npos);
  }
}

TEST(LoadDataset, SchemaOrderFixesColumnOrder) {
  std::istringstream in("b,a,z,y\n1,2,3,4\n");
  Schema s;
  s.columns = {{"a", ColumnRole::covariate}, {"b", ColumnRole::covariate}, {"z", ColumnRole::decision},
               {"y", ColumnRole::outcome}};
  const auto loaded = parse_dataset(in, s);
  EXPECT_EQ(loaded.data.covariate_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(loaded.data.covariates(0, 0), 2.0);
}

TEST(LoadDataset, CsvRoundTrip) {
  std::istringstream in("bmi,dose,response\n1.25,30,2\n-0.5,25,-1\n");
  const auto a = parse_dataset(in, dosing_schema()).data;
  std::ostringstream out;
  write_dataset_csv(out, a);
  std::istringstream back(out.str());
  const auto b = parse_dataset(back, dosing_schema()).data;
  EXPECT_EQ(a.covariates, b.covariates);
  EXPECT_EQ(a.decisions, b.decisions);
  EXPECT_EQ(a.outcomes, b.outcomes);
}

TEST(Normalize, TwoPointColumn) {
  const auto out = normalize_covariates(tiny({1.0, 3.0}));
  // ddof = 1: mean 2, sd sqrt(2)
  EXPECT_NEAR(out.covariates(0, 0), (1.0 - 2.0) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(out.covariates(1, 0), (3.0 - 2.0) / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(out.normalization->mean[0], 2.0);
  EXPECT_DOUBLE_EQ(out.normalization->stddev[0], std::sqrt(2.0));
}

TEST(Normalize, ConstantColumnFlagged) {
  const auto out = normalize_covariates(tiny({5.0, 5.0, 5.0}));
  EXPECT_TRUE(out.normalization->constant[0]);
  EXPECT_EQ(out.covariates, MatrixXd::Constant(3, 1, 5.0));
}

TEST(Normalize, RoundTrip) {
  const auto ds = tiny({0.3, -7.1, 12.5, 4.4});
  const auto back = inverse_transform_covariates(normalize_covariates(ds));
  EXPECT_LT((back.covariates - ds.covariates).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Split, Sizes) {
  const auto s = train_validation_split(tiny({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.3, 7);
  EXPECT_EQ(s.train.rows(), 7u);
  EXPECT_EQ(s.validation.rows(), 3u);
}

TEST(Split, Deterministic) {
  const auto ds = tiny({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto a = train_validation_split(ds, 0.3, 7);
  const auto b = train_validation_split(ds, 0.3, 7);
  EXPECT_EQ(a.train_index, b.train_index);
  EXPECT_EQ(a.validation_index, b.validation_index);
}

TEST(Split, Disjoint) {
  const auto s = train_validation_split(tiny({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.3, 11);
  std::vector<std::size_t> all = s.train_index;
  all.insert(all.end(), s.validation_index.begin(), s.validation_index.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Split, SingleRowIsAnError) { EXPECT_THROW((void)train_validation_split(tiny({1.0}), 0.3, 1), Error); }

TEST(DecisionSpace, RejectsInvertedBox) {
  EXPECT_THROW(DecisionSpace(VectorXd::Constant(1, 2.0), VectorXd::Constant(1, 1.0)), Error);
}

TEST(DecisionSpace, ProjectSatisfiesConstraints) {
  VectorXd a(2);
  a << 1.0, 1.0;
  const DecisionSpace sp(VectorXd::Zero(2), VectorXd::Ones(2), {{a, 1.0}});
  VectorXd z(2);
  z << 0.9, 0.8;
  const VectorXd p = sp.project(z);
  EXPECT_TRUE(sp.contains(p, 1e-9));
}

TEST(FeaturePoint, DistanceIsConcatenatedNorm) {
  const FeaturePoint a{VectorXd::Constant(1, 0.0), VectorXd::Constant(1, 0.0)};
  const FeaturePoint b{VectorXd::Constant(1, 3.0), VectorXd::Constant(1, 4.0)};
  EXPECT_DOUBLE_EQ(a.distance(b), 5.0);
}

}  // namespace
}  // namespace prescript
