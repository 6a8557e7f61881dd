#include <random>

#include <gtest/gtest.h>

#include "mogp/error.hpp"
#include "mogp/transfer.hpp"
#include "support.hpp"

namespace mogp {
namespace {

using testing::scalar;

// Reference OLS with an explicit ones column, solved by normal equations.
Eigen::MatrixXd ols(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return (d.transpose() * d).ldlt().solve(d.transpose() * y);
}

TEST(Responsibility, MatchesNormalEquations) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(30, 3), r(30, 2);
  for (int i = 0; i < 30; ++i) {
    for (int c = 0; c < 3; ++c) x(i, c) = n(rng);
    const double p = 1.0 / (1.0 + std::exp(-x(i, 0)));
    r(i, 0) = p;
    r(i, 1) = 1.0 - p;
  }
  const auto m = fit_responsibilities(x, r);
  const Eigen::MatrixXd ref = ols(x, r);
  EXPECT_FALSE(m.ridge);
  for (int z = 0; z < 2; ++z) {
    EXPECT_NEAR(m.intercept[z], ref(0, z), 1e-10);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(m.weights(z, c), ref(c + 1, z), 1e-10);
  }
}

TEST(Responsibility, ConstantColumnsExcluded) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 5, 0, 5, 1, 5, 0, 5;
  Eigen::MatrixXd r(4, 2);
  r << 1, 0, 0, 1, 1, 0, 0, 1;
  const auto m = fit_responsibilities(x, r);
  EXPECT_TRUE(m.active[0]);
  EXPECT_FALSE(m.active[1]);
  EXPECT_EQ(m.weights(0, 1), 0.0);
  EXPECT_NEAR(m.predict(Eigen::Vector2d(1, 5))[0], 1.0, 1e-12);
  EXPECT_NEAR(m.predict(Eigen::Vector2d(0, 5))[1], 1.0, 1e-12);
}

TEST(Responsibility, CollinearColumnsUseRidge) {
  Eigen::MatrixXd x(6, 2);
  x << 0, 0, 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  Eigen::MatrixXd r(6, 2);
  for (int i = 0; i < 6; ++i) r.row(i) << i / 5.0, 1.0 - i / 5.0;
  const auto m = fit_responsibilities(x, r);
  EXPECT_TRUE(m.ridge);
  // the fit still reproduces the exactly linear target
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(m.raw(x.row(i).transpose())[0], i / 5.0, 1e-6);
}

TEST(Responsibility, NoFeaturesGivesColumnMeans) {
  Eigen::MatrixXd x(3, 0);
  Eigen::MatrixXd r(3, 2);
  r << 1, 0, 0.5, 0.5, 0, 1;
  const auto m = fit_responsibilities(x, r);
  EXPECT_NEAR(m.intercept[0], 0.5, 1e-15);
  EXPECT_NEAR(m.predict(Eigen::VectorXd(0))[1], 0.5, 1e-15);
}

TEST(Responsibility, PredictClipsAndRenormalizes) {
  ResponsibilityModel m;
  m.intercept = Eigen::Vector3d(1.4, -0.2, 0.6);
  m.weights = Eigen::MatrixXd::Zero(3, 1);
  const Eigen::VectorXd b = m.predict(Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(b[0], 1.0 / 1.6, 1e-15);
  EXPECT_EQ(b[1], 0.0);
  EXPECT_NEAR(b.sum(), 1.0, 1e-15);
  m.intercept = Eigen::Vector3d(-1, -2, 0);
  EXPECT_TRUE(m.predict(Eigen::VectorXd::Zero(1)).isApprox(Eigen::Vector3d::Constant(1.0 / 3)));
  EXPECT_THROW(m.predict(Eigen::VectorXd::Zero(2)), Error);
}

TEST(Responsibility, RejectsBadTargets) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd r(2, 2);
  r << 0.5, 0.6, 0.5, 0.5;
  EXPECT_THROW(fit_responsibilities(x, r), Error);
  EXPECT_THROW(fit_responsibilities(Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Ones(2, 1)), Error);
}

TEST(Importance, RanksByAbsoluteSum) {
  ResponsibilityModel m;
  m.intercept = Eigen::Vector2d::Zero();
  m.weights.resize(2, 3);
  m.weights << 0.1, -0.5, 0.2, -0.1, 0.5, 0.3;
  const auto rows = feature_importance(m, {"a", "b", "c"});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].feature, "b");
  EXPECT_DOUBLE_EQ(rows[0].coefficient, 1.0);
  EXPECT_EQ(rows[1].feature, "c");
  EXPECT_EQ(rows[2].feature, "a");
  EXPECT_EQ(rows[2].rank, 3);
  EXPECT_THROW(feature_importance(m, {"a"}), Error);
}

PatientRecord det_record(double end_time, Eigen::VectorXd features, int label = 1) {
  PatientRecord r;
  r.id = "p";
  r.label = label;
  r.end_time = end_time;
  r.admission.features = std::move(features);
  r.stream = ObservationSet(1);
  return r;
}

TEST(EpochPrior, ImpliedEpochFromStay) {
  EXPECT_EQ(implied_initial_epoch(144.0, 24.0, 6), 1);
  EXPECT_EQ(implied_initial_epoch(24.0, 24.0, 6), 6);
  EXPECT_EQ(implied_initial_epoch(25.0, 24.0, 6), 5);
  EXPECT_EQ(implied_initial_epoch(1000.0, 24.0, 6), 1);
  EXPECT_EQ(implied_initial_epoch(0.5, 24.0, 6), 6);
}

TEST(EpochPrior, AddOneSmoothedCounts) {
  std::vector<PatientRecord> d;
  for (int i = 0; i < 20; ++i) d.push_back(det_record(i < 15 ? 48.0 : 72.0, Eigen::VectorXd(0)));
  const Eigen::VectorXd f = estimate_epoch_prior(d, 24.0, 3, 20);
  // counts kbar=1: 5, kbar=2: 15, kbar=3: 0 plus one each
  EXPECT_NEAR(f[0], 6.0 / 23.0, 1e-15);
  EXPECT_NEAR(f[1], 16.0 / 23.0, 1e-15);
  EXPECT_NEAR(f[2], 1.0 / 23.0, 1e-15);
  d.pop_back();
  EXPECT_TRUE(estimate_epoch_prior(d, 24.0, 3, 20).isApprox(Eigen::Vector3d::Constant(1.0 / 3)));
}

TEST(ClassPrior, WeightedRatesWithFallback) {
  ResponsibilityModel m;
  m.intercept = Eigen::Vector2d::Zero();
  m.weights.resize(2, 1);
  m.weights << 1.0, -1.0;
  m.intercept << 0.0, 1.0;
  std::vector<PatientRecord> recs;
  // feature 1 -> beta (1, 0), feature 0 -> beta (0, 1)
  for (int i = 0; i < 20; ++i) recs.push_back(det_record(10.0, Eigen::VectorXd::Constant(1, 1.0), i < 5));
  for (int i = 0; i < 4; ++i) recs.push_back(det_record(10.0, Eigen::VectorXd::Constant(1, 0.0), i < 1));
  const Eigen::VectorXd p = estimate_class_prior(recs, m, 10.0);
  EXPECT_NEAR(p[0], 5.0 / 20.0, 1e-15);
  EXPECT_NEAR(p[1], 6.0 / 24.0, 1e-15);  // mass 4 < 10: cohort rate
  const Eigen::VectorXd q = estimate_class_prior(recs, m, 1.0);
  EXPECT_NEAR(q[1], 0.25, 1e-15);
  EXPECT_THROW(estimate_class_prior(std::vector<PatientRecord>{}, m, 1.0), Error);
}

class SelfTaught : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(3);
    EpochParams truth;
    truth.epoch_duration = 24.0;
    truth.epochs = {scalar(100.0, 2.0, 4.0), scalar(90.0, 2.0, 4.0)};
    std::uniform_real_distribution<double> gap(1.0, 4.0);
    for (int i = 0; i < 30; ++i) {
      const int kbar = 1 + i % 2;
      const double end = (2 - kbar + 1) * 24.0;
      std::vector<SampleTime> t;
      for (double x = gap(rng); x < end; x += gap(rng)) t.push_back({0, x});
      PatientRecord r = det_record(end, Eigen::VectorXd::Constant(1, i < 15 ? 1.0 : 0.0));
      r.stream = sample_path(truth, t, kbar, rng());
      recs.push_back(r);
    }
    rmodel.intercept = Eigen::Vector2d(0.0, 1.0);
    rmodel.weights.resize(2, 1);
    rmodel.weights << 1.0, -1.0;
    cfg.epoch_duration = 24.0;
    cfg.num_epochs = 2;
  }
  std::vector<PatientRecord> recs;
  ResponsibilityModel rmodel;
  SelfTaughtConfig cfg;
};

TEST_F(SelfTaught, SubsetsFollowResponsibilities) {
  const std::vector<StationaryParams> stable{scalar(100.0, 2.0, 4.0), scalar(100.0, 2.0, 4.0)};
  const auto r = self_taught_fit(recs, rmodel, stable, cfg, 5);
  // hard responsibilities make the Bernoulli draws deterministic
  EXPECT_EQ(r.set.subset_sizes, (std::vector<std::size_t>{15, 15}));
  for (const auto& e : r.set.experts) {
    EXPECT_NEAR(e.epochs[0].mean[0], 100.0, 3.0);
    EXPECT_NEAR(e.epochs[1].mean[0], 90.0, 3.0);
  }
  const auto again = self_taught_fit(recs, rmodel, stable, cfg, 5);
  EXPECT_EQ(again.set.experts[0].epochs[1].mean[0], r.set.experts[0].epochs[1].mean[0]);
}

TEST_F(SelfTaught, EmptySubsetFallsBackToPooled) {
  rmodel.intercept = Eigen::Vector2d(1.0, 0.0);
  rmodel.weights.setZero();
  const std::vector<StationaryParams> stable{scalar(100.0, 2.0, 4.0), scalar(100.0, 2.0, 4.0)};
  const auto r = self_taught_fit(recs, rmodel, stable, cfg, 5);
  EXPECT_EQ(r.set.subset_sizes[1], 0u);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NEAR(r.set.experts[1].epochs[1].mean[0], 90.0, 3.0);
}

TEST_F(SelfTaught, Errors) {
  const std::vector<StationaryParams> one{scalar(100.0, 2.0, 4.0)};
  EXPECT_THROW(self_taught_fit(recs, rmodel, one, cfg, 5), Error);
  const std::vector<StationaryParams> two{scalar(100.0, 2.0, 4.0), scalar(100.0, 2.0, 4.0)};
  try {
    self_taught_fit(std::vector<PatientRecord>{}, rmodel, two, cfg, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
}

}  // namespace
}  // namespace mogp
