#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mogp/error.hpp"
#include "mogp/gp.hpp"
#include "support.hpp"

namespace mogp {
namespace {

using testing::dense_log_likelihood;
using testing::random_obs;
using testing::random_params;
using testing::scalar;

TEST(Kernel, MatchesDefinition) {
  KernelParams k{2.0, 1.5};
  EXPECT_DOUBLE_EQ(kernel_eval(k, 1.0, 1.0), 2.25);
  EXPECT_NEAR(kernel_eval(k, 0.0, 2.0), 2.25 * std::exp(-0.5), 1e-15);
  EXPECT_DOUBLE_EQ(kernel_eval(k, 3.0, 1.0), kernel_eval(k, 1.0, 3.0));
}

TEST(CorrelationFactor, PackedRowMajor) {
  Eigen::VectorXd e(3);
  e << 2.0, 0.5, 1.5;
  CorrelationFactor f(2, e);
  Eigen::MatrixXd l = f.lower();
  EXPECT_EQ(l(0, 0), 2.0);
  EXPECT_EQ(l(1, 0), 0.5);
  EXPECT_EQ(l(1, 1), 1.5);
  EXPECT_EQ(l(0, 1), 0.0);
  Eigen::MatrixXd c = f.covariance();
  EXPECT_DOUBLE_EQ(c(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 0.25 + 2.25);
}

TEST(CorrelationFactor, RejectsBadEntries) {
  EXPECT_THROW(CorrelationFactor(2, Eigen::VectorXd::Ones(2)), Error);
  Eigen::VectorXd e(1);
  e << 0.0;
  EXPECT_THROW(CorrelationFactor(1, e), Error);
  e << std::nan("");
  EXPECT_THROW(CorrelationFactor(1, e), Error);
  EXPECT_THROW(CorrelationFactor::from_covariance(-Eigen::MatrixXd::Identity(2, 2)), Error);
}

TEST(CorrelationFactor, FromCovarianceRoundTrip) {
  Eigen::MatrixXd c(2, 2);
  c << 4.0, 1.2, 1.2, 2.0;
  EXPECT_TRUE(CorrelationFactor::from_covariance(c).covariance().isApprox(c, 1e-14));
}

TEST(ObservationSet, SortsAndValidates) {
  ObservationSet s(2, {{1, 3.0, 1.0}, {0, 1.0, 2.0}, {0, 3.0, 0.5}});
  EXPECT_EQ(s[0].time, 1.0);
  EXPECT_EQ(s[1].stream, 0);
  EXPECT_EQ(s[2].stream, 1);
  EXPECT_EQ(*s.last_time(), 3.0);
  EXPECT_THROW(ObservationSet(1, {{1, 0.0, 1.0}}), Error);
  EXPECT_THROW(ObservationSet(1, {{0, -1.0, 1.0}}), Error);
  EXPECT_THROW(ObservationSet(1, {{0, std::nan(""), 1.0}}), Error);
  EXPECT_FALSE(ObservationSet(1).last_time());
}

TEST(ObservationSet, WindowsAndPrefixes) {
  ObservationSet s(1, {{0, 1.0, 1.0}, {0, 5.0, 2.0}, {0, 9.0, 3.0}});
  EXPECT_EQ(s.up_to(5.0).size(), 2u);
  const ObservationSet w = s.window_from(5.0);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].time, 0.0);
  EXPECT_EQ(w[1].time, 4.0);
}

TEST(LogLikelihood, EmptySetIsZero) {
  EXPECT_EQ(log_marginal_likelihood(scalar(0.0, 1.0, 1.0), ObservationSet(1)), 0.0);
}

TEST(LogLikelihood, SingleSampleIsUnivariateNormal) {
  const auto p = scalar(3.0, 2.0, 5.0);
  ObservationSet s(1, {{0, 7.0, 4.0}});
  const double var = 4.0 + 1e-6;
  const double expected = -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 / var;
  EXPECT_NEAR(log_marginal_likelihood(p, s), expected, 1e-12);
}

TEST(LogLikelihood, MatchesDenseOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 3;
    const auto p = random_params(dim, rng);
    const auto obs = random_obs(dim, 8, 30.0, rng);
    EXPECT_NEAR(log_marginal_likelihood(p, obs), dense_log_likelihood(p, obs), 1e-8);
  }
}

TEST(LogLikelihood, RepeatedTimestampUsesJitter) {
  const auto p = scalar(0.0, 1.0, 2.0);
  ObservationSet s(1, {{0, 1.0, 0.1}, {0, 1.0, 0.2}});
  const auto f = factorize_covariance(p, std::vector<SampleTime>{{0, 1.0}, {0, 1.0}});
  EXPECT_GE(f.jitter, 1e-6);
  EXPECT_TRUE(std::isfinite(log_marginal_likelihood(p, s)));
}

TEST(LogLikelihood, ExhaustedLadderThrows) {
  const auto p = scalar(0.0, 1.0, 2.0);
  JitterPolicy none{0.0, 0.0, 10.0};
  std::vector<SampleTime> pts{{0, 1.0}, {0, 1.0}};
  try {
    factorize_covariance(p, pts, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveDefinite);
  }
}

TEST(LogLikelihood, RejectsStreamOutsideExpert) {
  const auto p = scalar(0.0, 1.0, 2.0);
  ObservationSet s(2, {{1, 1.0, 0.1}});
  EXPECT_THROW(log_marginal_likelihood(p, s), Error);
}

TEST(Epochs, IndexAndOverflow) {
  EXPECT_EQ(epoch_index(0.0, 24.0, 1), 1);
  EXPECT_EQ(epoch_index(23.999, 24.0, 1), 1);
  EXPECT_EQ(epoch_index(24.0, 24.0, 1), 2);  // boundary belongs to the later epoch
  EXPECT_EQ(epoch_index(30.0, 24.0, 3), 4);

  ObservationSet s(1, {{0, 1.0, 0.0}, {0, 30.0, 0.0}});
  const auto blocks = split_by_epoch(s, 24.0, 3, 2);
  EXPECT_EQ(blocks[1].size(), 1u);
  EXPECT_EQ(blocks[2].size(), 1u);
  try {
    split_by_epoch(s, 24.0, 3, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EpochOverflow);
  }
  EXPECT_THROW(split_by_epoch(s, 24.0, 3, 0), Error);
}

TEST(Epochs, BlocksAreIndependent) {
  EpochParams p;
  p.epoch_duration = 10.0;
  p.epochs = {scalar(0.0, 1.0, 50.0), scalar(5.0, 2.0, 50.0)};
  ObservationSet s(1, {{0, 2.0, 0.5}, {0, 12.0, 4.0}});
  const double expected = log_marginal_likelihood(p.epochs[0], ObservationSet(1, {{0, 2.0, 0.5}})) +
                          log_marginal_likelihood(p.epochs[1], ObservationSet(1, {{0, 12.0, 4.0}}));
  EXPECT_NEAR(log_marginal_likelihood(p, s, 1), expected, 1e-12);
  EXPECT_NEAR(log_marginal_likelihood(p, s, 1), testing::dense_epoch_log_likelihood(p, s, 1), 1e-9);
}

TEST(Sampling, DeterministicPerSeed) {
  const auto p = scalar(5.0, 1.0, 3.0);
  std::vector<SampleTime> t{{0, 0.0}, {0, 1.0}, {0, 2.5}};
  const auto a = sample_path(p, t, 42);
  const auto b = sample_path(p, t, 42);
  const auto c = sample_path(p, t, 43);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i].value, b[i].value);
  EXPECT_NE(a[0].value, c[0].value);
}

TEST(Sampling, MomentsMatchParameters) {
  const auto p = scalar(10.0, 2.0, 1.0);
  std::vector<SampleTime> t{{0, 0.0}, {0, 0.5}};
  double s0 = 0, s00 = 0, s01 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto x = sample_path(p, t, static_cast<std::uint64_t>(i));
    const double a = x[0].value - 10.0, b = x[1].value - 10.0;
    s0 += a;
    s00 += a * a;
    s01 += a * b;
  }
  EXPECT_NEAR(s0 / n, 0.0, 0.06);
  EXPECT_NEAR(s00 / n, 4.0, 0.15);
  EXPECT_NEAR(s01 / n, 4.0 * std::exp(-0.125), 0.15);
}

TEST(Sampling, EpochOverflowIsReported) {
  EpochParams p;
  p.epoch_duration = 10.0;
  p.epochs = {scalar(0.0, 1.0, 2.0), scalar(0.0, 1.0, 2.0)};
  std::vector<SampleTime> t{{0, 15.0}};
  EXPECT_NO_THROW(sample_path(p, t, 1, 1));
  try {
    sample_path(p, t, 2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EpochOverflow);
  }
}

TEST(Bounds, FromGapsAndSpan) {
  std::vector<ObservationSet> sets{ObservationSet(1, {{0, 0.0, 0}, {0, 2.0, 0}, {0, 2.5, 0}}),
                                   ObservationSet(1, {{0, 1.0, 0}, {0, 11.0, 0}})};
  const auto b = length_scale_bounds(sets);
  EXPECT_DOUBLE_EQ(b.lower, 0.05);
  EXPECT_DOUBLE_EQ(b.upper, 100.0);
}

class FitTest : public ::testing::Test {
 protected:
  static std::vector<ObservationSet> draw(const StationaryParams& truth, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> gap(1.0, 4.0);
    std::vector<ObservationSet> sets;
    for (int i = 0; i < n; ++i) {
      std::vector<SampleTime> t;
      for (double x = gap(rng); x < 60.0; x += gap(rng)) {
        for (int s = 0; s < truth.dim(); ++s) t.push_back({s, x});
      }
      sets.push_back(sample_path(truth, t, rng()));
    }
    return sets;
  }
};

TEST_F(FitTest, RecoversScalarParameters) {
  const auto truth = scalar(120.0, 3.0, 6.0);
  const auto sets = draw(truth, 40, 5);
  auto init = scalar(100.0, 1.0, 20.0);
  FitConfig cfg;
  cfg.seed = 3;
  const auto r = fit_mle(sets, init, cfg);
  EXPECT_NEAR(r.params.mean[0], 120.0, 1.5);
  EXPECT_NEAR(r.params.kernel.length_scale, 6.0, 0.6);
  EXPECT_NEAR(r.params.corr.entries()[0], 3.0, 0.3);
  EXPECT_GE(r.log_likelihood, r.initial_log_likelihood);
  EXPECT_NEAR(r.log_likelihood, weighted_log_likelihood(r.params, sets), 1e-6 * std::abs(r.log_likelihood));
}

TEST_F(FitTest, RecoversCrossStreamCorrelation) {
  StationaryParams truth;
  truth.mean = Eigen::Vector2d(80.0, 120.0);
  truth.kernel.length_scale = 5.0;
  Eigen::Matrix2d c;
  c << 4.0, 3.0, 3.0, 9.0;
  truth.corr = CorrelationFactor::from_covariance(c);
  const auto sets = draw(truth, 40, 8);
  StationaryParams init = truth;
  init.corr = CorrelationFactor::diagonal(Eigen::Vector2d(1.0, 1.0));
  init.kernel.length_scale = 12.0;
  const auto r = fit_mle(sets, init, FitConfig{});
  const Eigen::MatrixXd est = r.params.corr.covariance();
  EXPECT_NEAR(est(0, 1) / std::sqrt(est(0, 0) * est(1, 1)), 0.5, 0.1);
}

TEST_F(FitTest, OptimumIsStationary) {
  const auto sets = draw(scalar(0.0, 1.5, 4.0), 20, 9);
  const auto r = fit_mle(sets, scalar(0.0, 1.0, 8.0), FitConfig{});
  auto at = [&](double dl, double ds) {
    StationaryParams p = r.params;
    p.kernel.length_scale *= std::exp(dl);
    p.corr = CorrelationFactor::diagonal(Eigen::VectorXd::Constant(1, p.corr.entries()[0] * std::exp(ds)));
    p.mean = gls_mean(p, sets);
    return weighted_log_likelihood(p, sets);
  };
  const double h = 1e-4;
  const double base = std::abs(at(0, 0));
  EXPECT_LT(std::abs(at(h, 0) - at(-h, 0)) / (2 * h), 1e-3 * base);
  EXPECT_LT(std::abs(at(0, h) - at(0, -h)) / (2 * h), 1e-3 * base);
}

TEST_F(FitTest, GlsMeanMatchesWeightedClosedForm) {
  const auto sets = draw(scalar(50.0, 2.0, 3.0), 6, 10);
  const auto p = scalar(0.0, 2.0, 3.0);
  std::vector<double> w{1.0, 0.5, 0.0, 2.0, 1.0, 0.25};
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < sets.size(); ++n) {
    const Eigen::MatrixXd k = testing::dense_covariance(p, sets[n], 1e-6);
    const Eigen::MatrixXd kinv = k.inverse();
    Eigen::VectorXd x(static_cast<Eigen::Index>(sets[n].size()));
    for (std::size_t i = 0; i < sets[n].size(); ++i) x[static_cast<Eigen::Index>(i)] = sets[n][i].value;
    num += w[n] * kinv.rowwise().sum().dot(x);
    den += w[n] * kinv.sum();
  }
  EXPECT_NEAR(gls_mean(p, sets, w)[0], num / den, 1e-8);
}

TEST_F(FitTest, WeightsActLikeDuplication) {
  const auto sets = draw(scalar(10.0, 1.0, 4.0), 5, 11);
  std::vector<ObservationSet> doubled;
  for (const auto& s : sets) {
    doubled.push_back(s);
    doubled.push_back(s);
  }
  const auto p = scalar(10.0, 1.0, 4.0);
  EXPECT_NEAR(weighted_log_likelihood(p, sets, std::vector<double>(5, 2.0)),
              weighted_log_likelihood(p, doubled), 1e-9);
}

TEST_F(FitTest, DegenerateInputs) {
  std::vector<ObservationSet> empty{ObservationSet(1), ObservationSet(1)};
  try {
    fit_mle(empty, scalar(0.0, 1.0, 1.0), FitConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
  std::vector<ObservationSet> flat{ObservationSet(1, {{0, 0.0, 3.0}, {0, 1.0, 3.0}})};
  try {
    fit_mle(flat, scalar(0.0, 1.0, 1.0), FitConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
  std::vector<ObservationSet> two{ObservationSet(1, {{0, 0.0, 3.0}, {0, 1.0, 4.0}})};
  EXPECT_THROW(fit_mle(two, scalar(0.0, 1.0, 1.0), FitConfig{}, std::vector<double>{-1.0}), Error);
}

TEST_F(FitTest, LengthScaleStaysInsideBounds) {
  const auto sets = draw(scalar(0.0, 1.0, 40.0), 10, 12);
  FitConfig cfg;
  cfg.bounds = LengthScaleBounds{0.5, 2.0};
  const auto r = fit_mle(sets, scalar(0.0, 1.0, 1.0), cfg);
  EXPECT_GE(r.params.kernel.length_scale, 0.5);
  EXPECT_LE(r.params.kernel.length_scale, 2.0);
}

TEST_F(FitTest, EpochFitsLeaveEmptyBucketsAlone) {
  EpochParams init;
  init.epoch_duration = 24.0;
  init.epochs = {scalar(0.0, 1.0, 3.0), scalar(7.0, 1.0, 3.0)};
  std::vector<std::vector<ObservationSet>> buckets(2);
  buckets[0] = draw(scalar(5.0, 1.0, 3.0), 10, 13);
  const auto r = fit_mle_epochs(buckets, init, FitConfig{});
  EXPECT_NEAR(r.params.epochs[0].mean[0], 5.0, 1.0);
  EXPECT_EQ(r.params.epochs[1].mean[0], 7.0);
  EXPECT_THROW(fit_mle_epochs(std::vector<std::vector<ObservationSet>>(3), init, FitConfig{}), Error);
}

}  // namespace
}  // namespace mogp
