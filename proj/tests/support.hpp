#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's likelihood, Bayes or counting code.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mogp/gp.hpp"
#include "mogp/risk.hpp"

namespace mogp::testing {

/// Dense covariance straight from the kernel definition, without the
/// library's factor helpers.
inline Eigen::MatrixXd dense_covariance(const StationaryParams& p, const ObservationSet& obs,
                                        double jitter) {
  const int d = p.dim();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
  int idx = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) l(i, j) = p.corr.entries()[idx++];
  const Eigen::MatrixXd sigma = l * l.transpose();
  const auto m = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd k(m, m);
  const double w2 = p.kernel.amplitude * p.kernel.amplitude;
  const double l2 = p.kernel.length_scale * p.kernel.length_scale;
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      const double dt = obs[static_cast<std::size_t>(a)].time - obs[static_cast<std::size_t>(b)].time;
      k(a, b) = sigma(obs[static_cast<std::size_t>(a)].stream, obs[static_cast<std::size_t>(b)].stream) *
                w2 * std::exp(-dt * dt / (2.0 * l2));
    }
    k(a, a) += jitter;
  }
  return k;
}

/// log N(x; mu, K) via a full-pivot LU: determinant and solve both come from
/// the LU, not from a Cholesky.
inline double dense_mvn_logpdf(const Eigen::MatrixXd& k, const Eigen::VectorXd& r) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  const double logdet = std::log(std::abs(lu.determinant()));
  const double quad = r.dot(lu.solve(r));
  return -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(r.size()) * std::log(2.0 * std::numbers::pi);
}

inline double dense_log_likelihood(const StationaryParams& p, const ObservationSet& obs,
                                   double jitter = 1e-6) {
  if (obs.empty()) return 0.0;
  Eigen::VectorXd r(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t a = 0; a < obs.size(); ++a) r[static_cast<Eigen::Index>(a)] = obs[a].value - p.mean[obs[a].stream];
  return dense_mvn_logpdf(dense_covariance(p, obs, jitter), r);
}

/// Epoch-blocked density for offset kbar; -inf when a sample overflows K.
inline double dense_epoch_log_likelihood(const EpochParams& p, const ObservationSet& obs, int kbar,
                                         double jitter = 1e-6) {
  const int k = p.num_epochs();
  std::vector<std::vector<Sample>> blocks(static_cast<std::size_t>(k));
  for (const auto& s : obs.samples()) {
    const int e = static_cast<int>(std::floor(s.time / p.epoch_duration)) + kbar;
    if (e > k) return -std::numeric_limits<double>::infinity();
    blocks[static_cast<std::size_t>(e - 1)].push_back(s);
  }
  double total = 0.0;
  for (int e = 0; e < k; ++e) {
    total += dense_log_likelihood(p.epochs[static_cast<std::size_t>(e)],
                                  ObservationSet(obs.dim(), blocks[static_cast<std::size_t>(e)]), jitter);
  }
  return total;
}

/// Brute-force R_z: enumerate kbar for the epoch posterior, and for each kbar
/// enumerate V in {0, 1} with plain densities (no log-space tricks).
inline double brute_force_expert_risk(const StationaryParams& stable, const EpochParams& det,
                                      const Eigen::VectorXd& f, double class_prior,
                                      const ObservationSet& obs) {
  const int k = det.num_epochs();
  const double p0 = std::exp(dense_log_likelihood(stable, obs));
  std::vector<double> p1(static_cast<std::size_t>(k));
  double evidence = 0.0;
  for (int kbar = 1; kbar <= k; ++kbar) {
    p1[static_cast<std::size_t>(kbar - 1)] = std::exp(dense_epoch_log_likelihood(det, obs, kbar));
    evidence += f[kbar - 1] * p1[static_cast<std::size_t>(kbar - 1)];
  }
  double risk = 0.0;
  for (int kbar = 1; kbar <= k; ++kbar) {
    const double like = p1[static_cast<std::size_t>(kbar - 1)];
    const double post_k = f[kbar - 1] * like / evidence;
    const double joint1 = class_prior * like;
    const double joint0 = (1.0 - class_prior) * p0;
    risk += post_k * joint1 / (joint1 + joint0);
  }
  return risk;
}

/// Adjusted Rand index from the contingency table.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto c2 = [](double n) { return n * (n - 1.0) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [_, n] : cells) index += c2(n);
  for (const auto& [_, n] : rows) sa += c2(n);
  for (const auto& [_, n] : cols) sb += c2(n);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Plug-in rates by walking every patient once and tallying by cell.
struct Tally {
  double tp = 0, fp = 0, tn = 0, fn = 0;
};

inline Tally tally(const std::vector<int>& labels, const std::vector<bool>& fired) {
  Tally t;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1 && fired[i]) t.tp += 1;
    if (labels[i] == 1 && !fired[i]) t.fn += 1;
    if (labels[i] == 0 && fired[i]) t.fp += 1;
    if (labels[i] == 0 && !fired[i]) t.tn += 1;
  }
  return t;
}

/// AUC as the fraction of (positive, negative) pairs ordered correctly.
inline double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (const double p : pos)
    for (const double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / static_cast<double>(pos.size() * neg.size());
}

inline StationaryParams random_params(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  StationaryParams p;
  p.mean.resize(dim);
  for (int i = 0; i < dim; ++i) p.mean[i] = 10.0 * u(rng);
  p.kernel.length_scale = std::exp(1.5 * u(rng) + 1.0);
  p.kernel.amplitude = std::exp(0.3 * u(rng));
  Eigen::VectorXd e(packed_size(dim));
  int idx = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j, ++idx) e[idx] = i == j ? std::exp(0.5 * u(rng)) : 0.5 * u(rng);
  p.corr = CorrelationFactor(dim, e);
  return p;
}

inline ObservationSet random_obs(int dim, int max_samples, double horizon, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, max_samples);
  std::uniform_int_distribution<int> stream(0, dim - 1);
  std::uniform_real_distribution<double> t(0.0, horizon);
  std::normal_distribution<double> v(0.0, 5.0);
  std::vector<Sample> s;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) s.push_back({stream(rng), t(rng), v(rng)});
  return {dim, std::move(s)};
}

/// Like random_obs, but the values are a draw from N(mean, K) of `p` itself,
/// via a dense Cholesky of the oracle covariance.
inline ObservationSet random_obs_from(const StationaryParams& p, int max_samples, double horizon,
                                      std::mt19937_64& rng) {
  ObservationSet shape = random_obs(p.dim(), max_samples, horizon, rng);
  if (shape.empty()) return shape;
  const Eigen::MatrixXd l = dense_covariance(p, shape, 1e-6).llt().matrixL();
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXd e(static_cast<Eigen::Index>(shape.size()));
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = n01(rng);
  const Eigen::VectorXd draw = l * e;
  std::vector<Sample> s(shape.samples().begin(), shape.samples().end());
  for (std::size_t i = 0; i < s.size(); ++i) s[i].value = p.mean[s[i].stream] + draw[static_cast<Eigen::Index>(i)];
  return {p.dim(), std::move(s)};
}

inline StationaryParams scalar(double mean, double sd, double ell) {
  StationaryParams p;
  p.mean = Eigen::VectorXd::Constant(1, mean);
  p.kernel.length_scale = ell;
  p.corr = CorrelationFactor::diagonal(Eigen::VectorXd::Constant(1, sd));
  return p;
}

/// One-stream model without admission features; beta is given by `intercept`.
inline TrainedModel toy_model(std::vector<StationaryParams> stable, std::vector<EpochParams> det,
                              Eigen::VectorXd class_prior, Eigen::VectorXd epoch_prior,
                              Eigen::VectorXd intercept) {
  TrainedModel m;
  m.schema.streams = {"x"};
  m.stable = std::move(stable);
  m.num_epochs = det.front().num_epochs();
  m.epoch_duration = det.front().epoch_duration;
  m.deteriorating.experts = std::move(det);
  m.deteriorating.class_prior = std::move(class_prior);
  m.deteriorating.epoch_prior = std::move(epoch_prior);
  m.rmodel.intercept = std::move(intercept);
  m.rmodel.weights = Eigen::MatrixXd::Zero(m.rmodel.intercept.size(), 0);
  m.global_prior = 0.1;
  m.stream_stats.mean = Eigen::VectorXd::Zero(1);
  m.stream_stats.sd = Eigen::VectorXd::Ones(1);
  return m;
}

}  // namespace mogp::testing
