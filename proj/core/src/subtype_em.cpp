#include "mogp/subtype_em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mogp/error.hpp"

namespace mogp {

namespace {

constexpr double kNegligibleWeight = 1e-14;
constexpr double kStaleWeight = 1e-9;

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int data_dim(std::span<const ObservationSet> data) {
  if (data.empty()) fail(ErrorCode::InvalidArgument, "no stable patients");
  const int dim = data.front().dim();
  for (const auto& s : data) {
    if (s.dim() != dim) fail(ErrorCode::InvalidArgument, "observation sets differ in dimension");
  }
  return dim;
}

// Per-patient summary: (mean, variance) of each stream; absent streams take
// the population mean and zero variance.
Eigen::MatrixXd summaries(std::span<const ObservationSet> data, int dim) {
  Eigen::VectorXd pop_sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd pop_n = Eigen::VectorXd::Zero(dim);
  for (const auto& s : data)
    for (const auto& x : s.samples()) {
      pop_sum[x.stream] += x.value;
      pop_n[x.stream] += 1.0;
    }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.size()), 2 * dim);
  for (std::size_t n = 0; n < data.size(); ++n) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sq = sum, cnt = sum;
    for (const auto& x : data[n].samples()) {
      sum[x.stream] += x.value;
      sq[x.stream] += x.value * x.value;
      cnt[x.stream] += 1.0;
    }
    for (int d = 0; d < dim; ++d) {
      const auto row = static_cast<Eigen::Index>(n);
      if (cnt[d] == 0.0) {
        out(row, 2 * d) = pop_n[d] > 0.0 ? pop_sum[d] / pop_n[d] : 0.0;
        out(row, 2 * d + 1) = 0.0;
        continue;
      }
      const double mu = sum[d] / cnt[d];
      out(row, 2 * d) = mu;
      out(row, 2 * d + 1) = std::max(0.0, sq[d] / cnt[d] - mu * mu);
    }
  }
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double mu = out.col(c).mean();
    const double sd = std::sqrt((out.col(c).array() - mu).square().mean());
    out.col(c) = (out.col(c).array() - mu) / (sd > 0.0 ? sd : 1.0);
  }
  return out;
}

struct Clustering {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

// Lloyd's algorithm with k-means++ seeding over canonically ordered points, so
// that duplicating every point leaves the result unchanged.
Clustering kmeans(const Eigen::MatrixXd& pts, int k, std::mt19937_64& rng) {
  const Eigen::Index n = pts.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      if (pts(a, c) != pts(b, c)) return pts(a, c) < pts(b, c);
    }
    return false;
  });
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto pick = [&](const std::vector<double>& mass) {
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    const double u = unif(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      acc += mass[i];
      if (u < acc) return order[i];
    }
    return order.back();
  };

  Eigen::MatrixXd centers(k, pts.cols());
  std::vector<double> mass(static_cast<std::size_t>(n), 1.0);
  centers.row(0) = pts.row(pick(mass));
  for (int c = 1; c < k; ++c) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j) best = std::min(best, (pts.row(order[i]) - centers.row(j)).squaredNorm());
      mass[i] = best;
    }
    if (std::accumulate(mass.begin(), mass.end(), 0.0) <= 0.0) std::fill(mass.begin(), mass.end(), 1.0);
    centers.row(c) = pts.row(pick(mass));
  }

  Clustering out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = (pts.row(i) - centers.row(j)).squaredNorm();
        if (d < best) best = d, arg = j;
      }
      inertia += best;
      if (out.labels[static_cast<std::size_t>(i)] != arg || iter == 0) changed = true;
      out.labels[static_cast<std::size_t>(i)] = arg;
    }
    out.inertia = inertia;
    if (!changed) break;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, pts.cols());
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(out.labels[static_cast<std::size_t>(i)]) += pts.row(i);
      cnt[out.labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (int j = 0; j < k; ++j) {
      if (cnt[j] > 0.0) centers.row(j) = sum.row(j) / cnt[j];
    }
  }
  return out;
}

double median_gap(std::span<const ObservationSet> data) {
  std::vector<double> gaps;
  for (const auto& s : data)
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double g = s[i].time - s[i - 1].time;
      if (g > 0.0) gaps.push_back(g);
    }
  if (gaps.empty()) return 1.0;
  const auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  return *mid;
}

void check_mass(const Eigen::MatrixXd& resp) {
  for (Eigen::Index z = 0; z < resp.cols(); ++z) {
    if (resp.col(z).sum() < 1.0) {
      fail(ErrorCode::DegenerateCluster,
           "expert " + std::to_string(z) + " holds less than one patient of responsibility");
    }
  }
}

struct MStep {
  std::span<const ObservationSet> data;
  FitConfig fit;
  std::uint64_t seed;
  std::vector<std::vector<double>> last;  // weights of each expert's latest fit

  // Closed-form priors, then a warm-started weighted ascent per expert.
  void operator()(const Eigen::MatrixXd& resp, std::vector<StationaryParams>& experts,
                  Eigen::VectorXd& priors, std::uint64_t salt) {
    check_mass(resp);
    priors = resp.colwise().sum().transpose() / static_cast<double>(data.size());
    std::vector<double> w(data.size());
    for (std::size_t z = 0; z < experts.size(); ++z) {
      for (std::size_t n = 0; n < data.size(); ++n) {
        const double b = resp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(z));
        w[n] = b > kNegligibleWeight ? b : 0.0;
      }
      // an expert whose weights did not move keeps its parameters
      if (last.size() > z && std::equal(w.begin(), w.end(), last[z].begin(),
                                        [](double a, double b) { return std::abs(a - b) <= kStaleWeight; })) {
        continue;
      }
      if (last.size() <= z) last.resize(z + 1);
      last[z] = w;
      fit.seed = mix_seed(seed, salt * 131 + z);
      try {
        experts[z] = fit_mle(data, experts[z], fit, w).params;
      } catch (const Error& e) {
        // a subset without spread in some stream keeps its previous expert
        if (e.code() != ErrorCode::DegenerateData) throw;
      }
    }
  }
};

EmResult run_em(std::span<const ObservationSet> data, std::vector<StationaryParams> experts,
                Eigen::VectorXd priors, const EmConfig& config, const LengthScaleBounds& bounds,
                const std::vector<int>* hard_labels = nullptr) {
  const int g = static_cast<int>(experts.size());
  for (auto& e : experts) {
    e.validate();
    e.kernel.length_scale = std::clamp(e.kernel.length_scale, bounds.lower, bounds.upper);
  }
  MStep mstep{data, config.mstep, config.mstep.seed, {}};
  mstep.fit.bounds = bounds;
  mstep.fit.jitter = config.jitter;

  if (hard_labels) {
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()), g);
    for (std::size_t n = 0; n < data.size(); ++n) onehot(static_cast<Eigen::Index>(n), (*hard_labels)[n]) = 1.0;
    mstep(onehot, experts, priors, 0x1717);
  }

  EmResult result;
  EStep cur = e_step(data, experts, priors, config.jitter);
  result.log_likelihood_trace.push_back(cur.log_likelihood);

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    mstep(cur.responsibilities, experts, priors, static_cast<std::uint64_t>(iter));
    EStep next = e_step(data, experts, priors, config.jitter);
    const double delta = (next.responsibilities - cur.responsibilities).cwiseAbs().mean();
    cur = std::move(next);
    result.log_likelihood_trace.push_back(cur.log_likelihood);
    result.iterations = iter + 1;
    if (delta < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  check_mass(cur.responsibilities);
  result.state.experts = std::move(experts);
  result.state.priors = std::move(priors);
  result.state.responsibilities = std::move(cur.responsibilities);
  result.state.log_likelihood = cur.log_likelihood;
  return result;
}

}  // namespace

EStep e_step(std::span<const ObservationSet> data, std::span<const StationaryParams> experts,
             const Eigen::VectorXd& priors, const JitterPolicy& jitter) {
  const auto g = static_cast<Eigen::Index>(experts.size());
  if (g == 0 || priors.size() != g) fail(ErrorCode::InvalidArgument, "experts and priors differ");
  EStep out;
  out.responsibilities.resize(static_cast<Eigen::Index>(data.size()), g);
  Eigen::VectorXd logp(g);
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (Eigen::Index z = 0; z < g; ++z) {
      const double lp = priors[z] > 0.0 ? std::log(priors[z]) : -std::numeric_limits<double>::infinity();
      logp[z] = lp + log_marginal_likelihood(experts[static_cast<std::size_t>(z)], data[n], jitter);
    }
    const double lse = log_sum_exp(logp);
    if (!std::isfinite(lse)) fail(ErrorCode::DegenerateCluster, "patient has zero mixture density");
    out.responsibilities.row(static_cast<Eigen::Index>(n)) = (logp.array() - lse).exp().transpose();
    out.log_likelihood += lse;
  }
  return out;
}

Seeding kmeans_seed(std::span<const ObservationSet> data, int num_experts, int restarts,
                    std::uint64_t seed, const LengthScaleBounds& bounds) {
  const int dim = data_dim(data);
  if (num_experts < 1) fail(ErrorCode::InvalidArgument, "need at least one expert");
  const Eigen::MatrixXd pts = summaries(data, dim);
  std::mt19937_64 rng(seed);
  Clustering best;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    Clustering c = kmeans(pts, num_experts, rng);
    if (c.inertia < best.inertia) best = std::move(c);
  }

  const double ell = std::clamp(5.0 * median_gap(data), bounds.lower, bounds.upper);
  std::vector<StationaryParams> experts;
  for (int z = -1; z < num_experts; ++z) {
    // z = -1 computes pooled statistics used as fallback for thin clusters
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sq = sum, cnt = sum;
    for (std::size_t n = 0; n < data.size(); ++n) {
      if (z >= 0 && best.labels[n] != z) continue;
      for (const auto& x : data[n].samples()) {
        sum[x.stream] += x.value;
        sq[x.stream] += x.value * x.value;
        cnt[x.stream] += 1.0;
      }
    }
    StationaryParams p;
    p.mean.resize(dim);
    Eigen::VectorXd sd(dim);
    for (int d = 0; d < dim; ++d) {
      const bool pooled = z >= 0 && cnt[d] < 2.0;
      const double c = pooled ? 0.0 : cnt[d];
      p.mean[d] = pooled || c == 0.0 ? (z >= 0 ? experts.front().mean[d] : 0.0) : sum[d] / c;
      const double var = c > 0.0 ? sq[d] / c - p.mean[d] * p.mean[d] : 0.0;
      sd[d] = var > 0.0 ? std::sqrt(var) : 0.0;
      if (!(sd[d] > 0.0)) sd[d] = z >= 0 ? experts.front().corr.lower()(d, d) : 1.0;
    }
    p.kernel.length_scale = ell;
    p.corr = CorrelationFactor::diagonal(sd);
    experts.push_back(std::move(p));
  }
  experts.erase(experts.begin());

  // The 5x-gap seed is far too smooth for rough paths and leaves K nearly
  // singular; halve it while the hard-assignment likelihood improves.
  auto total = [&](double l) {
    double acc = 0.0;
    std::vector<double> w(data.size());
    for (int z = 0; z < num_experts; ++z) {
      for (std::size_t n = 0; n < data.size(); ++n) w[n] = best.labels[n] == z ? 1.0 : 0.0;
      StationaryParams p = experts[static_cast<std::size_t>(z)];
      p.kernel.length_scale = l;
      acc += weighted_log_likelihood(p, data, w);
    }
    return acc;
  };
  double best_ell = ell;
  double best_ll = -std::numeric_limits<double>::infinity();
  try {
    best_ll = total(ell);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonPositiveDefinite) throw;
  }
  for (double l = ell / 2.0; l >= bounds.lower; l /= 2.0) {
    double ll = -std::numeric_limits<double>::infinity();
    try {
      ll = total(l);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonPositiveDefinite) throw;
    }
    if (!(ll > best_ll)) break;
    best_ll = ll;
    best_ell = l;
  }
  for (auto& e : experts) e.kernel.length_scale = best_ell;
  return {std::move(experts), std::move(best.labels)};
}

EmResult em_fit(std::span<const ObservationSet> data, int num_experts, const EmConfig& config,
                std::uint64_t seed) {
  data_dim(data);
  if (num_experts < 1) fail(ErrorCode::InvalidArgument, "need at least one expert");
  if (data.size() < static_cast<std::size_t>(num_experts)) {
    fail(ErrorCode::InvalidArgument, "fewer patients than experts");
  }
  const LengthScaleBounds bounds = length_scale_bounds(data);
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(attempt));
    Seeding init = kmeans_seed(data, num_experts, config.kmeans_restarts, s, bounds);
    Eigen::VectorXd priors = Eigen::VectorXd::Constant(num_experts, 1.0 / num_experts);
    EmConfig cfg = config;
    cfg.mstep.seed = s;
    try {
      EmResult r = run_em(data, std::move(init.experts), std::move(priors), cfg, bounds, &init.labels);
      r.reseeds = attempt;
      return r;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateCluster || attempt >= config.max_reseeds) throw;
    }
  }
}

EmResult em_fit(std::span<const ObservationSet> data, std::vector<StationaryParams> init_experts,
                Eigen::VectorXd init_priors, const EmConfig& config) {
  data_dim(data);
  if (init_experts.empty() || init_priors.size() != static_cast<Eigen::Index>(init_experts.size())) {
    fail(ErrorCode::InvalidArgument, "initial experts and priors differ");
  }
  if (data.size() < init_experts.size()) fail(ErrorCode::InvalidArgument, "fewer patients than experts");
  return run_em(data, std::move(init_experts), std::move(init_priors), config,
                length_scale_bounds(data));
}

double selection_penalty(int num_experts, int dim) {
  return num_experts * (dim * (dim + 1) / 2.0 + dim + 1.0);
}

double log_bayes_factor(double q_g, double psi_g, double q_prev, double psi_prev,
                        std::size_t num_patients) {
  const double ln_n = std::log(static_cast<double>(num_patients));
  return (q_g - 0.5 * psi_g * ln_n) - (q_prev - 0.5 * psi_prev * ln_n);
}

Selection select_num_experts(std::span<const ObservationSet> data, const SelectionConfig& selection,
                             const EmConfig& config, std::uint64_t seed) {
  const int dim = data_dim(data);
  if (selection.max_experts < 1) fail(ErrorCode::InvalidArgument, "G_max must be at least 1");
  if (!(selection.bayes_threshold > 0.0)) fail(ErrorCode::InvalidArgument, "Bayes threshold must be positive");
  const int g_max = std::min<int>(selection.max_experts, static_cast<int>(data.size()));
  const double log_threshold = std::log(selection.bayes_threshold);

  Selection out;
  out.trace.threshold = selection.bayes_threshold;
  for (int g = 1; g <= g_max; ++g) {
    SelectionRow row;
    row.num_experts = g;
    row.penalty = selection_penalty(g, dim);
    EmResult fit;
    try {
      fit = em_fit(data, g, config, mix_seed(seed, static_cast<std::uint64_t>(1000 + g)));
    } catch (const Error& e) {
      // more experts than the data can populate: the simpler model stands
      if (g == 1 || e.code() != ErrorCode::DegenerateCluster) throw;
      out.trace.rows.push_back(row);
      break;
    }
    row.q_star = fit.state.log_likelihood;
    if (g > 1) {
      const SelectionRow& prev = out.trace.rows.back();
      row.log_bayes_factor = log_bayes_factor(row.q_star, row.penalty, prev.q_star, prev.penalty, data.size());
    }
    out.trace.rows.push_back(row);
    if (g > 1 && !(row.log_bayes_factor >= log_threshold)) break;
    out.fit = std::move(fit);
    out.trace.selected = g;
  }
  return out;
}

}  // namespace mogp
