#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <ceres/ceres.h>

#include "mogp/error.hpp"
#include "mogp/gp.hpp"

namespace mogp {

LengthScaleBounds length_scale_bounds(std::span<const ObservationSet> sets) {
  double min_gap = std::numeric_limits<double>::infinity();
  double span = 0.0;
  for (const auto& s : sets) {
    if (s.empty()) continue;
    span = std::max(span, s.samples().back().time - s.samples().front().time);
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double gap = s[i].time - s[i - 1].time;
      if (gap > 0.0) min_gap = std::min(min_gap, gap);
    }
  }
  LengthScaleBounds b;
  if (std::isfinite(min_gap)) b.lower = 0.1 * min_gap;
  if (span > 0.0) b.upper = 10.0 * span;
  if (b.upper <= b.lower) b.upper = b.lower * 100.0;
  return b;
}

namespace {

struct WeightedSet {
  const ObservationSet* obs;
  double weight;
};

std::vector<WeightedSet> active_sets(std::span<const ObservationSet> sets,
                                     std::span<const double> weights) {
  if (!weights.empty() && weights.size() != sets.size()) {
    fail(ErrorCode::InvalidArgument, "weights and observation sets differ in length");
  }
  std::vector<WeightedSet> out;
  for (std::size_t n = 0; n < sets.size(); ++n) {
    const double w = weights.empty() ? 1.0 : weights[n];
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::InvalidArgument, "invalid weight");
    if (w > 0.0 && !sets[n].empty()) out.push_back({&sets[n], w});
  }
  return out;
}

Eigen::MatrixXd selection_matrix(const ObservationSet& obs, int dim) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), dim);
  for (std::size_t i = 0; i < obs.size(); ++i) a(static_cast<Eigen::Index>(i), obs[i].stream) = 1.0;
  return a;
}

Eigen::VectorXd values_of(const ObservationSet& obs) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) x[static_cast<Eigen::Index>(i)] = obs[i].value;
  return x;
}

double log_density(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& r,
                   Eigen::VectorXd* alpha_out) {
  Eigen::VectorXd alpha = llt.solve(r);
  const auto& l = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
  const double ll = -0.5 * r.dot(alpha) - logdet -
                    0.5 * static_cast<double>(r.size()) * std::log(2.0 * std::numbers::pi);
  if (alpha_out) *alpha_out = std::move(alpha);
  return ll;
}

/// Time differences and values of one weighted set, computed once per fit.
struct Prepared {
  double weight;
  std::vector<int> stream;
  Eigen::VectorXd values;
  Eigen::MatrixXd dt2;  // lower triangle used
  Eigen::MatrixXd selection;
};

std::vector<Prepared> prepare(std::span<const WeightedSet> sets, int dim) {
  std::vector<Prepared> out;
  out.reserve(sets.size());
  for (const auto& ws : sets) {
    const ObservationSet& obs = *ws.obs;
    const auto m = static_cast<Eigen::Index>(obs.size());
    Prepared p{ws.weight, {}, values_of(obs), Eigen::MatrixXd(m, m), selection_matrix(obs, dim)};
    p.stream.reserve(obs.size());
    for (Eigen::Index i = 0; i < m; ++i) {
      p.stream.push_back(obs[static_cast<std::size_t>(i)].stream);
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double dt = obs[static_cast<std::size_t>(i)].time - obs[static_cast<std::size_t>(j)].time;
        p.dt2(i, j) = dt * dt;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

struct Block {
  Eigen::MatrixXd kern;  // amplitude-scaled temporal kernel, lower triangle
  CovarianceFactor factor;
};

/// Per-set factorizations plus the profiled GLS mean.
struct Profile {
  std::vector<Block> blocks;
  Eigen::VectorXd mean;
};

Profile profile(const StationaryParams& params, std::span<const Prepared> sets,
                const JitterPolicy& jitter) {
  const int d = params.dim();
  const Eigen::MatrixXd sigma = params.corr.covariance();
  const double w2 = params.kernel.amplitude * params.kernel.amplitude;
  const double inv = 1.0 / (2.0 * params.kernel.length_scale * params.kernel.length_scale);
  Profile p;
  p.blocks.reserve(sets.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (const auto& ps : sets) {
    const auto m = ps.values.size();
    Block blk;
    blk.kern.resize(m, m);
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double e = w2 * std::exp(-ps.dt2(i, j) * inv);
        blk.kern(i, j) = e;
        k(i, j) = sigma(ps.stream[static_cast<std::size_t>(i)], ps.stream[static_cast<std::size_t>(j)]) * e;
        k(j, i) = k(i, j);
      }
    }
    blk.factor = factorize_matrix(std::move(k), jitter);
    const Eigen::MatrixXd kinv_a = blk.factor.llt.solve(ps.selection);
    h.noalias() += ps.weight * (ps.selection.transpose() * kinv_a);
    b.noalias() += ps.weight * (kinv_a.transpose() * ps.values);
    p.blocks.push_back(std::move(blk));
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 0.0) {
    fail(ErrorCode::DegenerateData, "mean is not identifiable from the weighted samples");
  }
  p.mean = ldlt.solve(b);
  return p;
}

/// Unconstrained coordinates: [log l, packed L (log on the diagonal), (log omega)].
class ParamLayout {
 public:
  ParamLayout(int dim, bool fit_amplitude) : dim_(dim), fit_amplitude_(fit_amplitude) {}

  int size() const { return 1 + packed_size(dim_) + (fit_amplitude_ ? 1 : 0); }

  std::vector<double> encode(const StationaryParams& p) const {
    std::vector<double> u(static_cast<std::size_t>(size()));
    u[0] = std::log(p.kernel.length_scale);
    int idx = 0;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j <= i; ++j, ++idx) {
        const double v = p.corr.entries()[idx];
        u[static_cast<std::size_t>(1 + idx)] = (i == j) ? std::log(v) : v;
      }
    if (fit_amplitude_) u.back() = std::log(p.kernel.amplitude);
    return u;
  }

  StationaryParams decode(const double* u, const StationaryParams& base,
                          const LengthScaleBounds& bounds) const {
    StationaryParams p = base;
    p.kernel.length_scale = std::clamp(std::exp(u[0]), bounds.lower, bounds.upper);
    Eigen::VectorXd e(packed_size(dim_));
    int idx = 0;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j <= i; ++j, ++idx) e[idx] = (i == j) ? std::exp(u[1 + idx]) : u[1 + idx];
    p.corr = CorrelationFactor(dim_, std::move(e));
    if (fit_amplitude_) p.kernel.amplitude = std::exp(u[size() - 1]);
    return p;
  }

  bool fit_amplitude() const { return fit_amplitude_; }

 private:
  int dim_;
  bool fit_amplitude_;
};

/// Negative responsibility-weighted log likelihood per unit weight, with the
/// mean profiled out. Minimized by Ceres.
class NegativeLogLikelihood final : public ceres::FirstOrderFunction {
 public:
  NegativeLogLikelihood(std::vector<Prepared> sets, StationaryParams base, ParamLayout layout,
                        LengthScaleBounds bounds, JitterPolicy jitter)
      : sets_(std::move(sets)),
        base_(std::move(base)),
        layout_(layout),
        bounds_(bounds),
        jitter_(jitter) {
    for (const auto& s : sets_) total_weight_ += s.weight;
  }

  int NumParameters() const override { return layout_.size(); }

  bool Evaluate(const double* u, double* cost, double* gradient) const override {
    for (int i = 0; i < layout_.size(); ++i) {
      if (!std::isfinite(u[i]) || std::abs(u[i]) > 700.0) return false;
    }
    try {
      const StationaryParams p = layout_.decode(u, base_, bounds_);
      double value = 0.0;
      Eigen::VectorXd grad;
      evaluate(p, std::exp(u[0]), value, gradient ? &grad : nullptr);
      if (!std::isfinite(value)) return false;
      *cost = -value / total_weight_;
      if (gradient) {
        for (int i = 0; i < layout_.size(); ++i) gradient[i] = -grad[i] / total_weight_;
      }
      return true;
    } catch (const Error&) {
      return false;
    }
  }

  /// Weighted log likelihood (with profiled mean) and its gradient in the
  /// unconstrained coordinates.
  void evaluate(const StationaryParams& p, double raw_length_scale, double& value,
                Eigen::VectorXd* grad, Eigen::VectorXd* mean = nullptr) const {
    const int d = p.dim();
    const Profile prof = profile(p, sets_, jitter_);
    if (mean) *mean = prof.mean;
    const Eigen::MatrixXd lower = p.corr.lower();
    const Eigen::MatrixXd sigma = lower * lower.transpose();
    const double ell = p.kernel.length_scale;

    Eigen::MatrixXd c_sigma = Eigen::MatrixXd::Zero(d, d);
    double g_ell = 0.0;
    double g_amp = 0.0;
    value = 0.0;
    for (std::size_t n = 0; n < sets_.size(); ++n) {
      const Prepared& ps = sets_[n];
      const Block& blk = prof.blocks[n];
      const double w = ps.weight;
      const auto m = ps.values.size();
      Eigen::VectorXd r(m);
      for (Eigen::Index a = 0; a < m; ++a) r[a] = ps.values[a] - prof.mean[ps.stream[static_cast<std::size_t>(a)]];
      Eigen::VectorXd alpha;
      value += w * log_density(blk.factor.llt, r, &alpha);
      if (!grad) continue;

      Eigen::MatrixXd wmat = -blk.factor.llt.solve(Eigen::MatrixXd::Identity(m, m));
      wmat.noalias() += alpha * alpha.transpose();
      for (Eigen::Index a = 0; a < m; ++a) {
        const int sa = ps.stream[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b <= a; ++b) {
          const int sb = ps.stream[static_cast<std::size_t>(b)];
          const double wk = w * wmat(a, b) * blk.kern(a, b);
          const double mult = a == b ? 1.0 : 2.0;
          c_sigma(sa, sb) += 0.5 * mult * wk;
          c_sigma(sb, sa) += 0.5 * mult * wk;
          const double sk = mult * sigma(sa, sb) * wk;
          g_ell += sk * ps.dt2(a, b) / (ell * ell);
          g_amp += 2.0 * sk;
        }
      }
    }
    if (!grad) return;

    grad->setZero(layout_.size());
    const bool inside = raw_length_scale >= bounds_.lower && raw_length_scale <= bounds_.upper;
    (*grad)[0] = inside ? 0.5 * g_ell : 0.0;
    const Eigen::MatrixXd dl = c_sigma * lower;
    int idx = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j, ++idx) {
        (*grad)[1 + idx] = (i == j) ? dl(i, j) * lower(i, j) : dl(i, j);
      }
    if (layout_.fit_amplitude()) (*grad)[layout_.size() - 1] = 0.5 * g_amp;
  }

 private:
  std::vector<Prepared> sets_;
  StationaryParams base_;
  ParamLayout layout_;
  LengthScaleBounds bounds_;
  JitterPolicy jitter_;
  double total_weight_ = 0.0;
};

void check_spread(std::span<const WeightedSet> sets, int dim) {
  for (int s = 0; s < dim; ++s) {
    std::size_t count = 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& ws : sets) {
      for (const auto& x : ws.obs->samples()) {
        if (x.stream != s) continue;
        ++count;
        lo = std::min(lo, x.value);
        hi = std::max(hi, x.value);
      }
    }
    if (count == 0) {
      fail(ErrorCode::DegenerateData, "stream " + std::to_string(s) + " has no samples");
    }
    if (!(hi > lo)) {
      fail(ErrorCode::DegenerateData, "stream " + std::to_string(s) + " has zero variance");
    }
  }
}

double total_log_likelihood(const StationaryParams& p, std::span<const WeightedSet> sets,
                            const JitterPolicy& jitter) {
  double total = 0.0;
  for (const auto& ws : sets) total += ws.weight * log_marginal_likelihood(p, *ws.obs, jitter);
  return total;
}

}  // namespace

double weighted_log_likelihood(const StationaryParams& params, std::span<const ObservationSet> sets,
                               std::span<const double> weights, const JitterPolicy& jitter) {
  return total_log_likelihood(params, active_sets(sets, weights), jitter);
}

Eigen::VectorXd gls_mean(const StationaryParams& params, std::span<const ObservationSet> sets,
                         std::span<const double> weights, const JitterPolicy& jitter) {
  const auto active = active_sets(sets, weights);
  if (active.empty()) fail(ErrorCode::DegenerateData, "no weighted samples");
  return profile(params, prepare(active, params.dim()), jitter).mean;
}

FitResult fit_mle(std::span<const ObservationSet> sets, const StationaryParams& init,
                  const FitConfig& config, std::span<const double> weights) {
  init.validate();
  const auto active = active_sets(sets, weights);
  if (active.empty()) fail(ErrorCode::DegenerateData, "all observation sets are empty");
  for (const auto& ws : active) {
    if (ws.obs->dim() != init.dim()) {
      fail(ErrorCode::InvalidArgument, "observation set dimension differs from the expert");
    }
  }
  check_spread(active, init.dim());

  const LengthScaleBounds bounds = config.bounds.value_or(length_scale_bounds(sets));
  StationaryParams start = init;
  start.kernel.length_scale = std::clamp(start.kernel.length_scale, bounds.lower, bounds.upper);

  FitResult result;
  result.params = start;
  result.initial_log_likelihood = total_log_likelihood(start, active, config.jitter);
  result.log_likelihood = result.initial_log_likelihood;

  const ParamLayout layout(init.dim(), config.fit_amplitude);
  std::vector<Prepared> prepared = prepare(active, init.dim());
  auto* objective = new NegativeLogLikelihood(prepared, start, layout, bounds, config.jitter);
  const ceres::GradientProblem problem(objective);  // takes ownership

  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::BFGS;
  options.max_num_iterations = config.max_iterations;
  options.function_tolerance = config.rel_tolerance;
  options.logging_type = ceres::SILENT;
  options.minimizer_progress_to_stdout = false;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::vector<double> u0 = layout.encode(start);
  const int restarts = std::max(1, config.restarts);

  for (int r = 0; r < restarts; ++r) {
    std::vector<double> u = u0;
    if (r > 0) {
      u[0] += 0.7 * normal(rng);
      int idx = 0;
      for (int i = 0; i < init.dim(); ++i)
        for (int j = 0; j <= i; ++j, ++idx) {
          auto& v = u[static_cast<std::size_t>(1 + idx)];
          if (i == j) v += 0.3 * normal(rng);
          else v += 0.3 * std::exp(u0[static_cast<std::size_t>(1 + packed_size(i + 1) - 1)]) * normal(rng);
        }
      if (layout.fit_amplitude()) u.back() += 0.3 * normal(rng);
    }
    double probe = 0.0;
    if (r > 0 && !objective->Evaluate(u.data(), &probe, nullptr)) continue;

    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, u.data(), &summary);

    StationaryParams candidate;
    try {
      candidate = layout.decode(u.data(), start, bounds);
      double ll = 0.0;
      objective->evaluate(candidate, candidate.kernel.length_scale, ll, nullptr, &candidate.mean);
      if (std::isfinite(ll) && ll > result.log_likelihood) {
        result.params = std::move(candidate);
        result.log_likelihood = ll;
      }
    } catch (const Error&) {
      // restart landed somewhere unusable; keep the incumbent
    }
  }
  return result;
}

EpochFitResult fit_mle_epochs(std::span<const std::vector<ObservationSet>> buckets,
                              const EpochParams& init, const FitConfig& config) {
  init.validate();
  if (static_cast<int>(buckets.size()) != init.num_epochs()) {
    fail(ErrorCode::InvalidArgument, "bucket count differs from the number of epochs");
  }
  EpochFitResult out;
  out.params = init;
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    const bool any = std::any_of(buckets[k].begin(), buckets[k].end(),
                                 [](const ObservationSet& s) { return !s.empty(); });
    if (!any) continue;
    FitConfig cfg = config;
    cfg.seed = config.seed + 7919 * (k + 1);
    const FitResult r = fit_mle(buckets[k], init.epochs[k], cfg);
    out.params.epochs[k] = r.params;
    out.log_likelihood += r.log_likelihood;
    out.initial_log_likelihood += r.initial_log_likelihood;
  }
  return out;
}

}  // namespace mogp
