#include "mogp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mogp/error.hpp"

namespace mogp {

double kernel_eval(const KernelParams& kernel, double t, double u) {
  const double d = t - u;
  const double w2 = kernel.amplitude * kernel.amplitude;
  return w2 * std::exp(-d * d / (2.0 * kernel.length_scale * kernel.length_scale));
}

// ---------------------------------------------------------------------------
// CorrelationFactor

CorrelationFactor::CorrelationFactor(int dim, Eigen::VectorXd entries)
    : dim_(dim), entries_(std::move(entries)) {
  if (dim_ <= 0) fail(ErrorCode::InvalidArgument, "correlation factor needs dim >= 1");
  if (entries_.size() != packed_size(dim_)) {
    fail(ErrorCode::InvalidArgument, "correlation factor expects " +
                                         std::to_string(packed_size(dim_)) + " entries, got " +
                                         std::to_string(entries_.size()));
  }
  int idx = 0;
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j <= i; ++j, ++idx) {
      if (!std::isfinite(entries_[idx])) fail(ErrorCode::InvalidArgument, "non-finite L entry");
      if (i == j && !(entries_[idx] > 0.0)) {
        fail(ErrorCode::InvalidArgument, "correlation factor diagonal must be positive");
      }
    }
  }
}

CorrelationFactor CorrelationFactor::from_lower(const Eigen::MatrixXd& lower) {
  const int d = static_cast<int>(lower.rows());
  Eigen::VectorXd e(packed_size(d));
  int idx = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) e[idx++] = lower(i, j);
  return {d, std::move(e)};
}

CorrelationFactor CorrelationFactor::diagonal(const Eigen::VectorXd& scales) {
  return from_lower(scales.asDiagonal().toDenseMatrix());
}

CorrelationFactor CorrelationFactor::from_covariance(const Eigen::MatrixXd& covariance) {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::NonPositiveDefinite, "covariance is not positive definite");
  }
  return from_lower(llt.matrixL());
}

Eigen::MatrixXd CorrelationFactor::lower() const {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dim_, dim_);
  int idx = 0;
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j <= i; ++j) l(i, j) = entries_[idx++];
  return l;
}

Eigen::MatrixXd CorrelationFactor::covariance() const {
  const Eigen::MatrixXd l = lower();
  return l * l.transpose();
}

// ---------------------------------------------------------------------------
// Parameter sets

void StationaryParams::validate() const {
  if (mean.size() == 0) fail(ErrorCode::InvalidArgument, "expert has zero streams");
  if (corr.dim() != dim()) fail(ErrorCode::InvalidArgument, "mean/correlation dimension mismatch");
  if (!(kernel.length_scale > 0.0) || !std::isfinite(kernel.length_scale)) {
    fail(ErrorCode::InvalidArgument, "length scale must be positive");
  }
  if (!(kernel.amplitude > 0.0) || !std::isfinite(kernel.amplitude)) {
    fail(ErrorCode::InvalidArgument, "kernel amplitude must be positive");
  }
  if (!mean.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite mean");
}

int parameter_count(const StationaryParams& params, bool free_amplitude) {
  const int d = params.dim();
  return packed_size(d) + d + 1 + (free_amplitude ? 1 : 0);
}

void EpochParams::validate() const {
  if (epochs.empty()) fail(ErrorCode::InvalidArgument, "epoch expert needs at least one epoch");
  if (!(epoch_duration > 0.0)) fail(ErrorCode::InvalidArgument, "epoch duration must be positive");
  for (const auto& e : epochs) {
    e.validate();
    if (e.dim() != dim()) fail(ErrorCode::InvalidArgument, "epoch blocks disagree on dimension");
  }
}

int parameter_count(const EpochParams& params, bool free_amplitude) {
  int total = 0;
  for (const auto& e : params.epochs) total += parameter_count(e, free_amplitude);
  return total;
}

// ---------------------------------------------------------------------------
// ObservationSet

ObservationSet::ObservationSet(int dim) : dim_(dim) {
  if (dim_ <= 0) fail(ErrorCode::InvalidArgument, "observation set needs dim >= 1");
}

ObservationSet::ObservationSet(int dim, std::vector<Sample> samples)
    : dim_(dim), samples_(std::move(samples)) {
  if (dim_ <= 0) fail(ErrorCode::InvalidArgument, "observation set needs dim >= 1");
  for (const auto& s : samples_) {
    if (s.stream < 0 || s.stream >= dim_) {
      fail(ErrorCode::InvalidArgument, "stream index " + std::to_string(s.stream) +
                                           " outside [0, " + std::to_string(dim_) + ")");
    }
    if (!std::isfinite(s.time) || s.time < 0.0) {
      fail(ErrorCode::InvalidArgument, "sample times must be finite and non-negative");
    }
    if (!std::isfinite(s.value)) fail(ErrorCode::InvalidArgument, "sample value is not finite");
  }
  std::stable_sort(samples_.begin(), samples_.end(), [](const Sample& a, const Sample& b) {
    return a.time < b.time || (a.time == b.time && a.stream < b.stream);
  });
}

ObservationSet ObservationSet::up_to(double t) const {
  ObservationSet out(dim_);
  for (const auto& s : samples_) {
    if (s.time > t) break;
    out.samples_.push_back(s);
  }
  return out;
}

ObservationSet ObservationSet::window_from(double start) const {
  ObservationSet out(dim_);
  for (const auto& s : samples_) {
    if (s.time >= start) out.samples_.push_back({s.stream, s.time - start, s.value});
  }
  return out;
}

std::optional<double> ObservationSet::last_time() const {
  if (samples_.empty()) return std::nullopt;
  return samples_.back().time;
}

// ---------------------------------------------------------------------------
// Covariance and likelihood

namespace {

std::vector<SampleTime> points_of(const ObservationSet& obs) {
  std::vector<SampleTime> pts;
  pts.reserve(obs.size());
  for (const auto& s : obs.samples()) pts.push_back({s.stream, s.time});
  return pts;
}

Eigen::MatrixXd raw_covariance(const StationaryParams& params, std::span<const SampleTime> pts) {
  const auto m = static_cast<Eigen::Index>(pts.size());
  const Eigen::MatrixXd sigma = params.corr.covariance();
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    if (pts[a].stream < 0 || pts[a].stream >= params.dim()) {
      fail(ErrorCode::InvalidArgument, "sample stream index outside expert dimension");
    }
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v =
          sigma(pts[a].stream, pts[b].stream) * kernel_eval(params.kernel, pts[a].time, pts[b].time);
      k(a, b) = v;
      k(b, a) = v;
    }
  }
  return k;
}

double gaussian_log_density(const CovarianceFactor& f, const Eigen::VectorXd& residual) {
  const Eigen::VectorXd alpha = f.llt.solve(residual);
  const auto& lmat = f.llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < lmat.rows(); ++i) logdet += std::log(lmat(i, i));
  const double m = static_cast<double>(residual.size());
  return -0.5 * residual.dot(alpha) - logdet - 0.5 * m * std::log(2.0 * std::numbers::pi);
}

}  // namespace

CovarianceFactor factorize_matrix(Eigen::MatrixXd raw, const JitterPolicy& jitter) {
  CovarianceFactor out;
  const auto m = raw.rows();
  if (m == 0) {
    out.jitter = jitter.initial;
    return out;
  }
  for (double eps = jitter.initial; eps <= jitter.max * (1.0 + 1e-12); eps *= jitter.factor) {
    out.matrix = raw;
    out.matrix.diagonal().array() += eps;
    out.llt.compute(out.matrix);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = eps;
      return out;
    }
    if (eps <= 0.0 || jitter.factor <= 1.0) break;
  }
  std::ostringstream msg;
  msg << "covariance over " << m << " samples not factorizable with jitter up to " << jitter.max;
  fail(ErrorCode::NonPositiveDefinite, msg.str());
}

CovarianceFactor factorize_covariance(const StationaryParams& params,
                                      std::span<const SampleTime> points,
                                      const JitterPolicy& jitter) {
  return factorize_matrix(raw_covariance(params, points), jitter);
}

Eigen::MatrixXd assemble_covariance(const StationaryParams& params, const ObservationSet& obs,
                                    const JitterPolicy& jitter) {
  if (obs.empty()) return Eigen::MatrixXd(0, 0);
  const auto pts = points_of(obs);
  return factorize_covariance(params, pts, jitter).matrix;
}

double log_marginal_likelihood(const StationaryParams& params, const ObservationSet& obs,
                               const JitterPolicy& jitter) {
  if (obs.empty()) return 0.0;
  const auto pts = points_of(obs);
  const CovarianceFactor f = factorize_covariance(params, pts, jitter);
  Eigen::VectorXd r(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t a = 0; a < obs.size(); ++a) r[a] = obs[a].value - params.mean[obs[a].stream];
  return gaussian_log_density(f, r);
}

int epoch_index(double t, double epoch_duration, int offset) {
  return static_cast<int>(std::floor(t / epoch_duration)) + offset;
}

std::vector<ObservationSet> split_by_epoch(const ObservationSet& obs, double epoch_duration,
                                           int num_epochs, int epoch_offset) {
  if (epoch_offset < 1 || epoch_offset > num_epochs) {
    fail(ErrorCode::InvalidArgument, "epoch offset " + std::to_string(epoch_offset) +
                                         " outside [1, " + std::to_string(num_epochs) + "]");
  }
  std::vector<std::vector<Sample>> blocks(static_cast<std::size_t>(num_epochs));
  for (const auto& s : obs.samples()) {
    const int k = epoch_index(s.time, epoch_duration, epoch_offset);
    if (k > num_epochs) {
      std::ostringstream msg;
      msg << "sample at t=" << s.time << " maps to epoch " << k << " > " << num_epochs
          << " for offset " << epoch_offset;
      fail(ErrorCode::EpochOverflow, msg.str());
    }
    blocks[static_cast<std::size_t>(k - 1)].push_back(s);
  }
  std::vector<ObservationSet> out;
  out.reserve(blocks.size());
  for (auto& b : blocks) out.emplace_back(obs.dim(), std::move(b));
  return out;
}

double log_marginal_likelihood(const EpochParams& params, const ObservationSet& obs,
                               int epoch_offset, const JitterPolicy& jitter) {
  if (obs.empty()) return 0.0;
  const auto blocks =
      split_by_epoch(obs, params.epoch_duration, params.num_epochs(), epoch_offset);
  double total = 0.0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    total += log_marginal_likelihood(params.epochs[k], blocks[k], jitter);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

void draw_block(const StationaryParams& params, std::span<const SampleTime> pts,
                std::mt19937_64& rng, const JitterPolicy& jitter, std::vector<Sample>& out) {
  if (pts.empty()) return;
  const CovarianceFactor f = factorize_covariance(params, pts, jitter);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(static_cast<Eigen::Index>(pts.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  const Eigen::VectorXd x = f.llt.matrixL() * z;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    out.push_back({pts[a].stream, pts[a].time,
                   params.mean[pts[a].stream] + x[static_cast<Eigen::Index>(a)]});
  }
}

}  // namespace

ObservationSet sample_path(const StationaryParams& params, std::span<const SampleTime> times,
                           std::uint64_t seed, const JitterPolicy& jitter) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  out.reserve(times.size());
  draw_block(params, times, rng, jitter, out);
  return ObservationSet(params.dim(), std::move(out));
}

ObservationSet sample_path(const EpochParams& params, std::span<const SampleTime> times,
                           int epoch_offset, std::uint64_t seed, const JitterPolicy& jitter) {
  params.validate();
  const int num_epochs = params.num_epochs();
  if (epoch_offset < 1 || epoch_offset > num_epochs) {
    fail(ErrorCode::InvalidArgument, "epoch offset outside [1, K]");
  }
  std::vector<std::vector<SampleTime>> blocks(static_cast<std::size_t>(num_epochs));
  for (const auto& p : times) {
    if (!std::isfinite(p.time) || p.time < 0.0) {
      fail(ErrorCode::InvalidArgument, "sample times must be finite and non-negative");
    }
    const int k = epoch_index(p.time, params.epoch_duration, epoch_offset);
    if (k > num_epochs) fail(ErrorCode::EpochOverflow, "requested time beyond last epoch");
    blocks[static_cast<std::size_t>(k - 1)].push_back(p);
  }
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  out.reserve(times.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    draw_block(params.epochs[k], blocks[k], rng, jitter, out);
  }
  return ObservationSet(params.dim(), std::move(out));
}

}  // namespace mogp
