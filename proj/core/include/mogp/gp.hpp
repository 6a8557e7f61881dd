#pragma once

// Exact multitask Gaussian-process machinery over irregularly sampled
// multivariate streams. The covariance between sample a (stream i_a, time t_a)
// and sample b is separable: Sigma(i_a, i_b) * k(t_a, t_b), with Sigma = L L^T
// built from a packed lower-triangular factor and k a squared-exponential
// kernel shared by all streams.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mogp {

struct KernelParams {
  double length_scale = 1.0;  // hours
  double amplitude = 1.0;     // omega; the kernel scales with omega^2
};

/// omega^2 * exp(-(t - u)^2 / (2 l^2))
double kernel_eval(const KernelParams& kernel, double t, double u);

constexpr int packed_size(int dim) { return dim * (dim + 1) / 2; }

/// Lower-triangular factor L of the stream correlation matrix, stored as
/// row-major packed entries (L(0,0), L(1,0), L(1,1), L(2,0), ...).
/// Diagonal entries are strictly positive.
class CorrelationFactor {
 public:
  CorrelationFactor() = default;
  CorrelationFactor(int dim, Eigen::VectorXd entries);

  static CorrelationFactor from_lower(const Eigen::MatrixXd& lower);
  static CorrelationFactor diagonal(const Eigen::VectorXd& scales);
  /// Cholesky factor of a symmetric positive definite covariance.
  static CorrelationFactor from_covariance(const Eigen::MatrixXd& covariance);

  int dim() const { return dim_; }
  const Eigen::VectorXd& entries() const { return entries_; }
  Eigen::MatrixXd lower() const;
  Eigen::MatrixXd covariance() const;

 private:
  int dim_ = 0;
  Eigen::VectorXd entries_;
};

/// Parameters of one stationary multitask GP: constant mean per stream,
/// shared kernel, stream correlation factor.
struct StationaryParams {
  Eigen::VectorXd mean;
  KernelParams kernel;
  CorrelationFactor corr;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

int parameter_count(const StationaryParams& params, bool free_amplitude = false);

/// Piecewise-stationary GP: epoch k (1-based) covers [(k - kbar) T, (k - kbar + 1) T)
/// of a stay whose first epoch is kbar. Samples in different epochs are independent.
struct EpochParams {
  std::vector<StationaryParams> epochs;
  double epoch_duration = 24.0;

  int num_epochs() const { return static_cast<int>(epochs.size()); }
  int dim() const { return epochs.empty() ? 0 : epochs.front().dim(); }
  void validate() const;
};

int parameter_count(const EpochParams& params, bool free_amplitude = false);

struct SampleTime {
  int stream = 0;
  double time = 0.0;
};

struct Sample {
  int stream = 0;  // zero-based stream index
  double time = 0.0;
  double value = 0.0;
};

/// A patient's observations, kept sorted by (time, stream). Stream indices
/// are zero-based and below dim(); times are finite and non-negative.
class ObservationSet {
 public:
  ObservationSet() = default;
  explicit ObservationSet(int dim);
  ObservationSet(int dim, std::vector<Sample> samples);

  int dim() const { return dim_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::span<const Sample> samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  /// Samples with time <= t.
  ObservationSet up_to(double t) const;
  /// Samples with time >= start, shifted so that `start` maps to zero.
  ObservationSet window_from(double start) const;
  std::optional<double> last_time() const;

 private:
  int dim_ = 0;
  std::vector<Sample> samples_;
};

/// Diagonal jitter added for numerical positive definiteness, escalated by
/// `factor` on Cholesky failure until `max`.
struct JitterPolicy {
  double initial = 1e-6;
  double max = 1e-2;
  double factor = 10.0;
};

struct CovarianceFactor {
  Eigen::MatrixXd matrix;  // assembled covariance including jitter
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

/// Covariance over (stream, time) pairs plus the smallest ladder jitter that
/// factorizes. Throws NonPositiveDefinite when the ladder is exhausted.
CovarianceFactor factorize_covariance(const StationaryParams& params,
                                      std::span<const SampleTime> points,
                                      const JitterPolicy& jitter = {});

/// Same ladder applied to an already assembled covariance.
CovarianceFactor factorize_matrix(Eigen::MatrixXd raw, const JitterPolicy& jitter = {});

Eigen::MatrixXd assemble_covariance(const StationaryParams& params, const ObservationSet& obs,
                                    const JitterPolicy& jitter = {});

double log_marginal_likelihood(const StationaryParams& params, const ObservationSet& obs,
                               const JitterPolicy& jitter = {});

/// Epoch index (1-based) of time t for a stay starting in epoch `offset`.
/// Boundaries belong to the later epoch.
int epoch_index(double t, double epoch_duration, int offset);

/// Sum of independent per-epoch block log densities. Throws EpochOverflow when
/// a sample maps past the last epoch for the given offset.
double log_marginal_likelihood(const EpochParams& params, const ObservationSet& obs,
                               int epoch_offset, const JitterPolicy& jitter = {});

/// Splits an observation set into per-epoch blocks (index 0 = epoch 1) for a
/// given offset. Throws EpochOverflow.
std::vector<ObservationSet> split_by_epoch(const ObservationSet& obs, double epoch_duration,
                                           int num_epochs, int epoch_offset);

/// Exact joint draw at the requested points. Deterministic per seed.
ObservationSet sample_path(const StationaryParams& params, std::span<const SampleTime> times,
                           std::uint64_t seed, const JitterPolicy& jitter = {});
ObservationSet sample_path(const EpochParams& params, std::span<const SampleTime> times,
                           int epoch_offset, std::uint64_t seed, const JitterPolicy& jitter = {});

// ---------------------------------------------------------------------------
// Maximum-likelihood fitting

struct LengthScaleBounds {
  double lower = 1e-3;
  double upper = 1e3;
};

/// [0.1 * smallest positive gap, 10 * longest time span] over the sets.
LengthScaleBounds length_scale_bounds(std::span<const ObservationSet> sets);

struct FitConfig {
  int restarts = 5;
  int max_iterations = 200;
  double rel_tolerance = 1e-6;
  std::uint64_t seed = 0;
  bool fit_amplitude = false;
  std::optional<LengthScaleBounds> bounds;
  JitterPolicy jitter;
};

struct FitResult {
  StationaryParams params;
  double log_likelihood = 0.0;          // weighted total at the returned params
  double initial_log_likelihood = 0.0;  // weighted total at init
};

/// sum_n w_n log N(x_n; mean, K_n). Empty weights mean unit weights.
double weighted_log_likelihood(const StationaryParams& params, std::span<const ObservationSet> sets,
                               std::span<const double> weights = {},
                               const JitterPolicy& jitter = {});

/// Responsibility-weighted generalized least-squares mean for fixed kernel
/// and correlation factor.
Eigen::VectorXd gls_mean(const StationaryParams& params, std::span<const ObservationSet> sets,
                         std::span<const double> weights = {}, const JitterPolicy& jitter = {});

/// Multi-start quasi-Newton ascent on log length-scale and the correlation
/// factor (log diagonal), with the mean profiled out in closed form. The
/// returned likelihood is never below the initial one.
/// Throws DegenerateData when every set is empty or a stream has no spread.
FitResult fit_mle(std::span<const ObservationSet> sets, const StationaryParams& init,
                  const FitConfig& config, std::span<const double> weights = {});

struct EpochFitResult {
  EpochParams params;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
};

/// Fits each epoch block independently from its bucket of aligned fragments
/// (buckets[k] holds fragments of epoch k + 1). Empty buckets keep init.
EpochFitResult fit_mle_epochs(std::span<const std::vector<ObservationSet>> buckets,
                              const EpochParams& init, const FitConfig& config);

}  // namespace mogp
