#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mogp/cohort.hpp"
#include "mogp/gp.hpp"
#include "mogp/transfer.hpp"

namespace mogp {

/// Pooled per-stream statistics of the stable training patients, used by the
/// instantaneous-threshold baseline.
struct StreamStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

struct TrainedModel {
  CohortSchema schema;
  std::vector<StationaryParams> stable;
  DeterioratingExpertSet deteriorating;
  ResponsibilityModel rmodel;
  double global_prior = 0.0;  // P(H1), the cohort ICU rate
  double epoch_duration = 24.0;
  int num_epochs = 6;
  StreamStats stream_stats;
  JitterPolicy jitter;

  int num_experts() const { return static_cast<int>(stable.size()); }
  int dim() const { return schema.dim(); }
  void validate() const;
};

/// P(kbar | obs) proportional to f_k(kbar) P(obs | Theta_1, kbar); offsets that
/// push a sample past epoch K are excluded. Empty obs returns f_k. Throws
/// AllOffsetsInvalid when no offset fits.
Eigen::VectorXd epoch_posterior(const EpochParams& expert, const Eigen::VectorXd& epoch_prior,
                                const ObservationSet& obs, const JitterPolicy& jitter = {});

struct ExpertRisk {
  double risk = 0.0;
  Eigen::VectorXd epoch_posterior;
  bool truncated = false;  // scored on the trailing K epochs only
};

/// Mixture over kbar of two-hypothesis Bayes posteriors for expert z. When the
/// stay is longer than K epochs both hypotheses see only the samples from the
/// start of the last K whole epochs on, rebased to time zero.
ExpertRisk expert_risk(const TrainedModel& model, int z, const ObservationSet& obs);

struct RiskPoint {
  double time = 0.0;
  double risk = 0.0;
  Eigen::VectorXd expert_risks;     // R_z
  Eigen::VectorXd epoch_posterior;  // responsibility-weighted over experts
};

/// R(t, y) = sum_z beta_z(y) R_z(t) / sum_z beta_z(y), with obs already cut at t.
RiskPoint personalized_risk(const TrainedModel& model, const Eigen::VectorXd& admission,
                            const ObservationSet& obs, double time);

struct RiskTrajectory {
  std::vector<RiskPoint> points;
  std::optional<double> threshold;
  std::optional<double> stopping_time;
};

struct ScoreOptions {
  std::optional<double> threshold;
  /// Also score on this clock grid (from 0 to the last sample), reusing the
  /// samples seen so far.
  std::optional<double> interval;
};

/// Scores at every distinct sample arrival time (and grid time, if asked).
/// An empty stream yields a single prior-only point at t = 0.
RiskTrajectory score_stream(const TrainedModel& model, const PatientRecord& patient,
                            const ScoreOptions& options = {});

/// Memoryless comparator: logistic of the largest |x - mean| / sd among the
/// samples arriving at each time; 0.5 when every sample sits at its mean.
RiskTrajectory baseline_trajectory(const StreamStats& stats, const PatientRecord& patient,
                                   const ScoreOptions& options = {});
double baseline_score(double max_abs_z);

std::optional<double> first_crossing(const std::vector<RiskPoint>& points, double threshold);

}  // namespace mogp
