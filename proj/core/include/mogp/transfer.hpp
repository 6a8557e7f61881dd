#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mogp/cohort.hpp"
#include "mogp/gp.hpp"

namespace mogp {

/// Linear map from encoded admission features to subtype responsibilities.
/// Raw predictions are clipped to [0, 1] and renormalized; an all-zero row
/// becomes uniform.
struct ResponsibilityModel {
  Eigen::VectorXd intercept;  // G
  Eigen::MatrixXd weights;    // G x S, zero for excluded (constant) columns
  std::vector<bool> active;   // S, false for columns constant in training
  bool ridge = false;         // rank-deficient design, ridge fallback used

  int num_experts() const { return static_cast<int>(intercept.size()); }
  int num_features() const { return static_cast<int>(weights.cols()); }
  Eigen::VectorXd raw(const Eigen::VectorXd& features) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& features) const;
};

inline constexpr double kRidgeLambda = 1e-6;

/// Least squares with intercept, one column of responsibilities at a time.
ResponsibilityModel fit_responsibilities(const Eigen::MatrixXd& features,
                                         const Eigen::MatrixXd& responsibilities);

struct FeatureImportance {
  int rank = 0;  // 1-based
  std::string feature;
  double coefficient = 0.0;  // sum over experts of |w|
};

/// Encoded columns ordered by aggregated absolute coefficient.
std::vector<FeatureImportance> feature_importance(const ResponsibilityModel& model,
                                                  const std::vector<std::string>& column_names);

struct DeterioratingExpertSet {
  std::vector<EpochParams> experts;
  Eigen::VectorXd class_prior;  // P(V = 1 | Z = z)
  Eigen::VectorXd epoch_prior;  // f_k over kbar = 1..K
  std::vector<std::size_t> subset_sizes;
};

struct SelfTaughtConfig {
  double epoch_duration = 24.0;
  int num_epochs = 6;
  FitConfig fit;
  /// Below this many deteriorating patients the initial-epoch law is uniform.
  std::size_t min_patients_for_epoch_prior = 20;
  /// Below this much responsibility mass the class prior is the cohort rate.
  double min_mass_for_class_prior = 10.0;
};

struct SelfTaughtResult {
  DeterioratingExpertSet set;
  std::vector<std::string> warnings;
};

/// Initial epoch implied by the stay length, clamped to [1, K].
int implied_initial_epoch(double end_time, double epoch_duration, int num_epochs);

/// Empirical f_k with add-one smoothing; uniform below `min_patients`.
Eigen::VectorXd estimate_epoch_prior(std::span<const PatientRecord> deteriorating,
                                     double epoch_duration, int num_epochs,
                                     std::size_t min_patients);

/// sum_n beta_z(y_n) v_n / sum_n beta_z(y_n) over all labeled records, or the
/// cohort rate where the mass is below `min_mass`.
Eigen::VectorXd estimate_class_prior(std::span<const PatientRecord> labeled,
                                     const ResponsibilityModel& rmodel, double min_mass);

/// Draws c_{n,z} ~ Bernoulli(beta_z(y_n)) and fits expert z's epoch model on
/// the aligned fragments of its subset, starting from the stable expert z.
/// Expert z uses fit seed `config.fit.seed + 1000003 z`.
SelfTaughtResult self_taught_fit(std::span<const PatientRecord> deteriorating,
                                 const ResponsibilityModel& rmodel,
                                 std::span<const StationaryParams> stable_experts,
                                 const SelfTaughtConfig& config, std::uint64_t seed);

}  // namespace mogp
