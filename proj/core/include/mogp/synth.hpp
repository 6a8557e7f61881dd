#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mogp/cohort.hpp"
#include "mogp/gp.hpp"

namespace mogp {

/// How one admission feature is emitted given the subtype. Categorical
/// features draw a level from `probabilities[z]` (one weight per level);
/// numeric features draw from N(`means[z]`, `sds[z]`).
struct FeatureEmission {
  std::string name;
  FeatureKind kind = FeatureKind::Categorical;
  std::vector<std::string> levels;
  std::vector<std::vector<double>> probabilities;
  std::vector<double> means;
  std::vector<double> sds;
};

struct GenerativeSpec {
  std::vector<std::string> streams;
  double epoch_duration = 24.0;
  int num_epochs = 6;
  Eigen::VectorXd subtype_prior;  // P(Z = z)
  Eigen::VectorXd class_prior;    // P(V = 1 | Z = z)
  std::vector<StationaryParams> stable;
  std::vector<EpochParams> deteriorating;
  std::vector<FeatureEmission> features;
  Eigen::VectorXd epoch_prior;  // f_k
  double gap_min = 1.0;         // hours between samples of one stream
  double gap_max = 4.0;
  double stay_median = 96.0;  // stable stays are log-normal
  double stay_log_sd = 0.5;
  double stay_min = 2.0;
  double stay_max = 2762.0;

  int num_subtypes() const { return static_cast<int>(subtype_prior.size()); }
  int dim() const { return static_cast<int>(streams.size()); }
  void validate() const;
  CohortSchema schema() const;
};

struct GroundTruth {
  std::string id;
  int subtype = 0;        // 0-based
  int initial_epoch = 0;  // kbar for deteriorating patients, 0 otherwise
};

struct SyntheticCohort {
  Cohort cohort;
  std::vector<GroundTruth> truth;
};

/// Patient n is generated from its own seed derived from (seed, n).
SyntheticCohort generate_cohort(const GenerativeSpec& spec, std::size_t n, std::uint64_t seed);

/// Draws one patient; `kbar` forces the deteriorating branch with that
/// initial epoch when positive.
PatientRecord generate_patient(const GenerativeSpec& spec, const std::string& id, int subtype,
                               int label, int kbar, std::uint64_t seed);

void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& truth);
std::vector<GroundTruth> read_ground_truth(std::istream& in);

// Canonical fixtures.
GenerativeSpec homogeneous_fixture();
/// Stable means 130 (female) / 138 (male); each deteriorating subtype drifts
/// onto the other's stable level by its last epoch. Gender carries the subtype.
GenerativeSpec two_subtype_fixture();
GenerativeSpec six_subtype_fixture();
/// K = 3 with well-separated epoch means, for initial-epoch recovery.
GenerativeSpec epoch_sync_fixture();

std::vector<std::string> fixture_names();
GenerativeSpec fixture(const std::string& name);

}  // namespace mogp
