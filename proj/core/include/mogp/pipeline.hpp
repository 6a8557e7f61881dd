#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mogp/cohort.hpp"
#include "mogp/config.hpp"
#include "mogp/eval.hpp"
#include "mogp/risk.hpp"
#include "mogp/subtype_em.hpp"
#include "mogp/transfer.hpp"

namespace mogp {

struct TrainOutcome {
  TrainedModel model;
  ModelSelectionTrace selection;
  Eigen::MatrixXd responsibilities;  // final EM responsibilities of D_o
  std::vector<FeatureImportance> importance;
  std::vector<std::pair<std::string, double>> timings;  // step, seconds
  std::vector<std::string> warnings;
};

EmConfig em_config(const Config& config);
SelfTaughtConfig self_taught_config(const Config& config, std::uint64_t seed);

/// Offline learning: partition, subtype discovery on the stable patients,
/// responsibility regression, self-taught deteriorating experts, priors.
TrainOutcome train_model(const Cohort& cohort, const Config& config, std::uint64_t seed);

/// Pooled per-stream mean and standard deviation.
StreamStats stream_stats(std::span<const PatientRecord> records, int dim);

std::vector<ScoredPatient> score_cohort(const TrainedModel& model,
                                        std::span<const PatientRecord> records,
                                        const ScoreOptions& options = {});
std::vector<ScoredPatient> score_cohort_baseline(const TrainedModel& model,
                                                 std::span<const PatientRecord> records,
                                                 const ScoreOptions& options = {});

std::vector<double> default_horizons();

}  // namespace mogp
