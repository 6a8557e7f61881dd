#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mogp/risk.hpp"

namespace mogp {

/// A patient's score trajectory with its outcome.
struct ScoredPatient {
  int label = 0;
  double end_time = 0.0;
  std::vector<double> times;
  std::vector<double> scores;

  double max_score() const;
  /// Largest score at or before t; nullopt when nothing was scored by then.
  std::optional<double> max_score_until(double t) const;
  std::optional<double> stopping_time(double threshold) const;
};

ScoredPatient scored(const RiskTrajectory& trajectory, const PatientRecord& record);

struct AlarmOutcome {
  int label = 0;
  bool fired = false;
  std::optional<double> stopping_time;
  double end_time = 0.0;
  std::optional<double> lead_time;  // positives that fired
};

/// An alarm fires when the score reaches the threshold at any time (ties fire).
std::vector<AlarmOutcome> alarm_outcomes(std::span<const ScoredPatient> patients, double threshold);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double tpr = 0.0;
  std::optional<double> ppv;  // undefined when nothing fired
  double tnr = 0.0;
  double fpr = 0.0;
  std::optional<double> false_per_true;  // undefined without true alarms
};

/// Count-based plug-in estimators. Throws NoPositives / NoNegatives.
Confusion confusion_at(std::span<const AlarmOutcome> outcomes);

struct RocRow {
  double threshold = 0.0;
  Confusion confusion;
};

struct RocCurve {
  std::vector<RocRow> rows;  // ascending threshold
  double auc = 0.0;
};

/// Exact area under the ROC of per-patient maximum scores, ties counted half.
double auc_of(std::span<const ScoredPatient> patients);

RocCurve sweep_roc(std::span<const ScoredPatient> patients, std::span<const double> grid);

/// 0, 0.01, ..., 1.
std::vector<double> default_grid();

struct TimelinessRow {
  double horizon = 0.0;  // hours before the end of stay
  double threshold = 0.0;
  double tpr = 0.0;
  std::optional<double> ppv;
  double median_lead = 0.0;  // among fired positives
};

/// For each horizon h, the largest threshold at which a fraction `target_tpr`
/// of positives have alarmed by T_end - h; reports PPV and median lead time
/// of the alarm policy at that threshold. Stops at the first unreachable
/// horizon; throws TargetUnreachable when even h = horizons.front() is.
std::vector<TimelinessRow> timeliness_curve(std::span<const ScoredPatient> patients,
                                            double target_tpr, std::span<const double> horizons);

/// Longest median lead among rows with PPV at least `ppv`.
std::optional<double> lead_at_ppv(std::span<const TimelinessRow> rows, double ppv);

struct FalseAlarmRow {
  double target_tpr = 0.0;
  double threshold = 0.0;
  Confusion confusion;
};

/// Table of false alarms per true alarm at the thresholds meeting each TPR.
std::vector<FalseAlarmRow> false_alarm_table(std::span<const ScoredPatient> patients,
                                             std::span<const double> target_tprs);

/// Largest threshold that fires on at least ceil(target * P) positives.
double threshold_for_tpr(std::span<const ScoredPatient> patients, double target_tpr);

}  // namespace mogp
