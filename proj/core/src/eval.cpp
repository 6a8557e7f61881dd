#include "mogp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mogp/error.hpp"

namespace mogp {

double ScoredPatient::max_score() const {
  return scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
}

std::optional<double> ScoredPatient::max_score_until(double t) const {
  std::optional<double> best;
  for (std::size_t i = 0; i < times.size() && times[i] <= t; ++i) {
    best = best ? std::max(*best, scores[i]) : scores[i];
  }
  return best;
}

std::optional<double> ScoredPatient::stopping_time(double threshold) const {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= threshold) return times[i];
  }
  return std::nullopt;
}

ScoredPatient scored(const RiskTrajectory& trajectory, const PatientRecord& record) {
  if (!record.label) fail(ErrorCode::UnlabeledRecord, "record '" + record.id + "' has no label");
  ScoredPatient p;
  p.label = *record.label;
  p.end_time = record.end_time;
  for (const auto& pt : trajectory.points) {
    p.times.push_back(pt.time);
    p.scores.push_back(pt.risk);
  }
  return p;
}

std::vector<AlarmOutcome> alarm_outcomes(std::span<const ScoredPatient> patients, double threshold) {
  std::vector<AlarmOutcome> out;
  out.reserve(patients.size());
  for (const auto& p : patients) {
    AlarmOutcome o;
    o.label = p.label;
    o.end_time = p.end_time;
    o.stopping_time = p.stopping_time(threshold);
    o.fired = o.stopping_time.has_value();
    if (o.fired && p.label == 1) o.lead_time = std::max(0.0, p.end_time - *o.stopping_time);
    out.push_back(o);
  }
  return out;
}

Confusion confusion_at(std::span<const AlarmOutcome> outcomes) {
  Confusion c;
  for (const auto& o : outcomes) {
    if (o.label == 1) (o.fired ? c.tp : c.fn) += 1;
    else (o.fired ? c.fp : c.tn) += 1;
  }
  const std::size_t pos = c.tp + c.fn;
  const std::size_t neg = c.fp + c.tn;
  if (pos == 0) fail(ErrorCode::NoPositives, "outcome set has no positive patients");
  if (neg == 0) fail(ErrorCode::NoNegatives, "outcome set has no negative patients");
  c.tpr = static_cast<double>(c.tp) / static_cast<double>(pos);
  c.tnr = static_cast<double>(c.tn) / static_cast<double>(neg);
  c.fpr = static_cast<double>(c.fp) / static_cast<double>(neg);
  if (c.tp + c.fp > 0) c.ppv = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp > 0) c.false_per_true = static_cast<double>(c.fp) / static_cast<double>(c.tp);
  return c;
}

double auc_of(std::span<const ScoredPatient> patients) {
  std::vector<double> pos, neg;
  for (const auto& p : patients) (p.label == 1 ? pos : neg).push_back(p.max_score());
  if (pos.empty()) fail(ErrorCode::NoPositives, "AUC needs positive patients");
  if (neg.empty()) fail(ErrorCode::NoNegatives, "AUC needs negative patients");
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (const double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

RocCurve sweep_roc(std::span<const ScoredPatient> patients, std::span<const double> grid) {
  RocCurve curve;
  std::vector<double> g(grid.begin(), grid.end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  for (const double eta : g) {
    const auto outcomes = alarm_outcomes(patients, eta);
    curve.rows.push_back({eta, confusion_at(outcomes)});
  }
  curve.auc = auc_of(patients);
  return curve;
}

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 100; ++i) g.push_back(i / 100.0);
  return g;
}

namespace {

std::size_t required_positives(std::size_t positives, double target) {
  if (!(target > 0.0 && target <= 1.0)) fail(ErrorCode::InvalidArgument, "TPR target must lie in (0, 1]");
  return static_cast<std::size_t>(std::ceil(target * static_cast<double>(positives) - 1e-9));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double threshold_for_tpr(std::span<const ScoredPatient> patients, double target_tpr) {
  std::vector<double> maxima;
  for (const auto& p : patients) {
    if (p.label == 1) maxima.push_back(p.max_score());
  }
  if (maxima.empty()) fail(ErrorCode::NoPositives, "no positive patients");
  const std::size_t need = std::max<std::size_t>(1, required_positives(maxima.size(), target_tpr));
  std::sort(maxima.begin(), maxima.end(), std::greater<>());
  return maxima[need - 1];
}

std::vector<TimelinessRow> timeliness_curve(std::span<const ScoredPatient> patients,
                                            double target_tpr, std::span<const double> horizons) {
  std::size_t positives = 0;
  for (const auto& p : patients) positives += p.label == 1;
  if (positives == 0) fail(ErrorCode::NoPositives, "no positive patients");
  const std::size_t need = std::max<std::size_t>(1, required_positives(positives, target_tpr));

  std::vector<TimelinessRow> rows;
  for (const double h : horizons) {
    std::vector<double> early;
    for (const auto& p : patients) {
      if (p.label != 1) continue;
      if (const auto m = p.max_score_until(p.end_time - h)) early.push_back(*m);
    }
    if (early.size() < need) {
      if (rows.empty()) {
        fail(ErrorCode::TargetUnreachable, "TPR target cannot be met " + std::to_string(h) +
                                               " hours before the end of stay");
      }
      break;
    }
    std::sort(early.begin(), early.end(), std::greater<>());
    TimelinessRow row;
    row.horizon = h;
    row.threshold = early[need - 1];
    const auto outcomes = alarm_outcomes(patients, row.threshold);
    const Confusion c = confusion_at(outcomes);
    row.tpr = c.tpr;
    row.ppv = c.ppv;
    std::vector<double> leads;
    for (const auto& o : outcomes) {
      if (o.lead_time) leads.push_back(*o.lead_time);
    }
    row.median_lead = median(std::move(leads));
    rows.push_back(row);
  }
  return rows;
}

std::optional<double> lead_at_ppv(std::span<const TimelinessRow> rows, double ppv) {
  std::optional<double> best;
  for (const auto& r : rows) {
    if (r.ppv && *r.ppv >= ppv) best = best ? std::max(*best, r.median_lead) : r.median_lead;
  }
  return best;
}

std::vector<FalseAlarmRow> false_alarm_table(std::span<const ScoredPatient> patients,
                                             std::span<const double> target_tprs) {
  std::vector<FalseAlarmRow> rows;
  for (const double target : target_tprs) {
    FalseAlarmRow row;
    row.target_tpr = target;
    row.threshold = threshold_for_tpr(patients, target);
    row.confusion = confusion_at(alarm_outcomes(patients, row.threshold));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mogp
