#include "mogp/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "mogp/error.hpp"

namespace mogp {

namespace {

class StepTimer {
 public:
  explicit StepTimer(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}
  void lap(const std::string& step) {
    const auto now = std::chrono::steady_clock::now();
    sink_.emplace_back(step, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }

 private:
  std::vector<std::pair<std::string, double>>& sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

EmConfig em_config(const Config& config) {
  EmConfig em;
  em.tolerance = config.em_tolerance;
  em.max_iterations = config.em_max_iterations;
  em.jitter = config.jitter;
  em.mstep.max_iterations = config.mstep_max_iterations;
  em.mstep.rel_tolerance = config.fit_tolerance;
  em.mstep.jitter = config.jitter;
  return em;
}

SelfTaughtConfig self_taught_config(const Config& config, std::uint64_t seed) {
  SelfTaughtConfig st;
  st.epoch_duration = config.epoch_hours;
  st.num_epochs = config.num_epochs;
  st.fit.restarts = config.fit_restarts;
  st.fit.max_iterations = config.fit_max_iterations;
  st.fit.rel_tolerance = config.fit_tolerance;
  st.fit.fit_amplitude = config.free_epoch_amplitude;
  st.fit.jitter = config.jitter;
  st.fit.seed = seed;
  return st;
}

StreamStats stream_stats(std::span<const PatientRecord> records, int dim) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sq = sum, cnt = sum;
  for (const auto& r : records) {
    for (const auto& s : r.stream.samples()) {
      sum[s.stream] += s.value;
      sq[s.stream] += s.value * s.value;
      cnt[s.stream] += 1.0;
    }
  }
  StreamStats st;
  st.mean = Eigen::VectorXd::Zero(dim);
  st.sd = Eigen::VectorXd::Ones(dim);
  for (int d = 0; d < dim; ++d) {
    if (cnt[d] == 0.0) continue;
    st.mean[d] = sum[d] / cnt[d];
    const double var = sq[d] / cnt[d] - st.mean[d] * st.mean[d];
    if (var > 0.0) st.sd[d] = std::sqrt(var);
  }
  return st;
}

TrainOutcome train_model(const Cohort& cohort, const Config& config, std::uint64_t seed) {
  config.validate();
  TrainOutcome out;
  StepTimer timer(out.timings);

  const Partition parts = partition(cohort.records);
  if (parts.stable.empty()) fail(ErrorCode::DegenerateData, "training cohort has no stable patients");
  if (parts.deteriorating.empty()) {
    fail(ErrorCode::DegenerateData, "training cohort has no deteriorating patients");
  }
  const std::vector<ObservationSet> stable_obs = streams_of(parts.stable);
  timer.lap("partition");

  const EmConfig em = em_config(config);
  EmResult fit;
  if (config.forced_subtypes) {
    fit = em_fit(stable_obs, *config.forced_subtypes, em, seed);
    SelectionRow row;
    row.num_experts = *config.forced_subtypes;
    row.q_star = fit.state.log_likelihood;
    row.penalty = selection_penalty(row.num_experts, cohort.schema.dim());
    out.selection.rows.push_back(row);
    out.selection.threshold = config.bayes_threshold;
    out.selection.selected = row.num_experts;
  } else {
    Selection sel = select_num_experts(
        stable_obs, {.bayes_threshold = config.bayes_threshold, .max_experts = config.max_subtypes},
        em, seed);
    fit = std::move(sel.fit);
    out.selection = std::move(sel.trace);
  }
  if (!fit.converged) {
    out.warnings.push_back("EM stopped at the iteration cap before reaching the tolerance");
  }
  timer.lap("subtypes");

  TrainedModel& m = out.model;
  m.schema = cohort.schema;
  m.stable = fit.state.experts;
  m.epoch_duration = config.epoch_hours;
  m.num_epochs = config.num_epochs;
  m.jitter = config.jitter;
  m.rmodel = fit_responsibilities(admission_matrix(parts.stable), fit.state.responsibilities);
  if (m.rmodel.ridge) {
    out.warnings.push_back("admission features are collinear; used ridge regression (lambda 1e-6)");
  }
  out.responsibilities = fit.state.responsibilities;
  out.importance = feature_importance(m.rmodel, cohort.schema.column_names());
  timer.lap("responsibility regression");

  SelfTaughtResult st = self_taught_fit(parts.deteriorating, m.rmodel, m.stable,
                                        self_taught_config(config, seed ^ 0x5eedULL), seed + 1);
  m.deteriorating = std::move(st.set);
  for (auto& w : st.warnings) out.warnings.push_back(std::move(w));
  SelfTaughtConfig defaults;
  m.deteriorating.class_prior =
      estimate_class_prior(cohort.records, m.rmodel, defaults.min_mass_for_class_prior);
  m.global_prior = static_cast<double>(parts.deteriorating.size()) /
                   static_cast<double>(cohort.records.size());
  m.stream_stats = stream_stats(parts.stable, cohort.schema.dim());
  timer.lap("deteriorating experts");
  m.validate();
  return out;
}

std::vector<ScoredPatient> score_cohort(const TrainedModel& model,
                                        std::span<const PatientRecord> records,
                                        const ScoreOptions& options) {
  std::vector<ScoredPatient> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(scored(score_stream(model, r, options), r));
  return out;
}

std::vector<ScoredPatient> score_cohort_baseline(const TrainedModel& model,
                                                 std::span<const PatientRecord> records,
                                                 const ScoreOptions& options) {
  std::vector<ScoredPatient> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(scored(baseline_trajectory(model.stream_stats, r, options), r));
  }
  return out;
}

std::vector<double> default_horizons() {
  std::vector<double> h;
  for (int i = 0; i <= 24; ++i) h.push_back(2.0 * i);
  return h;
}

}  // namespace mogp
