#include "mogp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mogp/error.hpp"

namespace mogp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log P(obs | Theta_1, kbar) for every kbar, -inf where an offset overflows.
Eigen::VectorXd offset_log_likelihoods(const EpochParams& expert, const ObservationSet& obs,
                                       const JitterPolicy& jitter) {
  const int k = expert.num_epochs();
  Eigen::VectorXd ll = Eigen::VectorXd::Constant(k, kNegInf);
  const auto last = obs.last_time();
  for (int kbar = 1; kbar <= k; ++kbar) {
    if (last && epoch_index(*last, expert.epoch_duration, kbar) > k) continue;
    ll[kbar - 1] = log_marginal_likelihood(expert, obs, kbar, jitter);
  }
  return ll;
}

Eigen::VectorXd normalized_posterior(const Eigen::VectorXd& log_prior, const Eigen::VectorXd& ll) {
  const Eigen::VectorXd joint = log_prior + ll;
  const double m = joint.maxCoeff();
  if (!std::isfinite(m)) {
    fail(ErrorCode::AllOffsetsInvalid, "no initial epoch is consistent with the observations");
  }
  // scalar exp: Eigen's packet exp maps -inf to a denormal, not zero
  Eigen::VectorXd p = (joint.array() - m).unaryExpr([](double x) { return std::exp(x); });
  return p / p.sum();
}

}  // namespace

void TrainedModel::validate() const {
  const int g = num_experts();
  if (g < 1) fail(ErrorCode::InvalidArgument, "model has no experts");
  if (static_cast<int>(deteriorating.experts.size()) != g || rmodel.num_experts() != g ||
      deteriorating.class_prior.size() != g) {
    fail(ErrorCode::InvalidArgument, "stable and deteriorating experts differ in G");
  }
  if (deteriorating.epoch_prior.size() != num_epochs) {
    fail(ErrorCode::InvalidArgument, "epoch prior does not cover K epochs");
  }
  for (const auto& s : stable) {
    s.validate();
    if (s.dim() != dim()) fail(ErrorCode::InvalidArgument, "expert dimension differs from schema");
  }
  for (const auto& d : deteriorating.experts) {
    d.validate();
    if (d.num_epochs() != num_epochs || d.dim() != dim()) {
      fail(ErrorCode::InvalidArgument, "deteriorating expert shape differs from model");
    }
  }
  if (rmodel.num_features() != schema.encoded_width()) {
    fail(ErrorCode::InvalidArgument, "responsibility model width differs from schema");
  }
}

Eigen::VectorXd epoch_posterior(const EpochParams& expert, const Eigen::VectorXd& epoch_prior,
                                const ObservationSet& obs, const JitterPolicy& jitter) {
  if (epoch_prior.size() != expert.num_epochs()) {
    fail(ErrorCode::InvalidArgument, "epoch prior does not cover K epochs");
  }
  if (obs.empty()) return epoch_prior;
  const Eigen::VectorXd log_prior = epoch_prior.unaryExpr([](double p) { return safe_log(p); });
  return normalized_posterior(log_prior, offset_log_likelihoods(expert, obs, jitter));
}

ExpertRisk expert_risk(const TrainedModel& model, int z, const ObservationSet& obs) {
  if (z < 0 || z >= model.num_experts()) fail(ErrorCode::InvalidArgument, "expert index out of range");
  const auto zz = static_cast<std::size_t>(z);
  const double prior = model.deteriorating.class_prior[z];
  const Eigen::VectorXd& f = model.deteriorating.epoch_prior;
  const EpochParams& det = model.deteriorating.experts[zz];
  ExpertRisk out;
  if (obs.empty()) {
    out.risk = prior;
    out.epoch_posterior = f;
    return out;
  }

  const ObservationSet* seen = &obs;
  ObservationSet window;
  const double t_last = *obs.last_time();
  const int k = model.num_epochs;
  if (epoch_index(t_last, model.epoch_duration, 1) > k) {
    const double start = (std::floor(t_last / model.epoch_duration) - k + 1) * model.epoch_duration;
    window = obs.window_from(start);
    seen = &window;
    out.truncated = true;
  }

  const Eigen::VectorXd log_f = f.unaryExpr([](double p) { return safe_log(p); });
  const Eigen::VectorXd ll1 = offset_log_likelihoods(det, *seen, model.jitter);
  out.epoch_posterior = normalized_posterior(log_f, ll1);
  const double ll0 = log_marginal_likelihood(model.stable[zz], *seen, model.jitter);
  const double log_odds_prior = safe_log(prior) - safe_log(1.0 - prior);

  double risk = 0.0;
  for (int kbar = 0; kbar < k; ++kbar) {
    const double w = out.epoch_posterior[kbar];
    if (w == 0.0) continue;
    double r;
    if (prior <= 0.0) r = 0.0;
    else if (prior >= 1.0) r = 1.0;
    else r = sigmoid(log_odds_prior + ll1[kbar] - ll0);
    risk += w * r;
  }
  out.risk = std::clamp(risk, 0.0, 1.0);
  return out;
}

RiskPoint personalized_risk(const TrainedModel& model, const Eigen::VectorXd& admission,
                            const ObservationSet& obs, double time) {
  if (obs.dim() != model.dim()) fail(ErrorCode::SchemaMismatch, "stream dimension differs from model");
  const Eigen::VectorXd beta = model.rmodel.predict(admission);
  const int g = model.num_experts();
  RiskPoint p;
  p.time = time;
  p.expert_risks.resize(g);
  p.epoch_posterior = Eigen::VectorXd::Zero(model.num_epochs);
  const double mass = beta.sum();
  double risk = 0.0;
  for (int z = 0; z < g; ++z) {
    const ExpertRisk r = expert_risk(model, z, obs);
    p.expert_risks[z] = r.risk;
    risk += beta[z] / mass * r.risk;
    p.epoch_posterior += beta[z] / mass * r.epoch_posterior;
  }
  p.risk = std::clamp(risk, 0.0, 1.0);
  return p;
}

namespace {

std::vector<double> evaluation_times(const ObservationSet& obs, const ScoreOptions& options) {
  std::vector<double> times;
  for (const auto& s : obs.samples()) {
    if (times.empty() || s.time != times.back()) times.push_back(s.time);
  }
  if (options.interval && !times.empty()) {
    if (!(*options.interval > 0.0)) fail(ErrorCode::InvalidArgument, "interval must be positive");
    const double last = times.back();
    for (double t = 0.0; t <= last; t += *options.interval) times.push_back(t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
  }
  if (times.empty()) times.push_back(0.0);
  return times;
}

void check_threshold(const ScoreOptions& options) {
  if (options.threshold && !(*options.threshold >= 0.0 && *options.threshold <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "threshold must lie in [0, 1]");
  }
}

}  // namespace

std::optional<double> first_crossing(const std::vector<RiskPoint>& points, double threshold) {
  for (const auto& p : points) {
    if (p.risk >= threshold) return p.time;
  }
  return std::nullopt;
}

RiskTrajectory score_stream(const TrainedModel& model, const PatientRecord& patient,
                            const ScoreOptions& options) {
  check_threshold(options);
  RiskTrajectory traj;
  traj.threshold = options.threshold;
  for (const double t : evaluation_times(patient.stream, options)) {
    traj.points.push_back(
        personalized_risk(model, patient.admission.features, patient.stream.up_to(t), t));
  }
  if (options.threshold) traj.stopping_time = first_crossing(traj.points, *options.threshold);
  return traj;
}

double baseline_score(double max_abs_z) { return sigmoid(max_abs_z); }

RiskTrajectory baseline_trajectory(const StreamStats& stats, const PatientRecord& patient,
                                   const ScoreOptions& options) {
  check_threshold(options);
  if (stats.mean.size() != patient.stream.dim() || stats.sd.size() != patient.stream.dim()) {
    fail(ErrorCode::SchemaMismatch, "stream statistics do not match the patient's streams");
  }
  RiskTrajectory traj;
  traj.threshold = options.threshold;
  const auto samples = patient.stream.samples();
  std::size_t i = 0;
  double current = baseline_score(0.0);
  for (const double t : evaluation_times(patient.stream, options)) {
    if (i < samples.size() && samples[i].time == t) {
      double zmax = 0.0;
      for (; i < samples.size() && samples[i].time == t; ++i) {
        const auto s = static_cast<Eigen::Index>(samples[i].stream);
        const double sd = stats.sd[s] > 0.0 ? stats.sd[s] : 1.0;
        zmax = std::max(zmax, std::abs(samples[i].value - stats.mean[s]) / sd);
      }
      current = baseline_score(zmax);
    }
    RiskPoint p;
    p.time = t;
    p.risk = current;
    traj.points.push_back(std::move(p));
  }
  if (options.threshold) traj.stopping_time = first_crossing(traj.points, *options.threshold);
  return traj;
}

}  // namespace mogp
