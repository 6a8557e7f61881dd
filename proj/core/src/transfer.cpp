#include "mogp/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <numeric>
#include <random>

#include "mogp/error.hpp"

namespace mogp {

Eigen::VectorXd ResponsibilityModel::raw(const Eigen::VectorXd& features) const {
  if (features.size() != weights.cols()) {
    fail(ErrorCode::SchemaMismatch, "admission encoding has " + std::to_string(features.size()) +
                                        " columns, model expects " + std::to_string(weights.cols()));
  }
  return intercept + weights * features;
}

Eigen::VectorXd ResponsibilityModel::predict(const Eigen::VectorXd& features) const {
  Eigen::VectorXd b = raw(features).cwiseMax(0.0).cwiseMin(1.0);
  const double s = b.sum();
  if (!(s > 0.0)) return Eigen::VectorXd::Constant(b.size(), 1.0 / static_cast<double>(b.size()));
  return b / s;
}

ResponsibilityModel fit_responsibilities(const Eigen::MatrixXd& features,
                                         const Eigen::MatrixXd& responsibilities) {
  const Eigen::Index n = features.rows();
  if (responsibilities.rows() != n) {
    fail(ErrorCode::InvalidArgument, "feature and responsibility row counts differ");
  }
  if (n == 0 || responsibilities.cols() == 0) fail(ErrorCode::InvalidArgument, "nothing to regress");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(responsibilities.row(i).sum() - 1.0) > 1e-6 || responsibilities.row(i).minCoeff() < 0.0) {
      fail(ErrorCode::InvalidArgument, "responsibility rows must be distributions");
    }
  }
  const Eigen::Index s = features.cols();
  ResponsibilityModel m;
  m.active.assign(static_cast<std::size_t>(s), false);
  std::vector<Eigen::Index> cols;
  for (Eigen::Index c = 0; c < s; ++c) {
    const bool varies = features.col(c).maxCoeff() > features.col(c).minCoeff();
    m.active[static_cast<std::size_t>(c)] = varies;
    if (varies) cols.push_back(c);
  }

  // Centering separates the intercept, which is then never penalized.
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.size()));
  Eigen::VectorXd xbar(x.cols());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    xbar[jj] = features.col(cols[j]).mean();
    x.col(jj) = features.col(cols[j]).array() - xbar[jj];
  }
  const Eigen::RowVectorXd ybar = responsibilities.colwise().mean();
  const Eigen::MatrixXd yc = responsibilities.rowwise() - ybar;

  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(x.cols(), responsibilities.cols());
  if (x.cols() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() == x.cols()) {
      coef = qr.solve(yc);
    } else {
      m.ridge = true;
      Eigen::MatrixXd gram = x.transpose() * x;
      gram.diagonal().array() += kRidgeLambda;
      coef = gram.ldlt().solve(x.transpose() * yc);
    }
  }
  m.weights = Eigen::MatrixXd::Zero(responsibilities.cols(), s);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    m.weights.col(cols[j]) = coef.row(static_cast<Eigen::Index>(j)).transpose();
  }
  m.intercept = ybar.transpose() - coef.transpose() * xbar;
  return m;
}

std::vector<FeatureImportance> feature_importance(const ResponsibilityModel& model,
                                                  const std::vector<std::string>& column_names) {
  if (static_cast<int>(column_names.size()) != model.num_features()) {
    fail(ErrorCode::InvalidArgument, "column names do not match the responsibility model");
  }
  std::vector<FeatureImportance> rows;
  for (int c = 0; c < model.num_features(); ++c) {
    rows.push_back({0, column_names[static_cast<std::size_t>(c)], model.weights.col(c).cwiseAbs().sum()});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.coefficient > b.coefficient;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = static_cast<int>(i) + 1;
  return rows;
}

int implied_initial_epoch(double end_time, double epoch_duration, int num_epochs) {
  const int spanned = static_cast<int>(std::ceil(end_time / epoch_duration));
  return std::clamp(num_epochs - spanned + 1, 1, num_epochs);
}

Eigen::VectorXd estimate_epoch_prior(std::span<const PatientRecord> deteriorating,
                                     double epoch_duration, int num_epochs,
                                     std::size_t min_patients) {
  Eigen::VectorXd f = Eigen::VectorXd::Ones(num_epochs);
  if (deteriorating.size() >= min_patients) {
    for (const auto& r : deteriorating) {
      f[implied_initial_epoch(r.end_time, epoch_duration, num_epochs) - 1] += 1.0;
    }
  }
  return f / f.sum();
}

Eigen::VectorXd estimate_class_prior(std::span<const PatientRecord> labeled,
                                     const ResponsibilityModel& rmodel, double min_mass) {
  const int g = rmodel.num_experts();
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(g);
  Eigen::VectorXd pos = Eigen::VectorXd::Zero(g);
  double icu = 0.0;
  std::size_t count = 0;
  for (const auto& r : labeled) {
    if (!r.label) continue;
    const Eigen::VectorXd b = rmodel.predict(r.admission.features);
    mass += b;
    if (*r.label == 1) {
      pos += b;
      icu += 1.0;
    }
    ++count;
  }
  if (count == 0) fail(ErrorCode::InvalidArgument, "class prior needs labeled records");
  const double rate = icu / static_cast<double>(count);
  Eigen::VectorXd prior(g);
  for (int z = 0; z < g; ++z) {
    prior[z] = mass[z] >= min_mass ? std::clamp(pos[z] / mass[z], 0.0, 1.0) : rate;
  }
  return prior;
}

namespace {

EpochParams stable_as_epochs(const StationaryParams& p, const SelfTaughtConfig& config) {
  EpochParams e;
  e.epoch_duration = config.epoch_duration;
  e.epochs.assign(static_cast<std::size_t>(config.num_epochs), p);
  return e;
}

// Fits every epoch block of one expert; an epoch whose bucket cannot support
// a fit falls back to `fallback`.
EpochParams fit_epochs(const AlignedEpochDataset& aligned, const EpochParams& init,
                       const std::function<const EpochParams&()>& fallback, FitConfig cfg,
                       const std::string& who, std::vector<std::string>& warnings) {
  EpochParams out = init;
  const std::uint64_t base = cfg.seed;
  for (std::size_t k = 0; k < aligned.buckets.size(); ++k) {
    const auto& bucket = aligned.buckets[k];
    if (bucket.empty()) {
      out.epochs[k] = fallback().epochs[k];
      warnings.push_back(who + " epoch " + std::to_string(k + 1) + " has no data; using fallback");
      continue;
    }
    cfg.seed = base + 7919 * (k + 1);
    try {
      out.epochs[k] = fit_mle(bucket, init.epochs[k], cfg).params;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateData) throw;
      out.epochs[k] = fallback().epochs[k];
      warnings.push_back(who + " epoch " + std::to_string(k + 1) + ": " + e.what() +
                         "; using fallback");
    }
  }
  return out;
}

}  // namespace

SelfTaughtResult self_taught_fit(std::span<const PatientRecord> deteriorating,
                                 const ResponsibilityModel& rmodel,
                                 std::span<const StationaryParams> stable_experts,
                                 const SelfTaughtConfig& config, std::uint64_t seed) {
  if (deteriorating.empty()) fail(ErrorCode::DegenerateData, "no deteriorating patients");
  const int g = rmodel.num_experts();
  if (static_cast<int>(stable_experts.size()) != g) {
    fail(ErrorCode::InvalidArgument, "stable experts and responsibility model differ in G");
  }
  SelfTaughtResult out;
  auto& set = out.set;
  set.epoch_prior = estimate_epoch_prior(deteriorating, config.epoch_duration, config.num_epochs,
                                         config.min_patients_for_epoch_prior);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<PatientRecord>> subsets(static_cast<std::size_t>(g));
  for (const auto& r : deteriorating) {
    const Eigen::VectorXd b = rmodel.predict(r.admission.features);
    for (int z = 0; z < g; ++z) {
      std::bernoulli_distribution draw(std::clamp(b[z], 0.0, 1.0));
      if (draw(rng)) subsets[static_cast<std::size_t>(z)].push_back(r);
    }
  }

  // Pooled fit, used when an expert's subset is empty or an epoch is unusable.
  const AlignedEpochDataset pooled_data =
      align_deteriorating(deteriorating, config.epoch_duration, config.num_epochs);
  std::optional<EpochParams> pooled;
  auto pooled_fit = [&]() -> const EpochParams& {
    if (!pooled) {
      std::vector<std::string> ignored;
      const EpochParams init = stable_as_epochs(stable_experts.front(), config);
      pooled = fit_epochs(pooled_data, init, [&]() -> const EpochParams& { return init; },
                          config.fit, "pooled", ignored);
    }
    return *pooled;
  };

  for (int z = 0; z < g; ++z) {
    const auto& sub = subsets[static_cast<std::size_t>(z)];
    set.subset_sizes.push_back(sub.size());
    const std::string who = "expert " + std::to_string(z + 1);
    if (sub.empty()) {
      out.warnings.push_back(who + " drew no deteriorating patients; using the pooled fit");
      set.experts.push_back(pooled_fit());
      continue;
    }
    FitConfig cfg = config.fit;
    cfg.seed = config.fit.seed + 1000003ull * static_cast<std::uint64_t>(z);
    const EpochParams init = stable_as_epochs(stable_experts[static_cast<std::size_t>(z)], config);
    const AlignedEpochDataset aligned =
        align_deteriorating(sub, config.epoch_duration, config.num_epochs);
    set.experts.push_back(fit_epochs(aligned, init, pooled_fit, cfg, who, out.warnings));
  }
  return out;
}

}  // namespace mogp
