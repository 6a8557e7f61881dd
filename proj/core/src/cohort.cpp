#include "mogp/cohort.hpp"

#include <algorithm>
#include <cmath>

#include "mogp/error.hpp"

namespace mogp {

int FeatureSpec::encoded_width() const {
  return kind == FeatureKind::Numeric ? 1 : static_cast<int>(levels.size());
}

int CohortSchema::encoded_width() const {
  int w = 0;
  for (const auto& f : features) w += f.encoded_width();
  return w;
}

std::vector<std::string> CohortSchema::column_names() const {
  std::vector<std::string> names;
  for (const auto& f : features) {
    if (f.kind == FeatureKind::Numeric) {
      names.push_back(f.name);
      continue;
    }
    for (std::size_t l = 1; l < f.levels.size(); ++l) names.push_back(f.name + "=" + f.levels[l]);
    names.push_back(f.name + "=" + kUnknownLevel);
  }
  return names;
}

std::vector<int> CohortSchema::column_feature() const {
  std::vector<int> owner;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (int c = 0; c < features[i].encoded_width(); ++c) owner.push_back(static_cast<int>(i));
  }
  return owner;
}

std::optional<int> CohortSchema::stream_index(const std::string& name) const {
  const auto it = std::find(streams.begin(), streams.end(), name);
  if (it == streams.end()) return std::nullopt;
  return static_cast<int>(it - streams.begin());
}

bool is_missing_value(const std::string& v) {
  return v.empty() || v == "NA" || v == kUnknownLevel;
}

Eigen::VectorXd encode_admission(const CohortSchema& schema,
                                 const std::map<std::string, std::string>& raw) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(schema.encoded_width());
  Eigen::Index col = 0;
  for (const auto& f : schema.features) {
    const auto it = raw.find(f.name);
    const bool missing = it == raw.end() || is_missing_value(it->second);
    if (f.kind == FeatureKind::Numeric) {
      if (missing) {
        out[col] = f.impute_value;
      } else {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(it->second, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != it->second.size() || !std::isfinite(v)) {
          fail(ErrorCode::SchemaMismatch,
               "feature '" + f.name + "' expects a number, got '" + it->second + "'");
        }
        out[col] = v;
      }
      col += 1;
      continue;
    }
    const Eigen::Index width = f.encoded_width();
    if (missing) {
      out[col + width - 1] = 1.0;
    } else {
      const auto lvl = std::find(f.levels.begin(), f.levels.end(), it->second);
      if (lvl == f.levels.end()) {
        fail(ErrorCode::SchemaMismatch,
             "feature '" + f.name + "' has no level '" + it->second + "'");
      }
      const auto idx = lvl - f.levels.begin();
      if (idx > 0) out[col + idx - 1] = 1.0;
    }
    col += width;
  }
  return out;
}

Partition partition(std::span<const PatientRecord> records) {
  Partition p;
  for (const auto& r : records) {
    if (!r.label) fail(ErrorCode::UnlabeledRecord, "record '" + r.id + "' has no label");
    if (*r.label == 1) {
      p.deteriorating.push_back(r);
    } else if (*r.label == 0) {
      p.stable.push_back(r);
    } else {
      fail(ErrorCode::InvalidArgument, "record '" + r.id + "' has label outside {0,1}");
    }
  }
  return p;
}

std::optional<AlignedTime> align_time(double t, double end_time, double epoch_duration,
                                      int num_epochs) {
  const double d = std::max(0.0, end_time - t);
  const int j = static_cast<int>(std::floor(d / epoch_duration)) + 1;
  if (j > num_epochs) return std::nullopt;
  double local = j * epoch_duration - d;
  local = std::clamp(local, 0.0, std::nextafter(epoch_duration, 0.0));
  return AlignedTime{num_epochs - j + 1, local};
}

double restore_time(const AlignedTime& aligned, double end_time, double epoch_duration,
                    int num_epochs) {
  const int j = num_epochs - aligned.epoch + 1;
  return end_time - (j * epoch_duration - aligned.local);
}

AlignedEpochDataset align_deteriorating(std::span<const PatientRecord> deteriorating,
                                        double epoch_duration, int num_epochs) {
  if (!(epoch_duration > 0.0) || num_epochs < 1) {
    fail(ErrorCode::InvalidArgument, "alignment needs T > 0 and K >= 1");
  }
  AlignedEpochDataset out;
  out.epoch_duration = epoch_duration;
  out.num_epochs = num_epochs;
  out.buckets.resize(static_cast<std::size_t>(num_epochs));
  for (const auto& rec : deteriorating) {
    if (!(rec.end_time > 0.0)) {
      fail(ErrorCode::InvalidArgument, "record '" + rec.id + "' has non-positive end time");
    }
    std::vector<std::vector<Sample>> parts(static_cast<std::size_t>(num_epochs));
    for (const auto& s : rec.stream.samples()) {
      const auto a = align_time(s.time, rec.end_time, epoch_duration, num_epochs);
      if (!a) {
        ++out.dropped;
        continue;
      }
      parts[static_cast<std::size_t>(a->epoch - 1)].push_back({s.stream, a->local, s.value});
    }
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!parts[k].empty()) out.buckets[k].emplace_back(rec.stream.dim(), std::move(parts[k]));
    }
  }
  return out;
}

std::vector<ObservationSet> streams_of(std::span<const PatientRecord> records) {
  std::vector<ObservationSet> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.stream);
  return out;
}

Eigen::MatrixXd admission_matrix(std::span<const PatientRecord> records) {
  if (records.empty()) return {};
  const auto width = records.front().admission.features.size();
  Eigen::MatrixXd y(static_cast<Eigen::Index>(records.size()), width);
  for (std::size_t n = 0; n < records.size(); ++n) {
    if (records[n].admission.features.size() != width) {
      fail(ErrorCode::SchemaMismatch, "admission encodings differ in width");
    }
    y.row(static_cast<Eigen::Index>(n)) = records[n].admission.features.transpose();
  }
  return y;
}

}  // namespace mogp
