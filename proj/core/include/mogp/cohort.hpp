#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mogp/gp.hpp"

namespace mogp {

enum class FeatureKind { Numeric, Categorical };

/// One admission feature. Categorical features are treatment-coded against
/// their first level, with an extra indicator for the implicit "unknown"
/// level used when the value is missing. Numeric features are used raw and
/// imputed with `impute_value` (the training cohort median).
struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> levels;
  double impute_value = 0.0;

  int encoded_width() const;
};

inline constexpr const char* kUnknownLevel = "unknown";

struct CohortSchema {
  std::vector<std::string> streams;
  std::vector<FeatureSpec> features;

  int dim() const { return static_cast<int>(streams.size()); }
  int encoded_width() const;
  std::vector<std::string> column_names() const;
  /// Feature index owning each encoded column.
  std::vector<int> column_feature() const;
  std::optional<int> stream_index(const std::string& name) const;
};

struct AdmissionRecord {
  std::map<std::string, std::string> raw;  // as read; missing keys are absent
  Eigen::VectorXd features;                // encoded under the cohort schema
};

/// Empty, "NA" and "unknown" all denote a missing admission value.
bool is_missing_value(const std::string& value);

/// Encodes raw admission values. Missing or "NA" values are imputed; an
/// unrecognized categorical level is a SchemaMismatch.
Eigen::VectorXd encode_admission(const CohortSchema& schema,
                                 const std::map<std::string, std::string>& raw);

struct PatientRecord {
  std::string id;
  AdmissionRecord admission;
  ObservationSet stream;
  std::optional<int> label;  // 0 = discharged, 1 = ICU admission
  double end_time = 0.0;     // hours
};

struct Cohort {
  CohortSchema schema;
  std::vector<PatientRecord> records;
};

struct Partition {
  std::vector<PatientRecord> stable;
  std::vector<PatientRecord> deteriorating;
};

/// Splits labeled records by outcome. Throws UnlabeledRecord.
Partition partition(std::span<const PatientRecord> records);

struct AlignedTime {
  int epoch = 0;       // 1-based
  double local = 0.0;  // in [0, T)
};

/// Maps an absolute time onto the epoch grid anchored at the end of the
/// stay: (T_end - j T, T_end - (j-1) T] is epoch K - j + 1. Returns nullopt
/// for samples older than K epochs.
std::optional<AlignedTime> align_time(double t, double end_time, double epoch_duration,
                                      int num_epochs);
double restore_time(const AlignedTime& aligned, double end_time, double epoch_duration,
                    int num_epochs);

struct AlignedEpochDataset {
  double epoch_duration = 0.0;
  int num_epochs = 0;
  /// buckets[k] holds one fragment per patient with samples in epoch k + 1.
  std::vector<std::vector<ObservationSet>> buckets;
  std::size_t dropped = 0;  // samples older than K epochs
};

AlignedEpochDataset align_deteriorating(std::span<const PatientRecord> deteriorating,
                                        double epoch_duration, int num_epochs);

std::vector<ObservationSet> streams_of(std::span<const PatientRecord> records);
Eigen::MatrixXd admission_matrix(std::span<const PatientRecord> records);

// ---------------------------------------------------------------------------
// Cohort text format
//
//   @cohort 1
//   @streams sbp hr
//   @feature gender categorical female male
//   @feature age numeric
//   @patient p001 label=1 t_end=620 gender=male age=63
//   sbp 0.5 138.2
//   hr 1.0 80.1
//   @patient p002 label=? t_end=96 gender=female age=NA
//   ...
//
// '#' starts a comment line. Data rows are "<stream> <time_hours> <value>".

enum class IngestMode { Training, Scoring };

struct IngestOptions {
  IngestMode mode = IngestMode::Training;
  /// When set, the file must declare these streams and features; samples of
  /// other streams are dropped and numeric imputation uses the expected
  /// schema's values instead of cohort medians.
  const CohortSchema* expected = nullptr;
  /// Without an expected schema: keep only these streams (empty keeps all).
  std::vector<std::string> stream_whitelist;
};

Cohort read_cohort(std::istream& in, const IngestOptions& options = {},
                   const std::string& source = "<stream>");
Cohort load_cohort(const std::string& path, const IngestOptions& options = {});
void write_cohort(std::ostream& out, const Cohort& cohort);

}  // namespace mogp
