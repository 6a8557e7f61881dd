#include "mogp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "mogp/error.hpp"

namespace mogp {

namespace {

std::uint64_t patient_seed(std::uint64_t seed, std::uint64_t n) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ull * (n + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

bool is_distribution(const Eigen::VectorXd& p) {
  return p.size() > 0 && p.minCoeff() >= 0.0 && std::abs(p.sum() - 1.0) < 1e-9;
}

int draw_index(const Eigen::VectorXd& p, std::mt19937_64& rng) {
  std::discrete_distribution<int> d(p.data(), p.data() + p.size());
  return d(rng);
}

}  // namespace

void GenerativeSpec::validate() const {
  const int g = num_subtypes();
  if (g < 1 || !is_distribution(subtype_prior)) {
    fail(ErrorCode::InvalidArgument, "subtype prior must be a distribution");
  }
  if (class_prior.size() != g || class_prior.minCoeff() < 0.0 || class_prior.maxCoeff() > 1.0) {
    fail(ErrorCode::InvalidArgument, "class priors must be G probabilities");
  }
  if (static_cast<int>(stable.size()) != g || static_cast<int>(deteriorating.size()) != g) {
    fail(ErrorCode::InvalidArgument, "spec needs one stable and one deteriorating expert per subtype");
  }
  if (dim() < 1) fail(ErrorCode::InvalidArgument, "spec declares no streams");
  if (!(epoch_duration > 0.0) || num_epochs < 1) fail(ErrorCode::InvalidArgument, "bad epoch grid");
  for (const auto& s : stable) {
    s.validate();
    if (s.dim() != dim()) fail(ErrorCode::InvalidArgument, "stable expert dimension mismatch");
  }
  for (const auto& d : deteriorating) {
    d.validate();
    if (d.dim() != dim() || d.num_epochs() != num_epochs || d.epoch_duration != epoch_duration) {
      fail(ErrorCode::InvalidArgument, "deteriorating expert shape mismatch");
    }
  }
  if (epoch_prior.size() != num_epochs || !is_distribution(epoch_prior)) {
    fail(ErrorCode::InvalidArgument, "epoch prior must be a distribution over K epochs");
  }
  if (!(gap_min > 0.0) || gap_max < gap_min) fail(ErrorCode::InvalidArgument, "bad sampling gaps");
  if (!(stay_min > 0.0) || stay_max < stay_min || !(stay_median > 0.0) || stay_log_sd < 0.0) {
    fail(ErrorCode::InvalidArgument, "bad stay-length law");
  }
  for (const auto& f : features) {
    if (f.kind == FeatureKind::Categorical) {
      if (f.levels.empty() || static_cast<int>(f.probabilities.size()) != g) {
        fail(ErrorCode::InvalidArgument, "feature '" + f.name + "' needs per-subtype level weights");
      }
      for (const auto& p : f.probabilities) {
        if (p.size() != f.levels.size()) {
          fail(ErrorCode::InvalidArgument, "feature '" + f.name + "' weight count differs from levels");
        }
      }
    } else if (static_cast<int>(f.means.size()) != g || static_cast<int>(f.sds.size()) != g) {
      fail(ErrorCode::InvalidArgument, "feature '" + f.name + "' needs per-subtype mean and sd");
    }
  }
}

CohortSchema GenerativeSpec::schema() const {
  CohortSchema s;
  s.streams = streams;
  for (const auto& f : features) {
    FeatureSpec fs;
    fs.name = f.name;
    fs.kind = f.kind;
    fs.levels = f.levels;
    s.features.push_back(std::move(fs));
  }
  return s;
}

PatientRecord generate_patient(const GenerativeSpec& spec, const std::string& id, int subtype,
                               int label, int kbar, std::uint64_t seed) {
  if (subtype < 0 || subtype >= spec.num_subtypes()) fail(ErrorCode::InvalidArgument, "bad subtype");
  if (label == 1 && (kbar < 1 || kbar > spec.num_epochs)) {
    fail(ErrorCode::InvalidArgument, "initial epoch outside [1, K]");
  }
  const auto z = static_cast<std::size_t>(subtype);
  std::mt19937_64 rng(seed);
  PatientRecord rec;
  rec.id = id;
  rec.label = label;

  std::ostringstream num;
  num.precision(17);
  for (const auto& f : spec.features) {
    if (f.kind == FeatureKind::Categorical) {
      const auto& w = f.probabilities[z];
      std::discrete_distribution<std::size_t> d(w.begin(), w.end());
      rec.admission.raw[f.name] = f.levels[d(rng)];
    } else {
      std::normal_distribution<double> d(f.means[z], f.sds[z]);
      num.str("");
      num << d(rng);
      rec.admission.raw[f.name] = num.str();
    }
  }

  if (label == 1) {
    rec.end_time = (spec.num_epochs - kbar + 1) * spec.epoch_duration;
  } else {
    std::lognormal_distribution<double> stay(std::log(spec.stay_median), spec.stay_log_sd);
    rec.end_time = std::clamp(stay(rng), spec.stay_min, spec.stay_max);
  }

  std::uniform_real_distribution<double> gap(spec.gap_min, spec.gap_max);
  std::uniform_real_distribution<double> phase(0.0, spec.gap_min);
  std::vector<SampleTime> times;
  for (int s = 0; s < spec.dim(); ++s) {
    // deteriorating samples stay strictly inside the last epoch
    for (double t = phase(rng); label == 1 ? t < rec.end_time : t <= rec.end_time; t += gap(rng)) {
      times.push_back({s, t});
    }
  }
  const std::uint64_t path_seed = rng();
  rec.stream = label == 1 ? sample_path(spec.deteriorating[z], times, kbar, path_seed)
                          : sample_path(spec.stable[z], times, path_seed);
  return rec;
}

SyntheticCohort generate_cohort(const GenerativeSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  SyntheticCohort out;
  out.cohort.schema = spec.schema();
  const int width = static_cast<int>(std::to_string(std::max<std::size_t>(n, 1) - 1).size());
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(patient_seed(seed, i));
    const int z = draw_index(spec.subtype_prior, rng);
    std::bernoulli_distribution icu(spec.class_prior[z]);
    const int label = icu(rng) ? 1 : 0;
    const int kbar = label == 1 ? draw_index(spec.epoch_prior, rng) + 1 : 0;
    std::string id = std::to_string(i);
    id = "p" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    out.cohort.records.push_back(generate_patient(spec, id, z, label, kbar, rng()));
    out.truth.push_back({id, z, kbar});
  }
  // Encode admissions the way ingest would: medians impute numeric features.
  for (auto& f : out.cohort.schema.features) {
    if (f.kind != FeatureKind::Numeric) continue;
    std::vector<double> v;
    for (const auto& r : out.cohort.records) v.push_back(std::stod(r.admission.raw.at(f.name)));
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    f.impute_value = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  }
  for (auto& r : out.cohort.records) {
    r.admission.features = encode_admission(out.cohort.schema, r.admission.raw);
  }
  return out;
}

void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& truth) {
  out << "id\tsubtype\tinitial_epoch\n";
  for (const auto& t : truth) out << t.id << '\t' << t.subtype + 1 << '\t' << t.initial_epoch << '\n';
}

std::vector<GroundTruth> read_ground_truth(std::istream& in) {
  std::vector<GroundTruth> out;
  std::string line;
  if (!std::getline(in, line) || line != "id\tsubtype\tinitial_epoch") {
    fail(ErrorCode::ParseError, "ground truth: missing header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    GroundTruth t;
    if (!(ss >> t.id >> t.subtype >> t.initial_epoch)) {
      fail(ErrorCode::ParseError, "ground truth: bad row '" + line + "'");
    }
    t.subtype -= 1;
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixtures

namespace {

StationaryParams scalar_expert(double mean, double sd, double length_scale) {
  StationaryParams p;
  p.mean = Eigen::VectorXd::Constant(1, mean);
  p.kernel.length_scale = length_scale;
  p.corr = CorrelationFactor::diagonal(Eigen::VectorXd::Constant(1, sd));
  return p;
}

EpochParams drifting_expert(double start, double step, double sd, double length_scale, int k,
                            double epoch_duration) {
  EpochParams e;
  e.epoch_duration = epoch_duration;
  for (int i = 1; i <= k; ++i) e.epochs.push_back(scalar_expert(start + step * i, sd, length_scale));
  return e;
}

GenerativeSpec base_spec(int g) {
  GenerativeSpec s;
  s.streams = {"sbp"};
  s.subtype_prior = Eigen::VectorXd::Constant(g, 1.0 / g);
  s.class_prior = Eigen::VectorXd::Constant(g, 0.15);
  s.epoch_prior = Eigen::VectorXd::Constant(s.num_epochs, 1.0 / s.num_epochs);
  return s;
}

FeatureEmission age_feature(int g) {
  FeatureEmission f;
  f.name = "age";
  f.kind = FeatureKind::Numeric;
  f.means.assign(static_cast<std::size_t>(g), 62.0);
  f.sds.assign(static_cast<std::size_t>(g), 12.0);
  return f;
}

}  // namespace

GenerativeSpec homogeneous_fixture() {
  GenerativeSpec s = base_spec(1);
  s.stable = {scalar_expert(134.0, 2.0, 8.0)};
  s.deteriorating = {drifting_expert(134.0, -1.5, 2.0, 8.0, s.num_epochs, s.epoch_duration)};
  FeatureEmission gender{"gender", FeatureKind::Categorical, {"female", "male"}, {{0.5, 0.5}}, {}, {}};
  s.features = {gender, age_feature(1)};
  return s;
}

GenerativeSpec two_subtype_fixture() {
  GenerativeSpec s = base_spec(2);
  const double k = s.num_epochs;
  // Each deteriorating subtype drifts onto the other's stable level.
  s.stable = {scalar_expert(130.0, 2.0, 3.0), scalar_expert(138.0, 2.5, 3.0)};
  s.deteriorating = {drifting_expert(130.0, 8.0 / k, 2.0, 3.0, s.num_epochs, s.epoch_duration),
                     drifting_expert(138.0, -8.0 / k, 2.5, 3.0, s.num_epochs, s.epoch_duration)};
  FeatureEmission gender{"gender", FeatureKind::Categorical, {"female", "male"},
                         {{0.97, 0.03}, {0.03, 0.97}}, {}, {}};
  s.features = {gender, age_feature(2)};
  return s;
}

GenerativeSpec six_subtype_fixture() {
  constexpr int g = 6;
  GenerativeSpec s = base_spec(g);
  FeatureEmission unit{"unit", FeatureKind::Categorical, {}, {}, {}, {}};
  for (int z = 0; z < g; ++z) {
    const double mean = 120.0 + 6.0 * z;
    s.stable.push_back(scalar_expert(mean, 2.0, 8.0));
    s.deteriorating.push_back(drifting_expert(mean, -1.2, 2.0, 8.0, s.num_epochs, s.epoch_duration));
    unit.levels.push_back("u" + std::to_string(z + 1));
  }
  for (int z = 0; z < g; ++z) {
    std::vector<double> w(g, 0.02);
    w[static_cast<std::size_t>(z)] = 0.9;
    unit.probabilities.push_back(w);
  }
  s.features = {unit, age_feature(g)};
  return s;
}

GenerativeSpec epoch_sync_fixture() {
  GenerativeSpec s = base_spec(1);
  s.num_epochs = 3;
  s.epoch_prior = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  s.stable = {scalar_expert(110.0, 5.0, 6.0)};
  s.deteriorating = {drifting_expert(90.0, 10.0, 1.0, 6.0, 3, s.epoch_duration)};
  FeatureEmission gender{"gender", FeatureKind::Categorical, {"female", "male"}, {{0.5, 0.5}}, {}, {}};
  s.features = {gender};
  return s;
}

std::vector<std::string> fixture_names() {
  return {"homogeneous", "two-subtype", "six-subtype", "epoch-sync"};
}

GenerativeSpec fixture(const std::string& name) {
  if (name == "homogeneous") return homogeneous_fixture();
  if (name == "two-subtype") return two_subtype_fixture();
  if (name == "six-subtype") return six_subtype_fixture();
  if (name == "epoch-sync") return epoch_sync_fixture();
  fail(ErrorCode::InvalidArgument, "unknown fixture '" + name + "'");
}

}  // namespace mogp
