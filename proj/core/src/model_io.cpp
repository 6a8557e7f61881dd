#include "mogp/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mogp/error.hpp"

namespace mogp {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json expert_json(const StationaryParams& p) {
  return {{"mean", vec(p.mean)},
          {"length_scale", p.kernel.length_scale},
          {"amplitude", p.kernel.amplitude},
          {"corr", vec(p.corr.entries())}};
}

StationaryParams expert_from(const json& j) {
  StationaryParams p;
  p.mean = to_vec(j.at("mean"));
  p.kernel.length_scale = j.at("length_scale").get<double>();
  p.kernel.amplitude = j.at("amplitude").get<double>();
  p.corr = CorrelationFactor(static_cast<int>(p.mean.size()), to_vec(j.at("corr")));
  p.validate();
  return p;
}

json epoch_json(const EpochParams& e) {
  json epochs = json::array();
  for (const auto& p : e.epochs) epochs.push_back(expert_json(p));
  return {{"epoch_hours", e.epoch_duration}, {"epochs", epochs}};
}

EpochParams epoch_from(const json& j) {
  EpochParams e;
  e.epoch_duration = j.at("epoch_hours").get<double>();
  for (const auto& p : j.at("epochs")) e.epochs.push_back(expert_from(p));
  e.validate();
  return e;
}

json schema_json(const CohortSchema& s) {
  json features = json::array();
  for (const auto& f : s.features) {
    features.push_back({{"name", f.name},
                        {"kind", f.kind == FeatureKind::Numeric ? "numeric" : "categorical"},
                        {"levels", f.levels},
                        {"impute_value", f.impute_value}});
  }
  return {{"streams", s.streams}, {"features", features}};
}

FeatureKind kind_from(const json& j) {
  const auto k = j.get<std::string>();
  if (k == "numeric") return FeatureKind::Numeric;
  if (k == "categorical") return FeatureKind::Categorical;
  fail(ErrorCode::ParseError, "unknown feature kind '" + k + "'");
}

CohortSchema schema_from(const json& j) {
  CohortSchema s;
  s.streams = j.at("streams").get<std::vector<std::string>>();
  for (const auto& f : j.at("features")) {
    FeatureSpec fs;
    fs.name = f.at("name").get<std::string>();
    fs.kind = kind_from(f.at("kind"));
    fs.levels = f.at("levels").get<std::vector<std::string>>();
    fs.impute_value = f.at("impute_value").get<double>();
    s.features.push_back(std::move(fs));
  }
  return s;
}

json jitter_json(const JitterPolicy& j) {
  return {{"initial", j.initial}, {"max", j.max}, {"factor", j.factor}};
}

JitterPolicy jitter_from(const json& j) {
  return {j.at("initial").get<double>(), j.at("max").get<double>(), j.at("factor").get<double>()};
}

template <typename F>
auto guarded(const std::string& source, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, source + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaMismatch || e.code() == ErrorCode::ParseError) throw;
    fail(ErrorCode::ParseError, source + ": " + e.what());
  }
}

}  // namespace

std::string model_to_json(const TrainedModel& m) {
  json j;
  j["format"] = "mogp-model";
  j["version"] = kModelFormatVersion;
  j["dim"] = m.dim();
  j["num_subtypes"] = m.num_experts();
  j["num_epochs"] = m.num_epochs;
  j["epoch_hours"] = m.epoch_duration;
  j["schema"] = schema_json(m.schema);
  json stable = json::array();
  for (const auto& p : m.stable) stable.push_back(expert_json(p));
  j["stable"] = stable;
  json det = json::array();
  for (const auto& e : m.deteriorating.experts) det.push_back(epoch_json(e));
  j["deteriorating"] = det;
  j["class_prior"] = vec(m.deteriorating.class_prior);
  j["epoch_prior"] = vec(m.deteriorating.epoch_prior);
  j["subset_sizes"] = m.deteriorating.subset_sizes;
  json weights = json::array();
  for (Eigen::Index z = 0; z < m.rmodel.weights.rows(); ++z) {
    weights.push_back(vec(m.rmodel.weights.row(z).transpose()));
  }
  j["responsibility"] = {{"intercept", vec(m.rmodel.intercept)},
                         {"weights", weights},
                         {"active", m.rmodel.active},
                         {"ridge", m.rmodel.ridge}};
  j["global_prior"] = m.global_prior;
  j["stream_stats"] = {{"mean", vec(m.stream_stats.mean)}, {"sd", vec(m.stream_stats.sd)}};
  j["jitter"] = jitter_json(m.jitter);
  return j.dump(1);
}

TrainedModel model_from_json(const std::string& text, const std::string& source) {
  return guarded(source, [&] {
    const json j = json::parse(text);
    if (!j.is_object() || j.value("format", "") != "mogp-model") {
      fail(ErrorCode::SchemaMismatch, source + ": not a model file");
    }
    if (j.at("version").get<int>() != kModelFormatVersion) {
      fail(ErrorCode::SchemaMismatch, source + ": unsupported model version " +
                                          std::to_string(j.at("version").get<int>()));
    }
    TrainedModel m;
    m.schema = schema_from(j.at("schema"));
    m.num_epochs = j.at("num_epochs").get<int>();
    m.epoch_duration = j.at("epoch_hours").get<double>();
    for (const auto& p : j.at("stable")) m.stable.push_back(expert_from(p));
    for (const auto& e : j.at("deteriorating")) m.deteriorating.experts.push_back(epoch_from(e));
    m.deteriorating.class_prior = to_vec(j.at("class_prior"));
    m.deteriorating.epoch_prior = to_vec(j.at("epoch_prior"));
    m.deteriorating.subset_sizes = j.at("subset_sizes").get<std::vector<std::size_t>>();
    const json& r = j.at("responsibility");
    m.rmodel.intercept = to_vec(r.at("intercept"));
    const auto& w = r.at("weights");
    m.rmodel.weights.resize(static_cast<Eigen::Index>(w.size()), m.schema.encoded_width());
    for (std::size_t z = 0; z < w.size(); ++z) {
      const Eigen::VectorXd row = to_vec(w[z]);
      if (row.size() != m.rmodel.weights.cols()) {
        fail(ErrorCode::ParseError, source + ": responsibility weights do not match the schema");
      }
      m.rmodel.weights.row(static_cast<Eigen::Index>(z)) = row.transpose();
    }
    m.rmodel.active = r.at("active").get<std::vector<bool>>();
    m.rmodel.ridge = r.at("ridge").get<bool>();
    m.global_prior = j.at("global_prior").get<double>();
    m.stream_stats.mean = to_vec(j.at("stream_stats").at("mean"));
    m.stream_stats.sd = to_vec(j.at("stream_stats").at("sd"));
    m.jitter = jitter_from(j.at("jitter"));
    if (j.at("dim").get<int>() != m.dim() || j.at("num_subtypes").get<int>() != m.num_experts()) {
      fail(ErrorCode::ParseError, source + ": header disagrees with the model body");
    }
    m.validate();
    return m;
  });
}

void save_model(const TrainedModel& model, const std::string& path) {
  write_file_atomic(path, model_to_json(model) + "\n");
}

TrainedModel load_model(const std::string& path) { return model_from_json(read_file(path), path); }

std::string spec_to_json(const GenerativeSpec& s) {
  json j;
  j["streams"] = s.streams;
  j["epoch_hours"] = s.epoch_duration;
  j["num_epochs"] = s.num_epochs;
  j["subtype_prior"] = vec(s.subtype_prior);
  j["class_prior"] = vec(s.class_prior);
  json stable = json::array(), det = json::array(), feats = json::array();
  for (const auto& p : s.stable) stable.push_back(expert_json(p));
  for (const auto& e : s.deteriorating) det.push_back(epoch_json(e));
  for (const auto& f : s.features) {
    json jf = {{"name", f.name}, {"kind", f.kind == FeatureKind::Numeric ? "numeric" : "categorical"}};
    if (f.kind == FeatureKind::Categorical) {
      jf["levels"] = f.levels;
      jf["probabilities"] = f.probabilities;
    } else {
      jf["means"] = f.means;
      jf["sds"] = f.sds;
    }
    feats.push_back(jf);
  }
  j["stable"] = stable;
  j["deteriorating"] = det;
  j["features"] = feats;
  j["epoch_prior"] = vec(s.epoch_prior);
  j["gap_hours"] = {s.gap_min, s.gap_max};
  j["stay"] = {{"median", s.stay_median}, {"log_sd", s.stay_log_sd}, {"min", s.stay_min}, {"max", s.stay_max}};
  return j.dump(1);
}

GenerativeSpec spec_from_json(const std::string& text, const std::string& source) {
  return guarded(source, [&] {
    const json j = json::parse(text);
    GenerativeSpec s;
    s.streams = j.at("streams").get<std::vector<std::string>>();
    s.epoch_duration = j.at("epoch_hours").get<double>();
    s.num_epochs = j.at("num_epochs").get<int>();
    s.subtype_prior = to_vec(j.at("subtype_prior"));
    s.class_prior = to_vec(j.at("class_prior"));
    for (const auto& p : j.at("stable")) s.stable.push_back(expert_from(p));
    for (const auto& e : j.at("deteriorating")) s.deteriorating.push_back(epoch_from(e));
    for (const auto& jf : j.at("features")) {
      FeatureEmission f;
      f.name = jf.at("name").get<std::string>();
      f.kind = kind_from(jf.at("kind"));
      if (f.kind == FeatureKind::Categorical) {
        f.levels = jf.at("levels").get<std::vector<std::string>>();
        f.probabilities = jf.at("probabilities").get<std::vector<std::vector<double>>>();
      } else {
        f.means = jf.at("means").get<std::vector<double>>();
        f.sds = jf.at("sds").get<std::vector<double>>();
      }
      s.features.push_back(std::move(f));
    }
    s.epoch_prior = to_vec(j.at("epoch_prior"));
    if (j.contains("gap_hours")) {
      const auto g = j.at("gap_hours").get<std::vector<double>>();
      if (g.size() != 2) fail(ErrorCode::ParseError, source + ": gap_hours takes [min, max]");
      s.gap_min = g[0];
      s.gap_max = g[1];
    }
    if (j.contains("stay")) {
      const json& st = j.at("stay");
      s.stay_median = st.value("median", s.stay_median);
      s.stay_log_sd = st.value("log_sd", s.stay_log_sd);
      s.stay_min = st.value("min", s.stay_min);
      s.stay_max = st.value("max", s.stay_max);
    }
    s.validate();
    return s;
  });
}

GenerativeSpec load_spec(const std::string& path) { return spec_from_json(read_file(path), path); }

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) fail(ErrorCode::Io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot move output into '" + path + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mogp
