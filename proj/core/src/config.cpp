#include "mogp/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "mogp/error.hpp"

namespace mogp {

using nlohmann::json;

void Config::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::InvalidArgument, "config: " + what); };
  if (!(epoch_hours > 0.0)) bad("epoch_hours must be positive");
  if (num_epochs < 1) bad("num_epochs must be at least 1");
  if (!(em_tolerance > 0.0)) bad("em_tolerance must be positive");
  if (em_max_iterations < 1) bad("em_max_iterations must be at least 1");
  if (!(bayes_threshold > 0.0)) bad("bayes_threshold must be positive");
  if (max_subtypes < 1) bad("max_subtypes must be at least 1");
  if (forced_subtypes && *forced_subtypes < 1) bad("forced_subtypes must be at least 1");
  if (!(jitter.initial > 0.0) || jitter.max < jitter.initial || !(jitter.factor > 1.0)) {
    bad("jitter ladder must satisfy 0 < initial <= max and factor > 1");
  }
  if (fit_restarts < 1 || fit_max_iterations < 1 || mstep_max_iterations < 1) {
    bad("optimizer budgets must be at least 1");
  }
  if (!(fit_tolerance > 0.0)) bad("fit_tolerance must be positive");
  for (const double e : eta_grid) {
    if (!(e >= 0.0 && e <= 1.0)) bad("eta_grid entries must lie in [0, 1]");
  }
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) bad("target_tpr must lie in (0, 1]");
  for (const double h : horizons) {
    if (!(h >= 0.0) || !std::isfinite(h)) bad("horizons must be non-negative");
  }
  for (const double t : alarm_tprs) {
    if (!(t > 0.0 && t <= 1.0)) bad("alarm_tprs entries must lie in (0, 1]");
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Config parse_config(std::istream& in, const std::string& source) {
  Config c;
  try {
    const json j = json::parse(in);
    if (!j.is_object()) fail(ErrorCode::ParseError, source + ": config must be a JSON object");
    static const std::set<std::string> known{
        "epoch_hours", "num_epochs", "em_tolerance", "em_max_iterations", "bayes_threshold",
        "max_subtypes", "forced_subtypes", "jitter", "fit_restarts", "fit_max_iterations",
        "fit_tolerance", "mstep_max_iterations", "free_epoch_amplitude", "streams", "eta_grid",
        "target_tpr", "horizons", "alarm_tprs"};
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) fail(ErrorCode::ParseError, source + ": unknown config key '" + key + "'");
    }
    read(j, "epoch_hours", c.epoch_hours);
    read(j, "num_epochs", c.num_epochs);
    read(j, "em_tolerance", c.em_tolerance);
    read(j, "em_max_iterations", c.em_max_iterations);
    if (j.contains("bayes_threshold")) {
      const auto& b = j.at("bayes_threshold");
      // JSON has no infinity literal
      c.bayes_threshold = b.is_string() && b.get<std::string>() == "inf"
                              ? std::numeric_limits<double>::infinity()
                              : b.get<double>();
    }
    read(j, "max_subtypes", c.max_subtypes);
    if (j.contains("forced_subtypes") && !j.at("forced_subtypes").is_null()) {
      c.forced_subtypes = j.at("forced_subtypes").get<int>();
    }
    if (j.contains("jitter")) {
      const json& jt = j.at("jitter");
      read(jt, "initial", c.jitter.initial);
      read(jt, "max", c.jitter.max);
      read(jt, "factor", c.jitter.factor);
    }
    read(j, "fit_restarts", c.fit_restarts);
    read(j, "fit_max_iterations", c.fit_max_iterations);
    read(j, "fit_tolerance", c.fit_tolerance);
    read(j, "mstep_max_iterations", c.mstep_max_iterations);
    read(j, "free_epoch_amplitude", c.free_epoch_amplitude);
    read(j, "streams", c.streams);
    read(j, "eta_grid", c.eta_grid);
    read(j, "target_tpr", c.target_tpr);
    read(j, "horizons", c.horizons);
    read(j, "alarm_tprs", c.alarm_tprs);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, source + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, source + ": " + e.what());
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config file '" + path + "'");
  return parse_config(in, path);
}

std::string config_to_json(const Config& c) {
  json j;
  j["epoch_hours"] = c.epoch_hours;
  j["num_epochs"] = c.num_epochs;
  j["em_tolerance"] = c.em_tolerance;
  j["em_max_iterations"] = c.em_max_iterations;
  if (std::isinf(c.bayes_threshold)) j["bayes_threshold"] = "inf";
  else j["bayes_threshold"] = c.bayes_threshold;
  j["max_subtypes"] = c.max_subtypes;
  j["forced_subtypes"] = c.forced_subtypes ? json(*c.forced_subtypes) : json(nullptr);
  j["jitter"] = {{"initial", c.jitter.initial}, {"max", c.jitter.max}, {"factor", c.jitter.factor}};
  j["fit_restarts"] = c.fit_restarts;
  j["fit_max_iterations"] = c.fit_max_iterations;
  j["fit_tolerance"] = c.fit_tolerance;
  j["mstep_max_iterations"] = c.mstep_max_iterations;
  j["free_epoch_amplitude"] = c.free_epoch_amplitude;
  j["streams"] = c.streams;
  j["eta_grid"] = c.eta_grid;
  j["target_tpr"] = c.target_tpr;
  j["horizons"] = c.horizons;
  j["alarm_tprs"] = c.alarm_tprs;
  return j.dump(2);
}

}  // namespace mogp
