#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mogp/gp.hpp"

namespace mogp {

/// Training and evaluation settings, read from a JSON object whose keys
/// mirror the member names. Unknown keys are rejected.
struct Config {
  double epoch_hours = 24.0;
  int num_epochs = 6;
  double em_tolerance = 1e-4;
  int em_max_iterations = 200;
  double bayes_threshold = 1.0;
  int max_subtypes = 12;
  std::optional<int> forced_subtypes;
  JitterPolicy jitter;
  int fit_restarts = 5;
  int fit_max_iterations = 200;
  double fit_tolerance = 1e-6;
  int mstep_max_iterations = 50;
  /// Let each deteriorating epoch fit its own kernel amplitude.
  bool free_epoch_amplitude = false;
  std::vector<std::string> streams;  // empty keeps every stream
  std::vector<double> eta_grid;      // empty means 0, 0.01, ..., 1
  double target_tpr = 0.5;
  std::vector<double> horizons;  // hours; empty means 0, 2, ..., 48
  std::vector<double> alarm_tprs{0.4, 0.5, 0.6, 0.7, 0.8};

  void validate() const;
};

Config parse_config(std::istream& in, const std::string& source = "<config>");
Config load_config(const std::string& path);
std::string config_to_json(const Config& config);

}  // namespace mogp
