#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mogp/error.hpp"
#include "mogp/risk.hpp"

namespace mogp::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kSchemaMismatch = 3, kNumericalFailure = 4 };

int exit_code_for(ErrorCode code);

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Trajectory table rows for one patient, shared by `score` and the tests.
void write_trajectory_rows(std::ostream& out, const std::string& patient,
                           const RiskTrajectory& trajectory);
std::string trajectory_header(int num_experts, int num_epochs);

}  // namespace mogp::cli
