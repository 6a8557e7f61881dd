#include "mogp/error.hpp"

namespace mogp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::UnlabeledRecord: return "UnlabeledRecord";
    case ErrorCode::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorCode::EpochOverflow: return "EpochOverflow";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DegenerateCluster: return "DegenerateCluster";
    case ErrorCode::AllOffsetsInvalid: return "AllOffsetsInvalid";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::NoNegatives: return "NoNegatives";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace mogp
