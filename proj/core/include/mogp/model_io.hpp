#pragma once

#include <iosfwd>
#include <string>

#include "mogp/risk.hpp"
#include "mogp/synth.hpp"

namespace mogp {

inline constexpr int kModelFormatVersion = 1;

/// JSON model document. Doubles are written with enough digits to be read
/// back bit-identically.
std::string model_to_json(const TrainedModel& model);
/// Throws ParseError on malformed input, SchemaMismatch on a foreign format
/// or version.
TrainedModel model_from_json(const std::string& text, const std::string& source = "<model>");

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

std::string spec_to_json(const GenerativeSpec& spec);
GenerativeSpec spec_from_json(const std::string& text, const std::string& source = "<spec>");
GenerativeSpec load_spec(const std::string& path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace mogp
