#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mogp/cohort.hpp"
#include "mogp/error.hpp"

namespace mogp {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

struct RawPatient {
  std::string id;
  std::size_t line = 0;
  std::optional<int> label;
  double end_time = 0.0;
  std::map<std::string, std::string> admission;
  std::vector<std::pair<std::string, Sample>> samples;  // file stream name + sample
};

class Parser {
 public:
  Parser(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void run() {
    std::string line;
    bool header_seen = false;
    while (std::getline(in_, line)) {
      ++lineno_;
      const auto toks = split_ws(line);
      if (toks.empty() || toks[0][0] == '#') continue;
      if (!header_seen) {
        if (toks[0] != "@cohort" || toks.size() != 2 || toks[1] != "1") {
          error("expected '@cohort 1' header");
        }
        header_seen = true;
        continue;
      }
      if (toks[0] == "@streams") {
        if (!patients.empty()) error("@streams must precede patients");
        streams.assign(toks.begin() + 1, toks.end());
      } else if (toks[0] == "@feature") {
        parse_feature(toks);
      } else if (toks[0] == "@patient") {
        parse_patient(toks);
      } else if (toks[0][0] == '@') {
        error("unknown directive '" + toks[0] + "'");
      } else {
        parse_sample(toks);
      }
    }
    if (!header_seen) error("missing '@cohort 1' header");
  }

  std::vector<std::string> streams;
  std::vector<FeatureSpec> features;
  std::vector<RawPatient> patients;

 private:
  [[noreturn]] void error(const std::string& what, const std::string& record = {}) const {
    std::ostringstream msg;
    msg << source_ << ":" << lineno_;
    if (!record.empty()) msg << " (record '" << record << "')";
    msg << ": " << what;
    fail(ErrorCode::ParseError, msg.str());
  }

  void parse_feature(const std::vector<std::string>& toks) {
    if (!patients.empty()) error("@feature must precede patients");
    if (toks.size() < 3) error("@feature needs a name and a kind");
    FeatureSpec f;
    f.name = toks[1];
    if (toks[2] == "numeric") {
      if (toks.size() != 3) error("numeric feature takes no levels");
      f.kind = FeatureKind::Numeric;
    } else if (toks[2] == "categorical") {
      f.kind = FeatureKind::Categorical;
      f.levels.assign(toks.begin() + 3, toks.end());
      if (f.levels.empty()) error("categorical feature '" + f.name + "' declares no levels");
    } else {
      error("feature kind must be numeric or categorical");
    }
    for (const auto& g : features) {
      if (g.name == f.name) error("duplicate feature '" + f.name + "'");
    }
    features.push_back(std::move(f));
  }

  void parse_patient(const std::vector<std::string>& toks) {
    if (toks.size() < 2) error("@patient needs an id");
    RawPatient p;
    p.id = toks[1];
    p.line = lineno_;
    bool have_end = false;
    for (std::size_t i = 2; i < toks.size(); ++i) {
      const auto eq = toks[i].find('=');
      if (eq == std::string::npos) error("expected key=value, got '" + toks[i] + "'", p.id);
      const std::string key = toks[i].substr(0, eq);
      const std::string value = toks[i].substr(eq + 1);
      if (key == "label") {
        if (value == "?" || value.empty()) {
          p.label.reset();
        } else if (value == "0" || value == "1") {
          p.label = value == "1" ? 1 : 0;
        } else {
          error("label must be 0, 1 or ?", p.id);
        }
      } else if (key == "t_end") {
        const auto v = parse_double(value);
        if (!v || !std::isfinite(*v) || *v < 0.0) error("t_end must be a non-negative number", p.id);
        p.end_time = *v;
        have_end = true;
      } else {
        const bool declared = std::any_of(features.begin(), features.end(),
                                          [&](const FeatureSpec& f) { return f.name == key; });
        if (!declared) error("undeclared admission feature '" + key + "'", p.id);
        p.admission[key] = value;
      }
    }
    if (!have_end) error("missing t_end", p.id);
    patients.push_back(std::move(p));
  }

  void parse_sample(const std::vector<std::string>& toks) {
    if (patients.empty()) error("sample row before any @patient");
    RawPatient& p = patients.back();
    if (toks.size() != 3) error("sample rows are '<stream> <time> <value>'", p.id);
    if (std::find(streams.begin(), streams.end(), toks[0]) == streams.end()) {
      error("unknown stream '" + toks[0] + "'", p.id);
    }
    const auto t = parse_double(toks[1]);
    const auto v = parse_double(toks[2]);
    if (!t || !std::isfinite(*t)) error("sample time is not a finite number", p.id);
    if (*t < 0.0) error("negative sample time " + toks[1], p.id);
    if (*t > p.end_time) error("sample time " + toks[1] + " after t_end", p.id);
    if (!v || !std::isfinite(*v)) error("sample value is not a finite number", p.id);
    p.samples.push_back({toks[0], Sample{0, *t, *v}});
  }

  std::istream& in_;
  std::string source_;
  std::size_t lineno_ = 0;
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

CohortSchema resolve_schema(const Parser& parsed, const IngestOptions& options) {
  const CohortSchema* expected = options.expected;
  CohortSchema file;
  file.streams = parsed.streams;
  file.features = parsed.features;
  if (!expected) {
    if (!options.stream_whitelist.empty()) {
      for (const auto& s : options.stream_whitelist) {
        if (!file.stream_index(s)) {
          fail(ErrorCode::SchemaMismatch, "whitelisted stream '" + s + "' not in cohort");
        }
      }
      file.streams = options.stream_whitelist;
    }
    for (auto& f : file.features) {
      if (f.kind != FeatureKind::Numeric) continue;
      std::vector<double> seen;
      for (const auto& p : parsed.patients) {
        const auto it = p.admission.find(f.name);
        if (it == p.admission.end() || is_missing_value(it->second)) continue;
        if (const auto v = parse_double(it->second)) seen.push_back(*v);
      }
      f.impute_value = median(std::move(seen));
    }
    return file;
  }
  for (const auto& s : expected->streams) {
    if (!file.stream_index(s)) fail(ErrorCode::SchemaMismatch, "cohort lacks stream '" + s + "'");
  }
  for (const auto& ef : expected->features) {
    const auto it = std::find_if(file.features.begin(), file.features.end(),
                                 [&](const FeatureSpec& f) { return f.name == ef.name; });
    if (it == file.features.end()) {
      fail(ErrorCode::SchemaMismatch, "cohort lacks admission feature '" + ef.name + "'");
    }
    if (it->kind != ef.kind) {
      fail(ErrorCode::SchemaMismatch, "admission feature '" + ef.name + "' changed kind");
    }
    for (const auto& lvl : it->levels) {
      if (std::find(ef.levels.begin(), ef.levels.end(), lvl) == ef.levels.end()) {
        fail(ErrorCode::SchemaMismatch,
             "admission feature '" + ef.name + "' has unexpected level '" + lvl + "'");
      }
    }
  }
  return *expected;
}

}  // namespace

Cohort read_cohort(std::istream& in, const IngestOptions& options, const std::string& source) {
  Parser parser(in, source);
  parser.run();
  if (parser.patients.empty()) fail(ErrorCode::EmptyCohort, source + " contains no patients");

  Cohort cohort;
  cohort.schema = resolve_schema(parser, options);
  const int dim = cohort.schema.dim();
  if (dim == 0) fail(ErrorCode::SchemaMismatch, source + " declares no streams");

  cohort.records.reserve(parser.patients.size());
  for (auto& p : parser.patients) {
    if (options.mode == IngestMode::Training && !p.label) {
      fail(ErrorCode::UnlabeledRecord,
           source + ":" + std::to_string(p.line) + ": record '" + p.id + "' has no label");
    }
    std::vector<Sample> samples;
    samples.reserve(p.samples.size());
    for (auto& [name, s] : p.samples) {
      const auto idx = cohort.schema.stream_index(name);
      if (!idx) continue;  // not whitelisted
      s.stream = *idx;
      samples.push_back(s);
    }
    PatientRecord rec;
    rec.id = std::move(p.id);
    rec.label = p.label;
    rec.end_time = p.end_time;
    rec.stream = ObservationSet(dim, std::move(samples));
    rec.admission.features = encode_admission(cohort.schema, p.admission);
    rec.admission.raw = std::move(p.admission);
    cohort.records.push_back(std::move(rec));
  }
  return cohort;
}

Cohort load_cohort(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open cohort file '" + path + "'");
  return read_cohort(in, options, path);
}

void write_cohort(std::ostream& out, const Cohort& cohort) {
  const auto old_precision = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "@cohort 1\n@streams";
  for (const auto& s : cohort.schema.streams) out << ' ' << s;
  out << '\n';
  for (const auto& f : cohort.schema.features) {
    out << "@feature " << f.name << ' '
        << (f.kind == FeatureKind::Numeric ? "numeric" : "categorical");
    for (const auto& l : f.levels) out << ' ' << l;
    out << '\n';
  }
  for (const auto& r : cohort.records) {
    out << "@patient " << r.id << " label=";
    if (r.label) out << *r.label;
    else out << '?';
    out << " t_end=" << r.end_time;
    for (const auto& f : cohort.schema.features) {
      const auto it = r.admission.raw.find(f.name);
      out << ' ' << f.name << '=' << (it == r.admission.raw.end() ? "NA" : it->second);
    }
    out << '\n';
    for (const auto& s : r.stream.samples()) {
      out << cohort.schema.streams[static_cast<std::size_t>(s.stream)] << ' ' << s.time << ' '
          << s.value << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace mogp
