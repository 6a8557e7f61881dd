#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "mogp/cohort.hpp"
#include "mogp/config.hpp"
#include "mogp/eval.hpp"
#include "mogp/model_io.hpp"
#include "mogp/pipeline.hpp"
#include "mogp/synth.hpp"

namespace mogp::cli {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaMismatch:
      return kSchemaMismatch;
    case ErrorCode::NonPositiveDefinite:
    case ErrorCode::EpochOverflow:
    case ErrorCode::DegenerateData:
    case ErrorCode::DegenerateCluster:
    case ErrorCode::AllOffsetsInvalid:
      return kNumericalFailure;
    default:
      return kInputError;
  }
}

std::string trajectory_header(int num_experts, int num_epochs) {
  std::string h = "patient\ttime\trisk\talarm";
  for (int z = 1; z <= num_experts; ++z) h += "\trisk_" + std::to_string(z);
  for (int k = 1; k <= num_epochs; ++k) h += "\tepoch_" + std::to_string(k);
  return h;
}

void write_trajectory_rows(std::ostream& out, const std::string& patient,
                           const RiskTrajectory& trajectory) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& p : trajectory.points) {
    const bool alarm = trajectory.stopping_time && *trajectory.stopping_time == p.time;
    out << patient << '\t' << p.time << '\t' << p.risk << '\t' << (alarm ? 1 : 0);
    for (Eigen::Index z = 0; z < p.expert_risks.size(); ++z) out << '\t' << p.expert_risks[z];
    for (Eigen::Index k = 0; k < p.epoch_posterior.size(); ++k) out << '\t' << p.epoch_posterior[k];
    out << '\n';
  }
  out.precision(old);
}

namespace {

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed, std::ostream& err) {
  if (seed) return *seed;
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  err << "seed: " << s << '\n';
  return s;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

Config config_or_default(const std::string& path) {
  return path.empty() ? Config{} : load_config(path);
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string cohort, config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, Streams io) {
  const Config config = config_or_default(a.config);
  IngestOptions ingest;
  ingest.stream_whitelist = config.streams;
  const Cohort cohort = load_cohort(a.cohort, ingest);
  const std::uint64_t seed = resolve_seed(a.seed, io.err);
  const TrainOutcome t = train_model(cohort, config, seed);
  save_model(t.model, a.out);

  io.out << "selected_G\t" << t.model.num_experts() << "\n\n";
  io.out << "G\tq_star\tpenalty\tlog_bayes_factor\n";
  for (const auto& r : t.selection.rows) {
    io.out << r.num_experts << '\t' << fmt(r.q_star) << '\t' << fmt(r.penalty) << '\t'
           << (std::isnan(r.log_bayes_factor) ? "NA" : fmt(r.log_bayes_factor)) << '\n';
  }
  io.out << "\nstep\tseconds\n";
  for (const auto& [step, secs] : t.timings) io.out << step << '\t' << fmt(secs) << '\n';
  io.out << "\nrank\tfeature\tcoefficient\n";
  for (const auto& r : t.importance) {
    io.out << r.rank << '\t' << r.feature << '\t' << std::fixed << std::setprecision(4)
           << r.coefficient << std::defaultfloat << '\n';
  }
  for (const auto& w : t.warnings) io.err << "warning: " << w << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string model, stream, out;
  std::optional<double> eta;
  std::optional<double> interval;
};

int cmd_score(const ScoreArgs& a, Streams io) {
  const TrainedModel model = load_model(a.model);
  IngestOptions ingest;
  ingest.mode = IngestMode::Scoring;
  ingest.expected = &model.schema;
  const Cohort cohort = load_cohort(a.stream, ingest);
  ScoreOptions options{a.eta, a.interval};

  std::ostringstream table;
  table << trajectory_header(model.num_experts(), model.num_epochs) << '\n';
  for (const auto& r : cohort.records) {
    const RiskTrajectory traj = score_stream(model, r, options);
    write_trajectory_rows(table, r.id, traj);
    if (a.eta) {
      io.out << r.id << "\tT_s\t"
             << (traj.stopping_time ? fmt(*traj.stopping_time) : std::string("none")) << '\n';
    }
  }
  write_file_atomic(a.out, table.str());
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model, cohort, out_dir, config, sweep_train;
  std::vector<double> grid;
  bool baseline = false;
  int g_max = 8;
  std::optional<std::uint64_t> seed;
};

std::string roc_table(const RocCurve& curve) {
  std::ostringstream ss;
  ss << "eta\ttpr\tppv\ttnr\tfpr\tfalse_per_true\n";
  for (const auto& r : curve.rows) {
    const auto& c = r.confusion;
    ss << fmt(r.threshold) << '\t' << fmt(c.tpr) << '\t' << fmt(c.ppv) << '\t' << fmt(c.tnr) << '\t'
       << fmt(c.fpr) << '\t' << fmt(c.false_per_true) << '\n';
  }
  return ss.str();
}

std::string timeliness_table(const std::vector<TimelinessRow>& rows) {
  std::ostringstream ss;
  ss << "horizon_hours\teta\ttpr\tppv\tmedian_lead_hours\n";
  for (const auto& r : rows) {
    ss << fmt(r.horizon) << '\t' << fmt(r.threshold) << '\t' << fmt(r.tpr) << '\t' << fmt(r.ppv)
       << '\t' << fmt(r.median_lead) << '\n';
  }
  return ss.str();
}

std::string false_alarm_text(const std::vector<FalseAlarmRow>& rows) {
  std::ostringstream ss;
  ss << "target_tpr\teta\ttpr\tppv\tfalse_alarms_per_true_alarm\n";
  for (const auto& r : rows) {
    ss << fmt(r.target_tpr) << '\t' << fmt(r.threshold) << '\t' << fmt(r.confusion.tpr) << '\t'
       << fmt(r.confusion.ppv) << '\t' << fmt(r.confusion.false_per_true) << '\n';
  }
  return ss.str();
}

int cmd_evaluate(const EvaluateArgs& a, Streams io) {
  const Config config = config_or_default(a.config);
  const TrainedModel model = load_model(a.model);
  IngestOptions ingest;
  ingest.mode = IngestMode::Training;  // outcomes are required
  ingest.expected = &model.schema;
  const Cohort cohort = load_cohort(a.cohort, ingest);

  std::vector<double> grid = !a.grid.empty() ? a.grid : config.eta_grid;
  if (grid.empty()) grid = default_grid();
  const std::vector<double> horizons = config.horizons.empty() ? default_horizons() : config.horizons;
  std::filesystem::create_directories(a.out_dir);
  const auto path = [&](const char* name) { return (std::filesystem::path(a.out_dir) / name).string(); };

  const auto scores = score_cohort(model, cohort.records);
  const RocCurve roc = sweep_roc(scores, grid);
  write_file_atomic(path("roc.tsv"), roc_table(roc));
  write_file_atomic(path("false_alarms.tsv"), false_alarm_text(false_alarm_table(scores, config.alarm_tprs)));
  try {
    write_file_atomic(path("timeliness.tsv"),
                      timeliness_table(timeliness_curve(scores, config.target_tpr, horizons)));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TargetUnreachable) throw;
    io.err << "warning: " << e.what() << '\n';
  }

  std::ostringstream auc;
  auc << "scorer\tauc\n" << "personalized\t" << fmt(roc.auc) << '\n';
  if (a.baseline) {
    const auto base = score_cohort_baseline(model, cohort.records);
    const RocCurve broc = sweep_roc(base, grid);
    write_file_atomic(path("baseline_roc.tsv"), roc_table(broc));
    auc << "baseline\t" << fmt(broc.auc) << '\n';
  }
  write_file_atomic(path("auc.tsv"), auc.str());
  io.out << auc.str();

  if (!a.sweep_train.empty()) {
    IngestOptions train_ingest;
    train_ingest.expected = &model.schema;
    const Cohort train = load_cohort(a.sweep_train, train_ingest);
    const std::uint64_t seed = resolve_seed(a.seed, io.err);
    std::ostringstream sweep;
    sweep << "G\tauc\n";
    int best_g = 0;
    double best_auc = -1.0;
    for (int g = 1; g <= a.g_max; ++g) {
      Config c = config;
      c.forced_subtypes = g;
      const TrainOutcome t = train_model(train, c, seed);
      const double value = auc_of(score_cohort(t.model, cohort.records));
      sweep << g << '\t' << fmt(value) << '\n';
      if (value > best_auc) best_auc = value, best_g = g;
    }
    write_file_atomic(path("g_sweep.tsv"), sweep.str());
    io.out << "\n" << sweep.str() << "best_G\t" << best_g << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string fixture, spec, out, truth, dump_spec;
  std::size_t n = 400;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, Streams io) {
  const GenerativeSpec spec = a.spec.empty() ? fixture(a.fixture) : load_spec(a.spec);
  if (!a.dump_spec.empty()) write_file_atomic(a.dump_spec, spec_to_json(spec) + "\n");
  const std::uint64_t seed = resolve_seed(a.seed, io.err);
  const SyntheticCohort sc = generate_cohort(spec, a.n, seed);
  std::ostringstream cohort;
  write_cohort(cohort, sc.cohort);
  write_file_atomic(a.out, cohort.str());
  if (!a.truth.empty()) {
    std::ostringstream truth;
    write_ground_truth(truth, sc.truth);
    write_file_atomic(a.truth, truth.str());
  }
  std::size_t icu = 0;
  for (const auto& r : sc.cohort.records) icu += r.label == 1;
  io.out << "patients\t" << sc.cohort.records.size() << "\nicu\t" << icu << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personalized risk scoring with mixtures of multitask GP experts", "mogp"};
  app.require_subcommand(1);
  Streams io{out, err};

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Learn a model from a labeled cohort");
  t->add_option("--cohort", train.cohort, "Labeled cohort file")->required()->check(CLI::ExistingFile);
  t->add_option("--config", train.config, "JSON configuration")->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Model file to write")->required();
  t->add_option("--seed", train.seed, "Random seed (default: entropy, printed)");

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score patient streams with a trained model");
  s->add_option("--model", score.model, "Model file")->required()->check(CLI::ExistingFile);
  s->add_option("--stream", score.stream, "Cohort file with the patients to score")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("--eta", score.eta, "Alarm threshold in [0, 1]")->check(CLI::Range(0.0, 1.0));
  s->add_option("--interval", score.interval, "Also re-score every this many hours")
      ->check(CLI::PositiveNumber);
  s->add_option("--out", score.out, "Trajectory table to write")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "ROC, timeliness and false-alarm tables");
  e->add_option("--model", ev.model, "Model file")->required()->check(CLI::ExistingFile);
  e->add_option("--cohort", ev.cohort, "Labeled test cohort")->required()->check(CLI::ExistingFile);
  e->add_option("--out-dir", ev.out_dir, "Directory for the tables")->required();
  e->add_option("--config", ev.config, "JSON configuration")->check(CLI::ExistingFile);
  e->add_option("--grid", ev.grid, "Threshold grid (overrides config)")->delimiter(',');
  e->add_flag("--baseline", ev.baseline, "Also evaluate the instantaneous-threshold baseline");
  e->add_option("--g-sweep", ev.sweep_train, "Training cohort for an AUC-vs-G sweep")
      ->check(CLI::ExistingFile);
  e->add_option("--g-max", ev.g_max, "Largest G in the sweep")->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed, "Random seed for the sweep");

  SynthArgs sy;
  auto* g = app.add_subcommand("synth", "Generate a synthetic cohort");
  auto* fx = g->add_option("--fixture", sy.fixture, "Built-in fixture")
                 ->check(CLI::IsMember(fixture_names()));
  auto* sp = g->add_option("--spec", sy.spec, "Generative spec (JSON)")->check(CLI::ExistingFile);
  fx->excludes(sp);
  g->add_option("-n,--patients", sy.n, "Number of patients");
  g->add_option("--out", sy.out, "Cohort file to write")->required();
  g->add_option("--truth", sy.truth, "Ground-truth sidecar to write");
  g->add_option("--dump-spec", sy.dump_spec, "Write the generative spec as JSON");
  g->add_option("--seed", sy.seed, "Random seed (default: entropy, printed)");

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return kInputError;
  }

  try {
    if (t->parsed()) return cmd_train(train, io);
    if (s->parsed()) return cmd_score(score, io);
    if (e->parsed()) return cmd_evaluate(ev, io);
    if (g->parsed()) {
      if (sy.fixture.empty() && sy.spec.empty()) {
        err << "error: synth needs --fixture or --spec\n";
        return kInputError;
      }
      return cmd_synth(sy, io);
    }
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return exit_code_for(ex.code());
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: Io: " << ex.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace mogp::cli
