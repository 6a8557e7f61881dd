#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "mogp/model_io.hpp"
#include "mogp/pipeline.hpp"

namespace mogp {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / "mogp_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file_atomic(p("fast.json"), R"({"max_subtypes": 2, "fit_restarts": 1, "num_epochs": 3})");
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }

  static std::string p(const std::string& name) { return (dir / name).string(); }

  int run(std::vector<std::string> args) {
    out.str("");
    err.str("");
    args.insert(args.begin(), "mogp");
    return cli::run(args, out, err);
  }

  static fs::path dir;
  std::ostringstream out, err;
};

fs::path Cli::dir;

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}), cli::kInputError);
  EXPECT_EQ(run({"train"}), cli::kInputError);
  EXPECT_EQ(run({"bogus"}), cli::kInputError);
  EXPECT_EQ(run({"synth", "--out", p("x.mogp")}), cli::kInputError);
  EXPECT_EQ(run({"synth", "--fixture", "nope", "--out", p("x.mogp")}), cli::kInputError);
  EXPECT_EQ(run({"--help"}), cli::kOk);
  EXPECT_NE(out.str().find("train"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli::exit_code_for(ErrorCode::ParseError), cli::kInputError);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::Io), cli::kInputError);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::SchemaMismatch), cli::kSchemaMismatch);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::NonPositiveDefinite), cli::kNumericalFailure);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::DegenerateCluster), cli::kNumericalFailure);
}

TEST_F(Cli, EndToEnd) {
  ASSERT_EQ(run({"synth", "--fixture", "homogeneous", "-n", "60", "--seed", "1", "--out", p("train.mogp"),
                 "--truth", p("truth.tsv")}),
            cli::kOk)
      << err.str();
  EXPECT_NE(out.str().find("patients\t60"), std::string::npos);
  ASSERT_EQ(run({"synth", "--fixture", "homogeneous", "-n", "30", "--seed", "2", "--out", p("test.mogp")}),
            cli::kOk);
  ASSERT_EQ(run({"train", "--cohort", p("train.mogp"), "--config", p("fast.json"), "--seed", "3", "--out",
                 p("model.json")}),
            cli::kOk)
      << err.str();
  EXPECT_NE(out.str().find("selected_G"), std::string::npos);

  ASSERT_EQ(run({"score", "--model", p("model.json"), "--stream", p("test.mogp"), "--eta", "0.5", "--out",
                 p("traj.tsv")}),
            cli::kOk)
      << err.str();

  // the CLI table is byte-identical to scoring through the library
  const TrainedModel model = load_model(p("model.json"));
  IngestOptions ingest;
  ingest.mode = IngestMode::Scoring;
  ingest.expected = &model.schema;
  const Cohort test = load_cohort(p("test.mogp"), ingest);
  std::ostringstream lib;
  lib << cli::trajectory_header(model.num_experts(), model.num_epochs) << '\n';
  ScoreOptions opt;
  opt.threshold = 0.5;
  for (const auto& r : test.records) cli::write_trajectory_rows(lib, r.id, score_stream(model, r, opt));
  EXPECT_EQ(read_file(p("traj.tsv")), lib.str());

  ASSERT_EQ(run({"evaluate", "--model", p("model.json"), "--cohort", p("test.mogp"), "--out-dir", p("eval"),
                 "--baseline"}),
            cli::kOk)
      << err.str();
  EXPECT_TRUE(fs::exists(p("eval/roc.tsv")));
  EXPECT_TRUE(fs::exists(p("eval/baseline_roc.tsv")));
  EXPECT_TRUE(fs::exists(p("eval/false_alarms.tsv")));
  EXPECT_NE(out.str().find("personalized\t"), std::string::npos);

  // a cohort with other streams cannot be scored by this model
  write_file_atomic(p("other.mogp"), "@cohort 1\n@streams zz\n@patient a label=? t_end=5\nzz 1 2\n");
  EXPECT_EQ(run({"score", "--model", p("model.json"), "--stream", p("other.mogp"), "--out", p("o.tsv")}),
            cli::kSchemaMismatch);
  write_file_atomic(p("broken.mogp"), "@cohort 1\n@streams x\n@patient a label=0\n");
  EXPECT_EQ(run({"train", "--cohort", p("broken.mogp"), "--out", p("m2.json"), "--seed", "1"}),
            cli::kInputError);
}

}  // namespace
}  // namespace mogp
