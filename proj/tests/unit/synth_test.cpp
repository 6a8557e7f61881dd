#include <sstream>

#include <gtest/gtest.h>

#include "mogp/error.hpp"
#include "mogp/synth.hpp"

namespace mogp {
namespace {

TEST(Synth, FixturesValidate) {
  for (const auto& name : fixture_names()) {
    const GenerativeSpec s = fixture(name);
    EXPECT_NO_THROW(s.validate()) << name;
  }
  EXPECT_THROW(fixture("nope"), Error);
}

TEST(Synth, DeterministicPerSeed) {
  const GenerativeSpec spec = two_subtype_fixture();
  const auto a = generate_cohort(spec, 20, 7);
  const auto b = generate_cohort(spec, 20, 7);
  const auto c = generate_cohort(spec, 20, 8);
  std::ostringstream sa, sb, sc;
  write_cohort(sa, a.cohort);
  write_cohort(sb, b.cohort);
  write_cohort(sc, c.cohort);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str(), sc.str());
}

TEST(Synth, PrefixStable) {
  // patient n depends only on (seed, n)
  const GenerativeSpec spec = two_subtype_fixture();
  const auto small = generate_cohort(spec, 5, 3);
  const auto big = generate_cohort(spec, 50, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(small.truth[i].subtype, big.truth[i].subtype);
    EXPECT_EQ(small.cohort.records[i].stream.size(), big.cohort.records[i].stream.size());
  }
}

TEST(Synth, DeterioratingStaysMatchInitialEpoch) {
  const GenerativeSpec spec = epoch_sync_fixture();
  const auto sc = generate_cohort(spec, 200, 11);
  int icu = 0;
  for (std::size_t i = 0; i < sc.truth.size(); ++i) {
    const auto& r = sc.cohort.records[i];
    const auto& t = sc.truth[i];
    if (*r.label == 1) {
      ++icu;
      EXPECT_GE(t.initial_epoch, 1);
      EXPECT_DOUBLE_EQ(r.end_time, (spec.num_epochs - t.initial_epoch + 1) * spec.epoch_duration);
      for (const auto& s : r.stream.samples()) EXPECT_LT(s.time, r.end_time);
    } else {
      EXPECT_EQ(t.initial_epoch, 0);
      EXPECT_GE(r.end_time, spec.stay_min);
      for (const auto& s : r.stream.samples()) EXPECT_LE(s.time, r.end_time);
    }
  }
  EXPECT_GT(icu, 0);
}

TEST(Synth, GroundTruthRoundTrip) {
  const auto sc = generate_cohort(homogeneous_fixture(), 10, 2);
  std::stringstream ss;
  write_ground_truth(ss, sc.truth);
  const auto back = read_ground_truth(ss);
  ASSERT_EQ(back.size(), sc.truth.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, sc.truth[i].id);
    EXPECT_EQ(back[i].subtype, sc.truth[i].subtype);
    EXPECT_EQ(back[i].initial_epoch, sc.truth[i].initial_epoch);
  }
  std::istringstream bad("id\tsubtype\n");
  EXPECT_THROW(read_ground_truth(bad), Error);
  std::istringstream row("id\tsubtype\tinitial_epoch\np1 x 2\n");
  EXPECT_THROW(read_ground_truth(row), Error);
}

TEST(Synth, CohortSurvivesTextRoundTrip) {
  const auto sc = generate_cohort(two_subtype_fixture(), 15, 4);
  std::stringstream ss;
  write_cohort(ss, sc.cohort);
  const Cohort back = read_cohort(ss, {}, "mem");
  ASSERT_EQ(back.records.size(), 15u);
  for (std::size_t i = 0; i < 15; ++i) {
    EXPECT_EQ(back.records[i].admission.features, sc.cohort.records[i].admission.features);
    EXPECT_EQ(back.records[i].stream.size(), sc.cohort.records[i].stream.size());
  }
}

TEST(Synth, InvalidSpecs) {
  GenerativeSpec s = two_subtype_fixture();
  s.subtype_prior[0] = 0.9;
  EXPECT_THROW(generate_cohort(s, 1, 1), Error);
  s = two_subtype_fixture();
  s.gap_min = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = two_subtype_fixture();
  EXPECT_THROW(generate_patient(s, "x", 5, 0, 0, 1), Error);
  EXPECT_THROW(generate_patient(s, "x", 0, 1, s.num_epochs + 1, 1), Error);
}

}  // namespace
}  // namespace mogp
