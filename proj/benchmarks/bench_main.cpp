#include <algorithm>
#include <random>

#include <benchmark/benchmark.h>

#include "mogp/gp.hpp"
#include "mogp/pipeline.hpp"
#include "mogp/subtype_em.hpp"
#include "mogp/synth.hpp"

namespace {

using namespace mogp;

StationaryParams expert(int dim) {
  StationaryParams p;
  p.mean = Eigen::VectorXd::Constant(dim, 100.0);
  p.kernel.length_scale = 4.0;
  p.corr = CorrelationFactor::diagonal(Eigen::VectorXd::Constant(dim, 3.0));
  return p;
}

ObservationSet path(const StationaryParams& p, int samples, std::uint64_t seed) {
  std::vector<SampleTime> t;
  for (int i = 0; i < samples; ++i) t.push_back({i % p.dim(), 2.0 * (i / p.dim()) + 0.1 * i});
  return sample_path(p, t, seed);
}

void BM_LogLikelihood(benchmark::State& state) {
  const auto p = expert(static_cast<int>(state.range(1)));
  const auto obs = path(p, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(log_marginal_likelihood(p, obs));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LogLikelihood)->ArgsProduct({{8, 32, 64, 128}, {1, 3}})->Complexity();

void BM_FitMle(benchmark::State& state) {
  const auto p = expert(1);
  std::vector<ObservationSet> data;
  for (int n = 0; n < state.range(0); ++n) data.push_back(path(p, 24, n + 1));
  FitConfig cfg;
  cfg.restarts = 1;
  cfg.bounds = length_scale_bounds(data);
  auto init = p;
  init.kernel.length_scale = 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(fit_mle(data, init, cfg));
}
BENCHMARK(BM_FitMle)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_EStep(benchmark::State& state) {
  const auto sc = generate_cohort(two_subtype_fixture(), 200, 3);
  const auto data = streams_of(partition(sc.cohort.records).stable);
  const auto spec = two_subtype_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(e_step(data, spec.stable, spec.subtype_prior));
}
BENCHMARK(BM_EStep)->Unit(benchmark::kMillisecond);

void BM_ScoreStream(benchmark::State& state) {
  const auto spec = two_subtype_fixture();
  const auto train = generate_cohort(spec, 200, 5);
  Config c;
  c.forced_subtypes = 2;
  c.fit_restarts = 1;
  const TrainedModel model = train_model(train.cohort, c, 1).model;
  const auto test = generate_cohort(spec, 50, 9);
  const PatientRecord& r = *std::find_if(test.cohort.records.begin(), test.cohort.records.end(),
                                         [](const PatientRecord& p) { return *p.label == 1; });
  for (auto _ : state) benchmark::DoNotOptimize(score_stream(model, r));
  state.counters["arrivals"] = static_cast<double>(r.stream.size());
}
BENCHMARK(BM_ScoreStream)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
