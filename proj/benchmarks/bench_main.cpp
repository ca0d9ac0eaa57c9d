// Hot paths: shortest-path search, featurization, PRM scoring, one rollout.

#include <benchmark/benchmark.h>

#include "prmgui/datagen.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/prm.hpp"

using namespace prmgui;

namespace {

const world::TaskSpec& task(std::size_t i) {
  static const auto bank = datagen::default_task_bank();
  return bank[i % bank.size()];
}

void BM_Distance(benchmark::State& st) {
  world::DistanceOracle oracle;
  const auto w = world::create_world(task(static_cast<std::size_t>(st.range(0))), 7, 0.0);
  for (auto _ : st) {
    // A fresh oracle each time so the cache does not hide the search.
    world::DistanceOracle fresh;
    benchmark::DoNotOptimize(fresh.distance(w));
  }
}
BENCHMARK(BM_Distance)->DenseRange(0, 4);

void BM_FeaturizeAll(benchmark::State& st) {
  const auto w = world::create_world(task(0), 7, 0.0);
  const auto acts = world::enumerate_actions(w.state(), task(0));
  for (auto _ : st) benchmark::DoNotOptimize(prm::featurize_all(task(0), w.state(), acts));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(acts.size()));
}
BENCHMARK(BM_FeaturizeAll);

void BM_PrmScore(benchmark::State& st) {
  const auto model = std::make_shared<const prm::PrmModel>(prm::make_prm(1));
  prm::LocalScorer scorer(model);
  const auto w = world::create_world(task(0), 7, 0.0);
  auto acts = world::enumerate_actions(w.state(), task(0));
  acts.resize(std::min<std::size_t>(acts.size(), static_cast<std::size_t>(st.range(0))));
  for (auto _ : st) benchmark::DoNotOptimize(scorer.score(task(0), w.state(), acts));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(acts.size()));
}
BENCHMARK(BM_PrmScore)->Arg(1)->Arg(5)->Arg(16);

void BM_Rollout(benchmark::State& st) {
  policy::PolicyAgent agent(std::make_shared<const policy::PolicyModel>(policy::make_policy(1)));
  LocalSession env;
  std::uint64_t seed = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(run_episode(env, agent, task(seed), seed, 0.15, seed));
    ++seed;
  }
}
BENCHMARK(BM_Rollout);

}  // namespace

BENCHMARK_MAIN();
