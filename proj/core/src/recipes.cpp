#include "prmgui/recipes.hpp"

#include "prmgui/error.hpp"

namespace prmgui::recipes {

policy::PolicyModel baseline_policy(const world::DistanceOracle& oracle, const BaselineSpec& spec) {
  const auto examples =
      datagen::offline_examples(datagen::default_task_bank(), spec.examples, spec.examples_seed, oracle, 0.0);
  policy::CloneConfig cc;
  cc.steps = spec.clone_steps;
  return policy::behavior_clone(examples, cc, spec.seed);
}

std::vector<datagen::StepRecord> prm_records(const Agent& agent, net::SessionPool* pool,
                                             const std::vector<world::TaskSpec>& bank, const DataSpec& spec,
                                             std::uint64_t seed, const world::DistanceOracle& oracle,
                                             datagen::PipelineStats* stats) {
  datagen::PipelineStats a, b;
  auto records = datagen::rollout_pipeline(agent, pool, bank, spec.trajectories, derive_seed(seed, 2), oracle,
                                           spec.options, &a);
  auto single = datagen::single_step_pipeline(bank, agent, spec.single_step, derive_seed(seed, 1), oracle,
                                              spec.options, &b);
  records.insert(records.end(), std::make_move_iterator(single.begin()), std::make_move_iterator(single.end()));
  if (stats) {
    stats->records = a.records + b.records;
    stats->skipped = a.skipped + b.skipped;
  }
  return records;
}

prm::PrmTrainConfig tuned_prm_config() {
  prm::PrmTrainConfig c;
  c.epochs = 10;
  c.lr = 1e-3;
  return c;
}

harness::BenchmarkSuite load_suite(const Config& cfg) {
  harness::BenchmarkSuite s;
  s.tasks = world::load_tasks(cfg);
  if (s.tasks.empty()) s.tasks = datagen::default_task_bank("t");
  const auto base = cfg.get_int("suite.seed_base", static_cast<std::int64_t>(harness::kBenchmarkSeedBase));
  const auto per_task = cfg.get_int("suite.seeds_per_task", 10);
  if (base < 0 || per_task < 1) throw ValidationError("suite.seed_base must be >= 0 and suite.seeds_per_task >= 1");
  for (std::int64_t i = 0; i < per_task; ++i) s.seeds.push_back(static_cast<std::uint64_t>(base + i));
  s.obstacle_prob = cfg.get_double("suite.obstacle_prob", world::kTrainingObstacleProb);
  return harness::freeze(std::move(s));
}

}  // namespace prmgui::recipes
