#pragma once

// Shared experiment setup used by the command line tool and the acceptance
// runs, so both build the same frozen policy, data and suite.

#include <cstdint>
#include <vector>

#include "prmgui/config.hpp"
#include "prmgui/datagen.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/prm.hpp"
#include "prmgui/suite.hpp"

namespace prmgui::recipes {

// Behavior clone on oracle actions; 160 steps lands near a third of the
// suite, leaving room to improve in both directions.
struct BaselineSpec {
  std::size_t examples = 2000;
  std::uint64_t examples_seed = 99;
  int clone_steps = 160;
  std::uint64_t seed = 5;
};

policy::PolicyModel baseline_policy(const world::DistanceOracle& oracle, const BaselineSpec& spec = {});

// Both pipelines driven by the same agent, trajectory records first.
struct DataSpec {
  std::size_t single_step = 5000;
  std::size_t trajectories = 500;
  datagen::PipelineOptions options;
};

std::vector<datagen::StepRecord> prm_records(const Agent& agent, net::SessionPool* pool,
                                             const std::vector<world::TaskSpec>& bank, const DataSpec& spec,
                                             std::uint64_t seed, const world::DistanceOracle& oracle,
                                             datagen::PipelineStats* stats = nullptr);

// Ten epochs at 1e-3: the two-epoch 1e-4 default underfits the small MLP.
prm::PrmTrainConfig tuned_prm_config();

// `suite.seed_base`, `suite.seeds_per_task`, `suite.obstacle_prob` and
// optional `task.*` entries; the default task bank otherwise.
harness::BenchmarkSuite load_suite(const Config& cfg);

}  // namespace prmgui::recipes
