#pragma once

// The frozen evaluation suite: every (task, seed) pair is one episode.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "prmgui/world.hpp"

namespace prmgui::harness {

inline constexpr std::uint64_t kBenchmarkSeedBase = 1000000;

struct BenchmarkSuite {
  std::vector<world::TaskSpec> tasks;
  std::vector<std::uint64_t> seeds;  // shared by every task
  double obstacle_prob = world::kTrainingObstacleProb;
  std::string hash;                  // content hash, set by freeze()

  std::size_t episodes() const { return tasks.size() * seeds.size(); }
  // Task-major episode list.
  std::pair<std::vector<world::TaskSpec>, std::vector<std::uint64_t>> expand() const;
};

// Computes the hash and rejects seeds that could collide with training seeds.
BenchmarkSuite freeze(BenchmarkSuite suite);
std::string suite_hash(const BenchmarkSuite& suite);
// Throws ValidationError if the stored hash no longer matches the content.
void check_frozen(const BenchmarkSuite& suite);

// 20 tasks x 10 seeds at the training obstacle rate.
BenchmarkSuite default_suite(int seeds_per_task = 10);

}  // namespace prmgui::harness
