#pragma once

// Benchmarks, offline match metrics, the annotation ablation and CSV output.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "prmgui/datagen.hpp"
#include "prmgui/netenv.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/prm.hpp"
#include "prmgui/suite.hpp"
#include "prmgui/verify.hpp"

namespace prmgui::harness {

inline constexpr const char* kVersion = "prmgui-0.1.0";

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Wilson score interval; z = 1.96 gives 95%.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

struct TaskBreakdown {
  std::string task_id;
  std::size_t episodes = 0;
  std::size_t successes = 0;
};

struct MetricsReport {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  Interval ci;
  std::vector<TaskBreakdown> per_task;  // sorted by task id
  std::map<std::string, std::string> metadata;
};

// Runs every episode of the suite with `agent` and aggregates in suite order.
MetricsReport run_benchmark(const Agent& agent, const BenchmarkSuite& suite, std::uint64_t policy_seed,
                            net::SessionPool* pool = nullptr, std::size_t workers = 1);
// Policy plus verifier; mode None with n = 1 is the plain sampled policy.
MetricsReport run_benchmark(std::shared_ptr<const policy::PolicyModel> policy, const prm::StepScorer* scorer,
                            const verify::VerifierConfig& config, const BenchmarkSuite& suite,
                            std::uint64_t policy_seed, net::SessionPool* pool = nullptr, std::size_t workers = 1);

// Writes scope,episodes,successes,success_rate,ci_low,ci_high: one row per
// task then an "all" row.
void write_report_csv(std::ostream& out, const MetricsReport& r);

// Trims and collapses runs of whitespace to one space.
std::string normalize_whitespace(const std::string& s);

// Offline single-step matching.
bool type_match(const world::Action& predicted, const world::Action& truth);
// Kind, target and text. Pointer actions match when the predicted point lies
// inside the widget the ground-truth point hits in `state`.
bool exact_match(const world::Action& predicted, const world::Action& truth, const world::GuiState& state);

struct OfflineReport {
  std::size_t examples = 0;
  double type_match = 0.0;
  double exact_match = 0.0;
};

using OfflinePredictor = std::function<world::Action(const datagen::OfflineExample& ex, std::size_t i)>;

OfflineReport eval_offline(const OfflinePredictor& predict, const std::vector<datagen::OfflineExample>& examples);

// Greedy policy action, or the verifier's pick among n samples drawn from
// derive_seed(seed, i).
OfflinePredictor greedy_predictor(std::shared_ptr<const policy::PolicyModel> policy);
OfflinePredictor verified_predictor(std::shared_ptr<const policy::PolicyModel> policy, const prm::StepScorer* scorer,
                                    const verify::VerifierConfig& config, std::uint64_t seed);

struct AblationConfig {
  std::vector<std::string> presets{"gpt4o-base", "gpt4o-improved", "human"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double ratio = 1.0;
  double heldout_fraction = 0.2;
  prm::PrmTrainConfig train;
  verify::VerifierConfig verifier;
  std::size_t workers = 1;
};

struct AblationRow {
  std::string annotator;
  double accuracy = 0.0;  // annotator accuracy
  std::uint64_t seed = 0;
  double prm_accuracy = 0.0;
  double success_rate = 0.0;
};

// Clean records for one seed; every arm with that seed relabels the same
// records, so arms differ only in annotator noise.
using DataSource = std::function<std::vector<datagen::StepRecord>(std::uint64_t seed)>;

std::vector<AblationRow> ablation_annotation(std::shared_ptr<const policy::PolicyModel> policy,
                                             const DataSource& data, const BenchmarkSuite& suite,
                                             const AblationConfig& cfg);

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
void write_sweep_csv(std::ostream& out, const std::vector<verify::SweepRow>& rows);

// Mean and a normal-approximation 95% interval of per-seed values.
struct MeanCi {
  double mean = 0.0;
  Interval ci;
};
MeanCi mean_ci(const std::vector<double>& xs);

// Stable 64-bit FNV-1a, hex encoded.
std::string content_hash(std::string_view bytes);

}  // namespace prmgui::harness
