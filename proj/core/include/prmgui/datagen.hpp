#pragma once

// Step-labeled (instruction, state, action, label) records from two
// pipelines: whole-trajectory rollouts and one-step probes from sampled
// states. Labels come from the shortest-path oracle and can be corrupted by
// calibrated noisy annotators.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prmgui/netenv.hpp"
#include "prmgui/rollout.hpp"
#include "prmgui/world.hpp"

namespace prmgui::datagen {

enum class Label : std::uint8_t { Positive, Negative };
enum class Source : std::uint8_t { TrajectoryPipeline, SingleStepPipeline };
enum class Split : std::uint8_t { Train, Heldout };

std::string_view to_string(Label);
std::string_view to_string(Source);
std::string_view to_string(Split);
Label flip(Label l);

struct Annotator {
  std::string name = "oracle";
  double accuracy = 1.0;
  bool operator==(const Annotator&) const = default;
};

// oracle 1.0, gpt4o-base 0.86, gpt4o-improved 0.92, human 0.98.
Annotator annotator_preset(std::string_view name);
std::vector<std::string> annotator_preset_names();

struct StepRecord {
  world::TaskSpec task;
  std::uint64_t seed = 0;  // world seed of the episode the state came from
  int step_index = 0;
  world::GuiState state;
  world::Action action;
  Label label = Label::Negative;         // as annotated
  Label oracle_label = Label::Negative;  // clean ground truth
  Source source = Source::TrajectoryPipeline;
  Annotator annotator;
  bool operator==(const StepRecord&) const = default;
};

struct LabeledDataset {
  std::vector<StepRecord> records;
  std::size_t pos_count = 0;
  std::size_t neg_count = 0;
  Split split = Split::Train;

  void recount();
};

class AnnotationUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Positive iff the action shortens the obstacle-free distance to success,
// is the correct dialog dismissal, or is Finished in a successful state. Throws AnnotationUndefined when
// either side is unreachable.
Label annotate_oracle(const world::WorldInstance& world_at_s, const world::Action& action,
                      const world::DistanceOracle& oracle);

// Keeps the label with probability `accuracy`. Uses exactly one draw.
Label annotate_noisy(Label label, double accuracy, Rng& rng);

struct PipelineStats {
  std::size_t records = 0;
  std::size_t skipped = 0;  // annotation undefined
};

struct PipelineOptions {
  double obstacle_prob = world::kTrainingObstacleProb;
  Annotator annotator;
  std::size_t workers = 1;
};

// Runs n_trajectories episodes (tasks drawn uniformly from the bank) and
// labels every step. Rolls out through `pool` when given, else in-process.
std::vector<StepRecord> rollout_pipeline(const Agent& policy, net::SessionPool* pool,
                                         const std::vector<world::TaskSpec>& task_bank, std::size_t n_trajectories,
                                         std::uint64_t seed, const world::DistanceOracle& oracle,
                                         const PipelineOptions& opts = {}, PipelineStats* stats = nullptr);

// A state reached by a random-walk prefix from a fresh world.
struct SampledState {
  world::TaskSpec task;
  std::uint64_t seed = 0;
  std::vector<world::Action> prefix;
  world::WorldInstance world;
};

inline constexpr int kMaxPrefix = 10;

// Sample i of a seeded stream: task uniform over the bank, prefix length
// uniform in [0, kMaxPrefix], each prefix step an oracle-optimal action with
// probability 1/2 and a uniform non-terminal candidate otherwise.
SampledState sample_state(const std::vector<world::TaskSpec>& task_bank, std::size_t i, std::uint64_t seed,
                          double obstacle_prob, const world::DistanceOracle& oracle);

std::vector<StepRecord> single_step_pipeline(const std::vector<world::TaskSpec>& task_bank, const Agent& policy,
                                             std::size_t n_samples, std::uint64_t seed,
                                             const world::DistanceOracle& oracle, const PipelineOptions& opts = {},
                                             PipelineStats* stats = nullptr);

// Re-annotates clean records with a noisy annotator. The flip decision for
// record i uses a uniform drawn from derive_seed(seed, i), so arms with
// different accuracies flip nested subsets of the same records.
void apply_annotator(std::vector<StepRecord>& records, const Annotator& annotator, std::uint64_t seed);

class BalanceImpossible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Splits by (task_id, seed) groups, then balances each split to
// pos:neg = ratio:1 by uniform down-sampling within each source, keeping
// every source's share of the split.
std::pair<LabeledDataset, LabeledDataset> balance_and_split(const std::vector<StepRecord>& records, double ratio,
                                                            double heldout_fraction, std::uint64_t seed);

// Newline-delimited JSON with a schema header line.
inline constexpr int kDatasetSchemaVersion = 1;
void write_records(std::ostream& out, const std::vector<StepRecord>& records);
std::vector<StepRecord> read_records(std::istream& in);
nlohmann::json to_json(const StepRecord& r);
StepRecord record_from_json(const nlohmann::json& j);

// Tasks spread evenly over the templates; ids are "<prefix><n>".
std::vector<world::TaskSpec> default_task_bank(const std::string& id_prefix = "t");

// Ground truth for offline evaluation: the first oracle-optimal candidate.
struct OfflineExample {
  world::TaskSpec task;
  std::uint64_t seed = 0;
  world::GuiState state;
  world::Action ground_truth;
};

std::vector<OfflineExample> offline_examples(const std::vector<world::TaskSpec>& task_bank, std::size_t n,
                                             std::uint64_t seed, const world::DistanceOracle& oracle,
                                             double obstacle_prob = 0.0);

}  // namespace prmgui::datagen
