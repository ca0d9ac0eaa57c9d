#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prmgui/rng.hpp"
#include "prmgui/world.hpp"

namespace prmgui {

// Anything that can host one episode: an in-process world or a remote
// session. Calls are sequential; implementations need not be thread-safe.
class EnvSession {
 public:
  virtual ~EnvSession() = default;
  virtual world::GuiState reset(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob) = 0;
  virtual world::StepResult step(const world::Action& action) = 0;
  virtual bool check_success() = 0;
  virtual std::vector<world::Action> enumerate_actions() = 0;
};

class LocalSession final : public EnvSession {
 public:
  explicit LocalSession(std::shared_ptr<const world::Fixture> fixture = world::default_fixture())
      : fixture_(std::move(fixture)) {}

  world::GuiState reset(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob) override;
  world::StepResult step(const world::Action& action) override;
  bool check_success() override;
  std::vector<world::Action> enumerate_actions() override;

  const world::WorldInstance& world() const;

 private:
  std::shared_ptr<const world::Fixture> fixture_;
  std::optional<world::WorldInstance> world_;
};

// One recorded verification decision (see verify.hpp).
struct CandidateAudit {
  int step = 0;
  std::vector<world::Action> actions;
  std::vector<double> policy_logp;
  std::vector<double> scores;
  std::size_t selected = 0;
};

struct EpisodeContext {
  std::uint64_t seed = 0;
  double obstacle_prob = 0.0;
  std::span<const world::Action> history;
  std::vector<CandidateAudit>* audit = nullptr;
};

struct StepChoice {
  std::size_t index = 0;
  double logp = 0.0;  // log-probability of the choice under the acting policy
};

// Chooses among the environment's candidate actions. Implementations are
// immutable and may be shared across rollout threads.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual StepChoice choose(const world::TaskSpec& task, const world::GuiState& state,
                            std::span<const world::Action> candidates, Rng& rng, const EpisodeContext& ctx) const = 0;
};

class UniformAgent final : public Agent {
 public:
  StepChoice choose(const world::TaskSpec&, const world::GuiState&, std::span<const world::Action> candidates, Rng& rng,
                    const EpisodeContext&) const override;
};

// Scripted shortest-path agent; replays the episode locally to query the
// breadth-first oracle. Picks the first optimal candidate.
class OracleAgent final : public Agent {
 public:
  explicit OracleAgent(const world::DistanceOracle& oracle,
                       std::shared_ptr<const world::Fixture> fixture = world::default_fixture())
      : oracle_(oracle), fixture_(std::move(fixture)) {}
  StepChoice choose(const world::TaskSpec& task, const world::GuiState& state,
                    std::span<const world::Action> candidates, Rng& rng, const EpisodeContext& ctx) const override;

 private:
  const world::DistanceOracle& oracle_;
  std::shared_ptr<const world::Fixture> fixture_;
};

struct TrajectoryStep {
  world::GuiState state;
  std::vector<world::Action> candidates;
  std::size_t chosen = 0;
  world::Action action;
  double logp = 0.0;
  bool parsable = true;
};

struct Trajectory {
  world::TaskSpec task;
  std::uint64_t seed = 0;
  double obstacle_prob = 0.0;
  std::vector<TrajectoryStep> steps;
  world::GuiState final_state;
  bool success = false;
  bool finished = false;  // ended by the agent's Finished action

  std::vector<world::Action> actions() const;
};

// Per-step agent streams are derived from (policy_seed, step index), so two
// agents consuming different numbers of draws still see aligned streams.
Trajectory run_episode(EnvSession& env, const Agent& agent, const world::TaskSpec& task, std::uint64_t seed,
                       double obstacle_prob, std::uint64_t policy_seed, std::vector<CandidateAudit>* audit = nullptr);

// Rebuilds the world an episode reached after `prefix` actions.
world::WorldInstance replay(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob,
                            std::span<const world::Action> prefix,
                            std::shared_ptr<const world::Fixture> fixture = world::default_fixture());

// Canonical JSON for byte-level trajectory comparisons.
nlohmann::json to_json(const Trajectory& t);

}  // namespace prmgui
