#pragma once

// Best-of-n step verification: draw n candidates from the policy, score them,
// execute the best.

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "prmgui/netenv.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/prm.hpp"
#include "prmgui/suite.hpp"

namespace prmgui::verify {

enum class Mode : std::uint8_t { Prm, Self, None };
std::string_view to_string(Mode);
std::optional<Mode> parse_mode(std::string_view);

struct VerifierConfig {
  int n = 3;
  Mode mode = Mode::Prm;
  bool dedupe = true;
};

struct Candidate {
  std::size_t index = 0;  // position in the environment's candidate list
  double logp = 0.0;      // under the acting policy
  double score = 0.0;     // verifier score; logit_pos in PRM mode
};
using CandidateSet = std::vector<Candidate>;

// n draws from the policy's softmax, in draw order. The first draw consumes
// the same randomness a plain policy step would.
CandidateSet sample_candidates(const policy::PolicyModel& policy, const world::TaskSpec& task,
                               const world::GuiState& state, std::span<const world::Action> actions, int n, Rng& rng,
                               bool dedupe);

// Fills `score` for the chosen mode. PRM mode needs a scorer.
void score_candidates(CandidateSet& set, Mode mode, const world::TaskSpec& task, const world::GuiState& state,
                      std::span<const world::Action> actions, const prm::StepScorer* scorer);

// Position in `set` of the winner: highest score, earliest on ties; None
// always takes the first draw.
std::size_t select(const CandidateSet& set, Mode mode);

class VerifiedAgent final : public Agent {
 public:
  VerifiedAgent(std::shared_ptr<const policy::PolicyModel> policy, const prm::StepScorer* scorer,
                VerifierConfig config);
  StepChoice choose(const world::TaskSpec& task, const world::GuiState& state,
                    std::span<const world::Action> candidates, Rng& rng, const EpisodeContext& ctx) const override;

 private:
  std::shared_ptr<const policy::PolicyModel> policy_;
  const prm::StepScorer* scorer_;
  VerifierConfig config_;
};

Trajectory run_verified_episode(EnvSession& env, std::shared_ptr<const policy::PolicyModel> policy,
                                const prm::StepScorer* scorer, const VerifierConfig& config,
                                const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob,
                                std::uint64_t policy_seed, std::vector<CandidateAudit>* audit = nullptr);

struct SweepRow {
  int n = 0;
  double success_rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ms_per_step = 0.0;  // wall clock, not reproducible
  std::size_t episodes = 0;
};

// One benchmark pass per n on identical seeds. Rollouts go through `pool`
// when given.
std::vector<SweepRow> sweep_n(std::shared_ptr<const policy::PolicyModel> policy, const prm::StepScorer* scorer,
                              Mode mode, const harness::BenchmarkSuite& suite, const std::vector<int>& n_values,
                              std::uint64_t policy_seed, net::SessionPool* pool = nullptr, std::size_t workers = 1);

}  // namespace prmgui::verify
