#include "prmgui/verify.hpp"

#include <algorithm>
#include <chrono>

#include "prmgui/error.hpp"
#include "prmgui/harness.hpp"

namespace prmgui::verify {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Prm: return "prm";
    case Mode::Self: return "self";
    case Mode::None: return "none";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "prm") return Mode::Prm;
  if (s == "self") return Mode::Self;
  if (s == "none") return Mode::None;
  return std::nullopt;
}

CandidateSet sample_candidates(const policy::PolicyModel& pol, const world::TaskSpec& task,
                               const world::GuiState& state, std::span<const world::Action> actions, int n, Rng& rng,
                               bool dedupe) {
  if (n < 1) throw ValidationError("candidate count must be at least 1");
  const Eigen::VectorXd lp = policy::log_probs(pol, prm::featurize_all(task, state, actions));
  const Eigen::VectorXd p = lp.array().exp().matrix();
  CandidateSet set;
  for (int k = 0; k < n; ++k) {
    const std::size_t idx = policy::sample_index(p, rng);
    if (dedupe && std::any_of(set.begin(), set.end(), [&](const Candidate& c) { return c.index == idx; })) continue;
    set.push_back({idx, lp(static_cast<Eigen::Index>(idx)), 0.0});
  }
  return set;
}

void score_candidates(CandidateSet& set, Mode mode, const world::TaskSpec& task, const world::GuiState& state,
                      std::span<const world::Action> actions, const prm::StepScorer* scorer) {
  switch (mode) {
    case Mode::None:
      return;
    case Mode::Self:
      for (auto& c : set) c.score = c.logp;
      return;
    case Mode::Prm: {
      if (!scorer) throw ValidationError("PRM verification needs a scorer");
      std::vector<world::Action> picked;
      picked.reserve(set.size());
      for (const auto& c : set) picked.push_back(actions[c.index]);
      const auto scores = scorer->score(task, state, picked);
      if (scores.size() != set.size()) throw NumericError("scorer returned the wrong number of scores");
      for (std::size_t i = 0; i < set.size(); ++i) set[i].score = scores[i].logit_pos;
      return;
    }
  }
}

std::size_t select(const CandidateSet& set, Mode mode) {
  if (set.empty()) throw ValidationError("empty candidate set");
  if (mode == Mode::None) return 0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < set.size(); ++i) {
    if (set[i].score > set[best].score) best = i;
  }
  return best;
}

VerifiedAgent::VerifiedAgent(std::shared_ptr<const policy::PolicyModel> pol, const prm::StepScorer* scorer,
                             VerifierConfig config)
    : policy_(std::move(pol)), scorer_(scorer), config_(config) {
  if (config_.n < 1) throw ValidationError("candidate count must be at least 1");
  if (config_.mode == Mode::Prm && !scorer_) throw ValidationError("PRM verification needs a scorer");
}

StepChoice VerifiedAgent::choose(const world::TaskSpec& task, const world::GuiState& state,
                                 std::span<const world::Action> candidates, Rng& rng,
                                 const EpisodeContext& ctx) const {
  auto set = sample_candidates(*policy_, task, state, candidates, config_.n, rng, config_.dedupe);
  score_candidates(set, config_.mode, task, state, candidates, scorer_);
  const std::size_t pick = select(set, config_.mode);
  if (ctx.audit) {
    CandidateAudit a;
    a.step = static_cast<int>(ctx.history.size());
    for (const auto& c : set) {
      a.actions.push_back(candidates[c.index]);
      a.policy_logp.push_back(c.logp);
      a.scores.push_back(c.score);
    }
    a.selected = pick;
    ctx.audit->push_back(std::move(a));
  }
  return {set[pick].index, set[pick].logp};
}

Trajectory run_verified_episode(EnvSession& env, std::shared_ptr<const policy::PolicyModel> pol,
                                const prm::StepScorer* scorer, const VerifierConfig& config,
                                const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob,
                                std::uint64_t policy_seed, std::vector<CandidateAudit>* audit) {
  VerifiedAgent agent(std::move(pol), scorer, config);
  return run_episode(env, agent, task, seed, obstacle_prob, policy_seed, audit);
}

std::vector<SweepRow> sweep_n(std::shared_ptr<const policy::PolicyModel> pol, const prm::StepScorer* scorer,
                              Mode mode, const harness::BenchmarkSuite& suite, const std::vector<int>& n_values,
                              std::uint64_t policy_seed, net::SessionPool* pool, std::size_t workers) {
  if (n_values.empty()) throw ValidationError("sweep_n: no candidate counts");
  harness::check_frozen(suite);
  const auto [tasks, seeds] = suite.expand();
  std::vector<SweepRow> rows;
  for (int n : n_values) {
    VerifiedAgent agent(pol, scorer, {n, mode, true});
    const auto t0 = std::chrono::steady_clock::now();
    const auto trajs = pool ? net::parallel_rollouts(*pool, agent, tasks, seeds, suite.obstacle_prob, policy_seed)
                            : net::local_rollouts(agent, tasks, seeds, suite.obstacle_prob, policy_seed, workers);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::size_t wins = 0, steps = 0;
    for (const auto& t : trajs) {
      wins += t.success ? 1 : 0;
      steps += t.steps.size();
    }
    const auto ci = harness::wilson_interval(wins, trajs.size());
    rows.push_back({n, static_cast<double>(wins) / static_cast<double>(trajs.size()), ci.low, ci.high,
                    steps ? ms / static_cast<double>(steps) : 0.0, trajs.size()});
  }
  return rows;
}

}  // namespace prmgui::verify
