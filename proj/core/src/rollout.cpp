#include "prmgui/rollout.hpp"

#include "prmgui/error.hpp"

namespace prmgui {

using world::Action;
using world::GuiState;

GuiState LocalSession::reset(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob) {
  world_ = world::create_world(task, seed, obstacle_prob, fixture_);
  return world_->state();
}

world::StepResult LocalSession::step(const Action& action) {
  if (!world_) throw SessionError("step before reset");
  return world::step(*world_, action);
}

bool LocalSession::check_success() {
  if (!world_) throw SessionError("check_success before reset");
  return world::check_success(*world_);
}

std::vector<Action> LocalSession::enumerate_actions() {
  if (!world_) throw SessionError("enumerate_actions before reset");
  return world::enumerate_actions(world_->state(), world_->task());
}

const world::WorldInstance& LocalSession::world() const {
  if (!world_) throw SessionError("no world before reset");
  return *world_;
}

StepChoice UniformAgent::choose(const world::TaskSpec&, const GuiState&, std::span<const Action> candidates, Rng& rng,
                                const EpisodeContext&) const {
  const auto n = candidates.size();
  return {static_cast<std::size_t>(uniform_index(rng, n)), -std::log(static_cast<double>(n))};
}

StepChoice OracleAgent::choose(const world::TaskSpec& task, const GuiState&, std::span<const Action> candidates, Rng&,
                               const EpisodeContext& ctx) const {
  const auto w = replay(task, ctx.seed, ctx.obstacle_prob, ctx.history, fixture_);
  const auto best = oracle_.optimal_actions(w);
  for (const auto& b : best) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] == b) return {i, 0.0};
    }
  }
  // Unreachable goal or Finished hidden behind an obstacle: dismiss / wait.
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].kind == world::ActionKind::Wait) return {i, 0.0};
  }
  return {0, 0.0};
}

std::vector<Action> Trajectory::actions() const {
  std::vector<Action> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.action);
  return out;
}

Trajectory run_episode(EnvSession& env, const Agent& agent, const world::TaskSpec& task, std::uint64_t seed,
                       double obstacle_prob, std::uint64_t policy_seed, std::vector<CandidateAudit>* audit) {
  Trajectory traj;
  traj.task = task;
  traj.seed = seed;
  traj.obstacle_prob = obstacle_prob;
  GuiState state = env.reset(task, seed, obstacle_prob);
  std::vector<Action> history;
  bool terminated = false;
  while (!terminated) {
    TrajectoryStep st;
    st.state = state;
    st.candidates = env.enumerate_actions();
    if (st.candidates.empty()) throw SessionError("environment offered no candidate actions");
    Rng rng(derive_seed(policy_seed, static_cast<std::uint64_t>(history.size())));
    EpisodeContext ctx{seed, obstacle_prob, history, audit};
    const StepChoice choice = agent.choose(task, state, st.candidates, rng, ctx);
    if (choice.index >= st.candidates.size()) throw std::out_of_range("agent chose an invalid candidate index");
    st.chosen = choice.index;
    st.action = st.candidates[choice.index];
    st.logp = choice.logp;
    st.parsable = world::is_well_formed(st.action);
    const Action sent = st.parsable ? st.action : Action::wait();
    const auto result = env.step(sent);
    history.push_back(sent);
    state = result.state;
    terminated = result.terminated;
    traj.finished = terminated && sent.kind == world::ActionKind::Finished;
    traj.steps.push_back(std::move(st));
  }
  traj.final_state = state;
  traj.success = env.check_success();
  return traj;
}

world::WorldInstance replay(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob,
                            std::span<const Action> prefix, std::shared_ptr<const world::Fixture> fixture) {
  auto w = world::create_world(task, seed, obstacle_prob, std::move(fixture));
  for (const auto& a : prefix) world::step(w, a);
  return w;
}

nlohmann::json to_json(const Trajectory& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"state", world::to_json(s.state)},
                     {"action", world::to_json(s.action)},
                     {"chosen", s.chosen},
                     {"n_candidates", s.candidates.size()}});
  }
  return {{"task", world::to_json(t.task)},
          {"seed", t.seed},
          {"obstacle_prob", t.obstacle_prob},
          {"steps", std::move(steps)},
          {"final_state", world::to_json(t.final_state)},
          {"success", t.success},
          {"finished", t.finished}};
}

}  // namespace prmgui
