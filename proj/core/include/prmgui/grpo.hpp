#pragma once

// Group-relative policy optimization: whole trajectories grouped per task
// with an outcome reward, or single actions grouped per state with an
// action-match or PRM reward.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "prmgui/datagen.hpp"
#include "prmgui/netenv.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/prm.hpp"

namespace prmgui::grpo {

struct GrpoHyper {
  double beta = 0.01;
  int group_size = 8;
  double lr = 3e-4;
  double std_epsilon = 1e-8;
  int states_per_batch = 4;  // offline: batch = states_per_batch * group_size
  int eval_every = 10;       // offline: steps between match evaluations
  double obstacle_prob = world::kTrainingObstacleProb;
  std::size_t workers = 1;
};

// (r - mean) / max(std, eps) with the population std.
std::vector<double> group_advantages(std::span<const double> rewards, double std_epsilon = 1e-8);

// 1 for the right action kind, plus 1 for matching typed text.
double oracle_reward(const world::Action& predicted, const world::Action& truth);
// 1 when the PRM accepts the action.
double prm_reward(const prm::StepScorer& scorer, const world::TaskSpec& task, const world::GuiState& state,
                  const world::Action& predicted);

// Per-sample KL(new || ref) estimate exp(ref - new) - (ref - new) - 1.
double kl_estimate(double logp_new, double logp_ref);

// -mean(logp_new * a) + beta * mean(kl_estimate).
double grpo_loss(std::span<const double> logp_new, std::span<const double> logp_ref, std::span<const double> adv,
                 double beta);
std::vector<double> grpo_grad(std::span<const double> logp_new, std::span<const double> logp_ref,
                              std::span<const double> adv, double beta);

enum class OfflineReward : std::uint8_t { Oracle, Prm };
std::string_view to_string(OfflineReward);

struct TrajectoryMetrics {
  int iteration = 0;
  double mean_reward = 0.0;  // group success rate
  double loss = 0.0;
  double kl = 0.0;
};

struct OfflineMetrics {
  int step = 0;
  double mean_reward = 0.0;  // over the steps since the previous row
  double loss = 0.0;
  double kl = 0.0;
  double type_match = 0.0;
  double exact_match = 0.0;
};

struct TrajectoryResult {
  policy::PolicyModel policy;
  std::vector<TrajectoryMetrics> metrics;
};

struct OfflineResult {
  policy::PolicyModel policy;
  std::vector<OfflineMetrics> metrics;  // first row is the untrained policy
};

// One task per iteration, group_size rollouts on distinct training seeds,
// terminal reward 1/0, each trajectory's advantage on every one of its steps.
// The reference policy is the starting policy.
TrajectoryResult train_grpo_trajectory(policy::PolicyModel policy, net::SessionPool* pool,
                                       const std::vector<world::TaskSpec>& tasks, const GrpoHyper& hyper, int iters,
                                       std::uint64_t seed);

// Match metrics are greedy-policy TM/EM on `validation`.
OfflineResult train_grpo_offline(policy::PolicyModel policy, const std::vector<datagen::OfflineExample>& train,
                                 const std::vector<datagen::OfflineExample>& validation, OfflineReward reward,
                                 const prm::StepScorer* scorer, const GrpoHyper& hyper, int steps,
                                 std::uint64_t seed);

void write_metrics_csv(std::ostream& out, const std::vector<TrajectoryMetrics>& metrics);
void write_metrics_csv(std::ostream& out, const std::vector<OfflineMetrics>& metrics);

}  // namespace prmgui::grpo
