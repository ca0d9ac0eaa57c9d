#pragma once

// Online PPO over the candidate-set policy with dense PRM step rewards or a
// terminal outcome reward.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prmgui/netenv.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/prm.hpp"

namespace prmgui::ppo {

struct RewardWeights {
  double w_p = 1.0;
  double w_f = 0.1;
  double format_penalty = -1.0;
};

double compose_reward(double prm_scalar, bool action_parsable, const RewardWeights& w);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Backward recursion; `values` has one more entry than `rewards` (the
// bootstrap value, 0 at episode end).
Advantages gae(std::span<const double> rewards, std::span<const double> values, double gamma, double lambda);

// Negated clipped surrogate, averaged over steps.
double ppo_clip_loss(std::span<const double> logp_new, std::span<const double> logp_old,
                     std::span<const double> adv, double epsilon);
// d(loss)/d(logp_new); zero where the clip is active.
std::vector<double> ppo_clip_grad(std::span<const double> logp_new, std::span<const double> logp_old,
                                  std::span<const double> adv, double epsilon);

double value_loss(std::span<const double> values, std::span<const double> returns);
std::vector<double> value_loss_grad(std::span<const double> values, std::span<const double> returns);

enum class RewardMode : std::uint8_t { Prm, Orm };
std::string_view to_string(RewardMode);

// Per-step scalars before composition: PRM scores, or +-1 from the outcome
// on the last step (0 elsewhere).
std::vector<double> prm_scalars(const Trajectory& traj, const prm::StepScorer& scorer, bool hard);
std::vector<double> orm_scalars(const Trajectory& traj);
std::vector<double> trajectory_rewards(const Trajectory& traj, std::span<const double> scalars,
                                       const RewardWeights& w);

struct PpoHyper {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  double actor_lr = 3e-4;
  double value_lr = 1e-3;
  int tasks_per_iter = 8;
  bool normalize_advantages = true;
  bool hard_prm_reward = false;
  RewardWeights weights;
  double obstacle_prob = world::kTrainingObstacleProb;
  std::size_t workers = 1;  // in-process rollout threads when no pool is given
};

struct IterationMetrics {
  int iteration = 0;
  double success_rate = 0.0;
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

struct PpoResult {
  policy::PolicyModel policy;
  policy::ValueModel value;
  std::vector<IterationMetrics> metrics;
};

// Training world seeds carry the top bit so they can never collide with
// benchmark seeds.
inline constexpr std::uint64_t kTrainingSeedBit = 1ULL << 63;
inline std::uint64_t training_seed(std::uint64_t x) { return x | kTrainingSeedBit; }

// One PPO run. `scorer` is required in Prm mode; rollouts go through `pool`
// when given, else run in-process.
PpoResult train_ppo(policy::PolicyModel policy, policy::ValueModel value, RewardMode mode,
                    const prm::StepScorer* scorer, net::SessionPool* pool, const std::vector<world::TaskSpec>& tasks,
                    int iters, const PpoHyper& hyper, std::uint64_t seed);

// The update half of an iteration, exposed for tests: PPO-Clip epochs on the
// policy and MSE epochs on the value model for a collected batch.
struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
};
UpdateStats ppo_update(policy::PolicyModel& policy, policy::ValueModel& value, nn::OptimState& actor_opt,
                       nn::OptimState& value_opt, const std::vector<Trajectory>& trajs,
                       const std::vector<std::vector<double>>& rewards, const PpoHyper& hyper);

void write_metrics_csv(std::ostream& out, const std::vector<IterationMetrics>& metrics);

}  // namespace prmgui::ppo
