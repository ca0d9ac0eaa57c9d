#include "prmgui/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "prmgui/error.hpp"

namespace prmgui::ppo {

double compose_reward(double prm_scalar, bool action_parsable, const RewardWeights& w) {
  return w.w_p * prm_scalar + w.w_f * (action_parsable ? 0.0 : w.format_penalty);
}

Advantages gae(std::span<const double> rewards, std::span<const double> values, double gamma, double lambda) {
  if (values.size() != rewards.size() + 1) throw ValidationError("gae: need exactly one more value than rewards");
  const std::size_t T = rewards.size();
  Advantages out;
  out.advantages.assign(T, 0.0);
  out.returns.assign(T, 0.0);
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

namespace {

void check_aligned(std::size_t a, std::size_t b, std::size_t c, const char* what) {
  if (a != b || a != c) throw ValidationError(std::string(what) + ": inputs differ in length");
  if (a == 0) throw ValidationError(std::string(what) + ": empty batch");
}

}  // namespace

double ppo_clip_loss(std::span<const double> logp_new, std::span<const double> logp_old, std::span<const double> adv,
                     double epsilon) {
  check_aligned(logp_new.size(), logp_old.size(), adv.size(), "ppo_clip_loss");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("ppo_clip_loss: epsilon must be in (0, 1)");
  double sum = 0.0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const double ratio = std::exp(logp_new[i] - logp_old[i]);
    if (!std::isfinite(ratio)) throw NumericError("ppo_clip_loss: non-finite probability ratio");
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    sum += std::min(ratio * adv[i], clipped * adv[i]);
  }
  return -sum / static_cast<double>(adv.size());
}

std::vector<double> ppo_clip_grad(std::span<const double> logp_new, std::span<const double> logp_old,
                                  std::span<const double> adv, double epsilon) {
  check_aligned(logp_new.size(), logp_old.size(), adv.size(), "ppo_clip_grad");
  const double inv_n = 1.0 / static_cast<double>(adv.size());
  std::vector<double> g(adv.size(), 0.0);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const double ratio = std::exp(logp_new[i] - logp_old[i]);
    // The unclipped branch is the minimum unless the ratio has left the band
    // in the direction the advantage rewards.
    const bool clipped = (adv[i] > 0.0 && ratio > 1.0 + epsilon) || (adv[i] < 0.0 && ratio < 1.0 - epsilon);
    if (!clipped) g[i] = -inv_n * ratio * adv[i];
  }
  return g;
}

double value_loss(std::span<const double> values, std::span<const double> returns) {
  check_aligned(values.size(), returns.size(), returns.size(), "value_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) sum += (values[i] - returns[i]) * (values[i] - returns[i]);
  return sum / static_cast<double>(values.size());
}

std::vector<double> value_loss_grad(std::span<const double> values, std::span<const double> returns) {
  check_aligned(values.size(), returns.size(), returns.size(), "value_loss_grad");
  std::vector<double> g(values.size());
  const double k = 2.0 / static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) g[i] = k * (values[i] - returns[i]);
  return g;
}

std::string_view to_string(RewardMode m) { return m == RewardMode::Prm ? "prm" : "orm"; }

std::vector<double> prm_scalars(const Trajectory& traj, const prm::StepScorer& scorer, bool hard) {
  std::vector<double> out;
  out.reserve(traj.steps.size());
  for (const auto& st : traj.steps) out.push_back(prm::prm_scalar(scorer.score_one(traj.task, st.state, st.action), hard));
  return out;
}

std::vector<double> orm_scalars(const Trajectory& traj) {
  std::vector<double> out(traj.steps.size(), 0.0);
  if (!out.empty()) out.back() = traj.success ? 1.0 : -1.0;
  return out;
}

std::vector<double> trajectory_rewards(const Trajectory& traj, std::span<const double> scalars,
                                       const RewardWeights& w) {
  if (scalars.size() != traj.steps.size()) throw ValidationError("one reward scalar per step expected");
  std::vector<double> r(scalars.size());
  for (std::size_t t = 0; t < scalars.size(); ++t) r[t] = compose_reward(scalars[t], traj.steps[t].parsable, w);
  return r;
}

UpdateStats ppo_update(policy::PolicyModel& pol, policy::ValueModel& value, nn::OptimState& actor_opt,
                       nn::OptimState& value_opt, const std::vector<Trajectory>& trajs,
                       const std::vector<std::vector<double>>& rewards, const PpoHyper& hyper) {
  policy::DecisionBatch batch;
  std::vector<Eigen::VectorXd> state_cols;
  std::vector<std::size_t> traj_len;
  for (const auto& tr : trajs) {
    for (const auto& st : tr.steps) {
      batch.add(prm::featurize_all(tr.task, st.state, st.candidates), st.chosen);
      state_cols.push_back(prm::featurize_state(tr.task, st.state));
    }
    traj_len.push_back(tr.steps.size());
  }
  const std::size_t n = batch.size();
  UpdateStats stats;
  if (n == 0) return stats;
  Eigen::MatrixXd states(prm::kFeatureDim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) states.col(static_cast<Eigen::Index>(i)) = state_cols[i];

  // Advantages from the value model before this update.
  const Eigen::VectorXd v0 = policy::values_of(value, states);
  std::vector<double> adv(n), ret(n);
  std::size_t off = 0;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const std::size_t T = traj_len[k];
    std::vector<double> vals(T + 1, 0.0);
    for (std::size_t t = 0; t < T; ++t) vals[t] = v0(static_cast<Eigen::Index>(off + t));
    const auto g = gae(rewards[k], vals, hyper.gamma, hyper.lambda);
    std::copy(g.advantages.begin(), g.advantages.end(), adv.begin() + static_cast<std::ptrdiff_t>(off));
    std::copy(g.returns.begin(), g.returns.end(), ret.begin() + static_cast<std::ptrdiff_t>(off));
    off += T;
  }
  std::vector<double> adv_used = adv;
  if (hyper.normalize_advantages && n > 1) {
    double mean = 0.0, var = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(n);
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (auto& a : adv_used) a = (a - mean) / std::max(sd, 1e-8);
  }

  const Eigen::VectorXd old_lp = policy::batch_logp(pol, batch);
  const std::vector<double> logp_old(old_lp.data(), old_lp.data() + old_lp.size());
  double pl_sum = 0.0, vl_sum = 0.0;
  for (int e = 0; e < hyper.epochs; ++e) {
    auto grads = nn::zeros_like(pol.scorer);
    double pl = 0.0;
    policy::batch_logp(
        pol, batch,
        [&](const Eigen::VectorXd& lp) {
          const std::span<const double> lpn(lp.data(), static_cast<std::size_t>(lp.size()));
          pl = ppo_clip_loss(lpn, logp_old, adv_used, hyper.clip);
          const auto g = ppo_clip_grad(lpn, logp_old, adv_used, hyper.clip);
          return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())));
        },
        &grads);
    nn::optimizer_step(pol.scorer, grads, actor_opt);
    pl_sum += pl;

    nn::ForwardCache cache;
    const Eigen::VectorXd v = nn::forward_batch(value.params, states, &cache).row(0).transpose();
    const std::span<const double> vs(v.data(), static_cast<std::size_t>(v.size()));
    const double vl = value_loss(vs, ret);
    if (!std::isfinite(vl) || !std::isfinite(pl)) throw NumericError("ppo_update: non-finite loss");
    const auto vg = value_loss_grad(vs, ret);
    Eigen::MatrixXd d(1, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) d(0, static_cast<Eigen::Index>(i)) = vg[i];
    auto vgrads = nn::zeros_like(value.params);
    nn::backward(value.params, cache, d, vgrads);
    nn::optimizer_step(value.params, vgrads, value_opt);
    vl_sum += vl;
  }
  if (hyper.epochs > 0) {
    stats.policy_loss = pl_sum / hyper.epochs;
    stats.value_loss = vl_sum / hyper.epochs;
  }
  return stats;
}

PpoResult train_ppo(policy::PolicyModel pol, policy::ValueModel value, RewardMode mode,
                    const prm::StepScorer* scorer, net::SessionPool* pool, const std::vector<world::TaskSpec>& tasks,
                    int iters, const PpoHyper& hyper, std::uint64_t seed) {
  if (tasks.empty()) throw ValidationError("train_ppo: no tasks");
  if (mode == RewardMode::Prm && scorer == nullptr) throw ValidationError("train_ppo: PRM mode needs a scorer");
  if (hyper.tasks_per_iter < 1) throw ValidationError("train_ppo: tasks_per_iter must be positive");
  nn::AdamWConfig ac;
  ac.lr = hyper.actor_lr;
  ac.weight_decay = 0.0;
  nn::AdamWConfig vc;
  vc.lr = hyper.value_lr;
  vc.weight_decay = 0.0;
  auto actor_opt = nn::make_optimizer(pol.scorer, ac);
  auto value_opt = nn::make_optimizer(value.params, vc);
  PpoResult res;
  for (int it = 0; it < iters; ++it) {
    Rng rng(derive_seed(seed, 1, static_cast<std::uint64_t>(it)));
    std::vector<world::TaskSpec> batch_tasks;
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < hyper.tasks_per_iter; ++k) {
      batch_tasks.push_back(tasks[uniform_index(rng, tasks.size())]);
      seeds.push_back(training_seed(derive_seed(seed, 2, static_cast<std::uint64_t>(it * 1000 + k))));
    }
    auto snapshot = std::make_shared<const policy::PolicyModel>(pol);
    policy::PolicyAgent agent(snapshot);
    const std::uint64_t policy_seed = derive_seed(seed, 3, static_cast<std::uint64_t>(it));
    const auto trajs =
        pool ? net::parallel_rollouts(*pool, agent, batch_tasks, seeds, hyper.obstacle_prob, policy_seed)
             : net::local_rollouts(agent, batch_tasks, seeds, hyper.obstacle_prob, policy_seed, hyper.workers);

    std::vector<std::vector<double>> rewards;
    double reward_sum = 0.0;
    std::size_t steps = 0, successes = 0;
    for (const auto& tr : trajs) {
      const auto scalars = mode == RewardMode::Prm ? prm_scalars(tr, *scorer, hyper.hard_prm_reward) : orm_scalars(tr);
      rewards.push_back(trajectory_rewards(tr, scalars, hyper.weights));
      for (double r : rewards.back()) reward_sum += r;
      steps += tr.steps.size();
      successes += tr.success ? 1 : 0;
    }
    const auto st = ppo_update(pol, value, actor_opt, value_opt, trajs, rewards, hyper);
    IterationMetrics m;
    m.iteration = it;
    m.success_rate = static_cast<double>(successes) / static_cast<double>(trajs.size());
    m.mean_reward = steps ? reward_sum / static_cast<double>(steps) : 0.0;
    m.policy_loss = st.policy_loss;
    m.value_loss = st.value_loss;
    res.metrics.push_back(m);
  }
  res.policy = std::move(pol);
  res.value = std::move(value);
  return res;
}

void write_metrics_csv(std::ostream& out, const std::vector<IterationMetrics>& metrics) {
  out << "iteration,success_rate,mean_reward,policy_loss,value_loss\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.9g,%.9g,%.9g\n", m.iteration, m.success_rate, m.mean_reward,
                  m.policy_loss, m.value_loss);
    out << buf;
  }
}

}  // namespace prmgui::ppo
