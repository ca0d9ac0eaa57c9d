#include "prmgui/grpo.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "prmgui/error.hpp"
#include "prmgui/harness.hpp"
#include "prmgui/ppo.hpp"

namespace prmgui::grpo {

std::vector<double> group_advantages(std::span<const double> rewards, double std_epsilon) {
  if (rewards.size() < 2) throw ValidationError("a group needs at least two completions");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::max(std::sqrt(var / n), std_epsilon);
  std::vector<double> a(rewards.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    // Exact zeros for degenerate groups, whatever the rounding of the mean.
    a[i] = var == 0.0 ? 0.0 : (rewards[i] - mean) / sd;
  }
  return a;
}

double oracle_reward(const world::Action& predicted, const world::Action& truth) {
  if (predicted.kind != truth.kind) return 0.0;
  double r = 1.0;
  if (truth.kind == world::ActionKind::Type && predicted.content && truth.content &&
      harness::normalize_whitespace(*predicted.content) == harness::normalize_whitespace(*truth.content)) {
    r += 1.0;
  }
  return r;
}

double prm_reward(const prm::StepScorer& scorer, const world::TaskSpec& task, const world::GuiState& state,
                  const world::Action& predicted) {
  return scorer.score_one(task, state, predicted).label == datagen::Label::Positive ? 1.0 : 0.0;
}

double kl_estimate(double logp_new, double logp_ref) {
  const double d = logp_ref - logp_new;
  return std::expm1(d) - d;
}

namespace {

void check_inputs(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  if (a.size() != b.size() || a.size() != c.size()) throw ValidationError("grpo: inputs differ in length");
  if (a.empty()) throw ValidationError("grpo: empty batch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i]) || !std::isfinite(c[i])) {
      throw NumericError("grpo: non-finite input");
    }
  }
}

}  // namespace

double grpo_loss(std::span<const double> logp_new, std::span<const double> logp_ref, std::span<const double> adv,
                 double beta) {
  check_inputs(logp_new, logp_ref, adv);
  double s = 0.0;
  for (std::size_t i = 0; i < adv.size(); ++i) s += -logp_new[i] * adv[i] + beta * kl_estimate(logp_new[i], logp_ref[i]);
  return s / static_cast<double>(adv.size());
}

std::vector<double> grpo_grad(std::span<const double> logp_new, std::span<const double> logp_ref,
                              std::span<const double> adv, double beta) {
  check_inputs(logp_new, logp_ref, adv);
  const double inv_n = 1.0 / static_cast<double>(adv.size());
  std::vector<double> g(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) {
    g[i] = inv_n * (-adv[i] - beta * std::expm1(logp_ref[i] - logp_new[i]));
  }
  return g;
}

std::string_view to_string(OfflineReward r) { return r == OfflineReward::Oracle ? "oracle" : "prm"; }

namespace {

void check_hyper(const GrpoHyper& h) {
  if (h.group_size < 2) throw ValidationError("group size must be at least 2");
  if (h.beta < 0.0) throw ValidationError("beta must be non-negative");
}

struct StepOutcome {
  double loss = 0.0;
  double kl = 0.0;
};

// One optimizer step on a decision batch with per-item advantages.
StepOutcome update(policy::PolicyModel& pol, const policy::PolicyModel& ref, nn::OptimState& opt,
                   const policy::DecisionBatch& batch, const std::vector<double>& adv, double beta) {
  const Eigen::VectorXd ref_lp = policy::batch_logp(ref, batch);
  const std::vector<double> lref(ref_lp.data(), ref_lp.data() + ref_lp.size());
  StepOutcome out;
  auto grads = nn::zeros_like(pol.scorer);
  policy::batch_logp(
      pol, batch,
      [&](const Eigen::VectorXd& lp) {
        const std::span<const double> ln(lp.data(), static_cast<std::size_t>(lp.size()));
        out.loss = grpo_loss(ln, lref, adv, beta);
        double kl = 0.0;
        for (std::size_t i = 0; i < ln.size(); ++i) kl += kl_estimate(ln[i], lref[i]);
        out.kl = kl / static_cast<double>(ln.size());
        const auto g = grpo_grad(ln, lref, adv, beta);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())));
      },
      &grads);
  nn::optimizer_step(pol.scorer, grads, opt);
  return out;
}

nn::OptimState make_opt(const policy::PolicyModel& pol, double lr) {
  nn::AdamWConfig c;
  c.lr = lr;
  c.weight_decay = 0.0;
  return nn::make_optimizer(pol.scorer, c);
}

}  // namespace

TrajectoryResult train_grpo_trajectory(policy::PolicyModel pol, net::SessionPool* pool,
                                       const std::vector<world::TaskSpec>& tasks, const GrpoHyper& hyper, int iters,
                                       std::uint64_t seed) {
  check_hyper(hyper);
  if (tasks.empty()) throw ValidationError("train_grpo_trajectory: no tasks");
  const policy::PolicyModel ref = pol;
  auto opt = make_opt(pol, hyper.lr);
  TrajectoryResult res;
  for (int it = 0; it < iters; ++it) {
    Rng rng(derive_seed(seed, 1, static_cast<std::uint64_t>(it)));
    const auto& task = tasks[uniform_index(rng, tasks.size())];
    const std::vector<world::TaskSpec> group(static_cast<std::size_t>(hyper.group_size), task);
    std::vector<std::uint64_t> seeds;
    for (int g = 0; g < hyper.group_size; ++g) {
      seeds.push_back(ppo::training_seed(derive_seed(seed, 2, static_cast<std::uint64_t>(it) * 1000 + g)));
    }
    policy::PolicyAgent agent(std::make_shared<const policy::PolicyModel>(pol));
    const std::uint64_t policy_seed = derive_seed(seed, 3, static_cast<std::uint64_t>(it));
    const auto trajs = pool ? net::parallel_rollouts(*pool, agent, group, seeds, hyper.obstacle_prob, policy_seed)
                            : net::local_rollouts(agent, group, seeds, hyper.obstacle_prob, policy_seed, hyper.workers);
    std::vector<double> rewards;
    for (const auto& t : trajs) rewards.push_back(t.success ? 1.0 : 0.0);
    const auto adv = group_advantages(rewards, hyper.std_epsilon);

    policy::DecisionBatch batch;
    std::vector<double> step_adv;
    for (std::size_t k = 0; k < trajs.size(); ++k) {
      for (const auto& st : trajs[k].steps) {
        batch.add(prm::featurize_all(task, st.state, st.candidates), st.chosen);
        step_adv.push_back(adv[k]);
      }
    }
    TrajectoryMetrics m;
    m.iteration = it;
    double mr = 0.0;
    for (double r : rewards) mr += r;
    m.mean_reward = mr / static_cast<double>(rewards.size());
    if (batch.size() > 0) {
      const auto o = update(pol, ref, opt, batch, step_adv, hyper.beta);
      m.loss = o.loss;
      m.kl = o.kl;
    }
    res.metrics.push_back(m);
  }
  res.policy = std::move(pol);
  return res;
}

OfflineResult train_grpo_offline(policy::PolicyModel pol, const std::vector<datagen::OfflineExample>& train,
                                 const std::vector<datagen::OfflineExample>& validation, OfflineReward reward,
                                 const prm::StepScorer* scorer, const GrpoHyper& hyper, int steps,
                                 std::uint64_t seed) {
  check_hyper(hyper);
  if (train.empty()) throw ValidationError("train_grpo_offline: empty dataset");
  if (reward == OfflineReward::Prm && !scorer) throw ValidationError("PRM reward needs a scorer");
  if (hyper.eval_every < 1) throw ValidationError("eval_every must be positive");
  const policy::PolicyModel ref = pol;
  auto opt = make_opt(pol, hyper.lr);
  OfflineResult res;

  auto evaluate = [&](int step, double mean_reward, double loss, double kl) {
    OfflineMetrics m{step, mean_reward, loss, kl, 0.0, 0.0};
    if (!validation.empty()) {
      const auto r = harness::eval_offline(harness::greedy_predictor(std::make_shared<const policy::PolicyModel>(pol)),
                                           validation);
      m.type_match = r.type_match;
      m.exact_match = r.exact_match;
    }
    res.metrics.push_back(m);
  };
  evaluate(0, 0.0, 0.0, 0.0);

  double r_sum = 0.0, l_sum = 0.0, kl_sum = 0.0;
  std::size_t r_count = 0;
  int window = 0;
  for (int s = 0; s < steps; ++s) {
    Rng rng(derive_seed(seed, 4, static_cast<std::uint64_t>(s)));
    policy::DecisionBatch batch;
    std::vector<double> adv;
    for (int b = 0; b < hyper.states_per_batch; ++b) {
      const auto& ex = train[uniform_index(rng, train.size())];
      const auto cands = world::enumerate_actions(ex.state, ex.task);
      const Eigen::MatrixXd feats = prm::featurize_all(ex.task, ex.state, cands);
      const Eigen::VectorXd p = policy::probs(pol, feats);
      std::vector<std::size_t> picks;
      std::vector<world::Action> acts;
      for (int g = 0; g < hyper.group_size; ++g) {
        picks.push_back(policy::sample_index(p, rng));
        acts.push_back(cands[picks.back()]);
      }
      std::vector<double> rewards;
      if (reward == OfflineReward::Oracle) {
        for (const auto& a : acts) rewards.push_back(oracle_reward(a, ex.ground_truth));
      } else {
        for (const auto& sc : scorer->score(ex.task, ex.state, acts)) {
          rewards.push_back(sc.label == datagen::Label::Positive ? 1.0 : 0.0);
        }
      }
      for (double r : rewards) r_sum += r;
      r_count += rewards.size();
      const auto a = group_advantages(rewards, hyper.std_epsilon);
      for (int g = 0; g < hyper.group_size; ++g) {
        batch.add(feats, picks[static_cast<std::size_t>(g)]);
        adv.push_back(a[static_cast<std::size_t>(g)]);
      }
    }
    const auto o = update(pol, ref, opt, batch, adv, hyper.beta);
    l_sum += o.loss;
    kl_sum += o.kl;
    ++window;
    if ((s + 1) % hyper.eval_every == 0 || s + 1 == steps) {
      evaluate(s + 1, r_sum / static_cast<double>(r_count), l_sum / window, kl_sum / window);
      r_sum = l_sum = kl_sum = 0.0;
      r_count = 0;
      window = 0;
    }
  }
  res.policy = std::move(pol);
  return res;
}

void write_metrics_csv(std::ostream& out, const std::vector<TrajectoryMetrics>& metrics) {
  out << "iteration,mean_reward,loss,kl\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.9g,%.9g\n", m.iteration, m.mean_reward, m.loss, m.kl);
    out << buf;
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<OfflineMetrics>& metrics) {
  out << "step,mean_reward,loss,kl,type_match,exact_match\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.9g,%.9g,%.6f,%.6f\n", m.step, m.mean_reward, m.loss, m.kl,
                  m.type_match, m.exact_match);
    out << buf;
  }
}

}  // namespace prmgui::grpo
