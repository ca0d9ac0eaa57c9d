// prmgui: command line front end for the environment service, data
// generation, PRM/PPO/GRPO training, verification and reporting.

#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prmgui/config.hpp"
#include "prmgui/datagen.hpp"
#include "prmgui/error.hpp"
#include "prmgui/grpo.hpp"
#include "prmgui/harness.hpp"
#include "prmgui/netenv.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/ppo.hpp"
#include "prmgui/prm.hpp"
#include "prmgui/recipes.hpp"
#include "prmgui/report.hpp"
#include "prmgui/verify.hpp"

namespace fs = std::filesystem;
using namespace prmgui;

namespace {

// Blocks until SIGINT or SIGTERM. The mask is installed before any server
// thread starts so the signal lands here.
void block_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

std::ofstream open_out(const std::string& path) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

// A HOST:PORT string that is not an existing file means a PRM service.
std::unique_ptr<prm::StepScorer> open_scorer(const std::string& spec, std::shared_ptr<const prm::PrmModel>* local) {
  if (!fs::exists(spec) && spec.find(':') != std::string::npos) {
    return std::make_unique<prm::RemoteScorer>(net::parse_endpoint(spec));
  }
  auto model = std::make_shared<const prm::PrmModel>(prm::load_prm(fs::path(spec)));
  if (local) *local = model;
  return std::make_unique<prm::LocalScorer>(model);
}

std::shared_ptr<const policy::PolicyModel> open_policy(const std::string& path, const world::DistanceOracle& oracle) {
  if (path.empty()) return std::make_shared<const policy::PolicyModel>(recipes::baseline_policy(oracle));
  return std::make_shared<const policy::PolicyModel>(policy::load_policy(path));
}

std::unique_ptr<net::SessionPool> open_pool(const std::string& path) {
  if (path.empty()) return nullptr;
  const auto pc = net::load_pool_config(Config::load(path));
  return std::make_unique<net::SessionPool>(pc.active, pc.backups, pc.options);
}

harness::BenchmarkSuite open_suite(const std::string& path) {
  return path.empty() ? harness::default_suite() : recipes::load_suite(Config::load(path));
}

struct Common {
  std::uint64_t seed = 0;
  std::string policy;
  std::string pool;
  std::size_t workers = 1;
};

void add_seed(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master seed")->required();
}

void add_rollout_opts(CLI::App* cmd, Common& c) {
  cmd->add_option("--policy", c.policy, "Policy checkpoint (default: the frozen behavior-cloned baseline)");
  cmd->add_option("--pool", c.pool, "Environment pool config; rollouts run in-process when omitted");
  cmd->add_option("--workers", c.workers, "In-process rollout threads")->check(CLI::PositiveNumber);
}

// Accuracy against clean labels with a 95% Wilson interval.
void print_accuracy(const prm::PrmModel& model, const datagen::LabeledDataset& data) {
  const double acc = prm::prm_accuracy(model, data);
  const auto n = data.records.size();
  const auto ci = harness::wilson_interval(static_cast<std::size_t>(std::lround(acc * static_cast<double>(n))), n);
  std::cout << "accuracy " << acc << " [" << ci.low << ", " << ci.high << "] on " << n << " records\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PRM supervision toolkit for GUI agents on a simulated phone"};
  app.require_subcommand(1);

  // serve-env
  std::string env_bind = "127.0.0.1:7000", fixture_cfg;
  int crash_on_step = -1;
  auto* serve_env = app.add_subcommand("serve-env", "Serve MiniGUI worlds over TCP");
  serve_env->add_option("--bind", env_bind, "HOST:PORT (port 0 picks one)");
  serve_env->add_option("--fixtures,--fixture", fixture_cfg, "Config file with fixture.* keys")->check(CLI::ExistingFile);
  serve_env->add_option("--crash-on-step", crash_on_step, "Fault injection: crash after this many steps");

  // serve-prm
  std::string prm_bind = "127.0.0.1:7100", prm_model_path;
  auto* serve_prm = app.add_subcommand("serve-prm", "Serve a trained PRM over TCP");
  serve_prm->add_option("--model", prm_model_path, "PRM checkpoint")->required()->check(CLI::ExistingFile);
  serve_prm->add_option("--bind", prm_bind, "HOST:PORT (port 0 picks one)");

  // gen-data
  Common gd;
  std::string gd_out, gd_annotator = "oracle", gd_pipeline = "both";
  std::size_t gd_n = 5000;
  std::optional<std::size_t> gd_traj, gd_single;
  double gd_obstacles = world::kTrainingObstacleProb;
  auto* gen = app.add_subcommand("gen-data", "Generate step-labeled records");
  add_seed(gen, gd);
  add_rollout_opts(gen, gd);
  gen->add_option("--pipeline", gd_pipeline)->check(CLI::IsMember({"both", "traj", "single"}));
  gen->add_option("--n", gd_n,
                  "Episodes (traj) or probes (single); with both, n probes plus n/10 episodes");
  gen->add_option("--trajectories", gd_traj, "Override the episode count");
  gen->add_option("--single-step", gd_single, "Override the probe count");
  gen->add_option("--annotator", gd_annotator)
      ->check(CLI::IsMember({"oracle", "gpt4o-base", "gpt4o-improved", "human"}));
  gen->add_option("--obstacle-prob", gd_obstacles)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--out", gd_out, "NDJSON output")->required();

  // train-prm
  Common tp;
  std::string tp_data, tp_out, tp_metrics;
  auto tp_cfg = recipes::tuned_prm_config();
  double tp_ratio = 1.0, tp_heldout = 0.2;
  auto* train_prm = app.add_subcommand("train-prm", "Balance, split and train a PRM");
  add_seed(train_prm, tp);
  train_prm->add_option("--data", tp_data, "NDJSON records")->required()->check(CLI::ExistingFile);
  train_prm->add_option("--out", tp_out, "Checkpoint path")->required();
  train_prm->add_option("--metrics-out", tp_metrics, "Per-epoch loss CSV");
  train_prm->add_option("--epochs", tp_cfg.epochs)->check(CLI::NonNegativeNumber);
  train_prm->add_option("--lr", tp_cfg.lr)->check(CLI::PositiveNumber);
  train_prm->add_option("--batch", tp_cfg.batch_size)->check(CLI::PositiveNumber);
  train_prm->add_option("--ratio", tp_ratio, "Positive:negative ratio after balancing");
  train_prm->add_option("--heldout", tp_heldout, "Held-out fraction")->check(CLI::Range(0.0, 0.99));

  // eval-prm
  Common ep;
  std::string ep_data, ep_model;
  auto* eval_prm = app.add_subcommand("eval-prm", "PRM accuracy on a record file against clean labels");
  add_seed(eval_prm, ep);
  eval_prm->add_option("--model", ep_model, "PRM checkpoint")->required()->check(CLI::ExistingFile);
  eval_prm->add_option("--data", ep_data, "NDJSON records")->required()->check(CLI::ExistingFile);

  // train-ppo
  Common pp;
  std::string pp_reward = "prm", pp_prm, pp_metrics, pp_out, pp_value_init = "prm";
  int pp_iters = 60;
  ppo::PpoHyper pp_hyper;
  auto* train_ppo = app.add_subcommand("train-ppo", "Online PPO with PRM or outcome rewards");
  add_seed(train_ppo, pp);
  add_rollout_opts(train_ppo, pp);
  train_ppo->add_option("--reward", pp_reward)->check(CLI::IsMember({"prm", "orm"}));
  train_ppo->add_option("--prm", pp_prm, "PRM checkpoint or HOST:PORT of a PRM service");
  train_ppo->add_option("--iters", pp_iters)->check(CLI::NonNegativeNumber);
  train_ppo->add_option("--metrics-out", pp_metrics, "Per-iteration CSV")->required();
  train_ppo->add_option("--out", pp_out, "Trained policy checkpoint");
  train_ppo->add_option("--gamma", pp_hyper.gamma)->check(CLI::Range(0.0, 1.0));
  train_ppo->add_option("--lambda", pp_hyper.lambda)->check(CLI::Range(0.0, 1.0));
  train_ppo->add_option("--clip", pp_hyper.clip)->check(CLI::Range(0.0, 1.0));
  train_ppo->add_option("--epochs", pp_hyper.epochs)->check(CLI::NonNegativeNumber);
  train_ppo->add_option("--actor-lr", pp_hyper.actor_lr)->check(CLI::PositiveNumber);
  train_ppo->add_option("--value-lr", pp_hyper.value_lr)->check(CLI::PositiveNumber);
  train_ppo->add_option("--tasks-per-iter", pp_hyper.tasks_per_iter)->check(CLI::PositiveNumber);
  train_ppo->add_option("--w-p", pp_hyper.weights.w_p)->check(CLI::PositiveNumber);
  train_ppo->add_option("--w-f", pp_hyper.weights.w_f)->check(CLI::NonNegativeNumber);
  train_ppo->add_flag("--hard-prm-reward", pp_hyper.hard_prm_reward, "Use +-1 labels instead of 2p-1");
  train_ppo->add_option("--value-init", pp_value_init, "prm (needs a local --prm checkpoint) or fresh")
      ->check(CLI::IsMember({"prm", "fresh"}));

  // train-grpo
  Common gr;
  std::string gr_mode = "offline", gr_reward = "oracle", gr_prm, gr_metrics, gr_out;
  int gr_iters = 400;
  std::size_t gr_examples = 1000, gr_val = 500;
  grpo::GrpoHyper gr_hyper;
  gr_hyper.lr = 1e-3;
  gr_hyper.eval_every = 80;
  auto* train_grpo = app.add_subcommand("train-grpo", "Group-relative policy optimization");
  add_seed(train_grpo, gr);
  add_rollout_opts(train_grpo, gr);
  train_grpo->add_option("--mode", gr_mode)->check(CLI::IsMember({"trajectory", "offline"}));
  train_grpo->add_option("--reward", gr_reward)->check(CLI::IsMember({"orm", "oracle", "prm"}));
  train_grpo->add_option("--prm", gr_prm, "PRM checkpoint or HOST:PORT (offline prm reward)");
  train_grpo->add_option("--group", gr_hyper.group_size)->check(CLI::Range(2, 1 << 20));
  train_grpo->add_option("--beta", gr_hyper.beta)->check(CLI::NonNegativeNumber);
  train_grpo->add_option("--lr", gr_hyper.lr)->check(CLI::PositiveNumber);
  train_grpo->add_option("--iters", gr_iters, "Iterations (trajectory) or optimizer steps (offline)");
  train_grpo->add_option("--eval-every", gr_hyper.eval_every)->check(CLI::PositiveNumber);
  train_grpo->add_option("--examples", gr_examples, "Offline training states");
  train_grpo->add_option("--validation", gr_val, "Offline validation states");
  train_grpo->add_option("--metrics-out", gr_metrics)->required();
  train_grpo->add_option("--out", gr_out, "Trained policy checkpoint");

  // verify
  Common vf;
  std::string vf_mode = "prm", vf_prm, vf_bench, vf_out;
  std::vector<int> vf_n{3};
  auto* verify_cmd = app.add_subcommand("verify", "Best-of-n verified rollouts on the benchmark");
  add_seed(verify_cmd, vf);
  add_rollout_opts(verify_cmd, vf);
  verify_cmd->add_option("--mode", vf_mode)->check(CLI::IsMember({"prm", "self", "none"}));
  verify_cmd->add_option("--n", vf_n, "Candidate counts, e.g. 1,3,5,8,16")->delimiter(',');
  verify_cmd->add_option("--prm", vf_prm, "PRM checkpoint or HOST:PORT");
  verify_cmd->add_option("--benchmark", vf_bench, "Suite config (default: 20 tasks x 10 seeds)");
  verify_cmd->add_option("--out", vf_out, "Sweep CSV")->required();

  // bench
  Common bn;
  std::string bn_bench, bn_out;
  std::size_t bn_offline = 0;
  auto* bench = app.add_subcommand("bench", "Success rate of a policy on the frozen suite");
  add_seed(bench, bn);
  add_rollout_opts(bench, bn);
  bench->add_option("--benchmark", bn_bench, "Suite config (default: 20 tasks x 10 seeds)");
  bench->add_option("--offline", bn_offline, "Also report greedy TM/EM on this many sampled states");
  bench->add_option("--out", bn_out, "Per-task CSV")->required();

  // report
  std::string rp_out;
  std::vector<std::string> rp_inputs;
  auto* report_cmd = app.add_subcommand("report", "Markdown and SVG report from run CSVs");
  report_cmd->add_option("--out", rp_out, "Report directory")->required();
  report_cmd->add_option("csv", rp_inputs, "Run CSVs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_env) {
      block_signals();
      net::EnvServerOptions opts;
      if (!fixture_cfg.empty()) {
        opts.fixture = std::make_shared<const world::Fixture>(world::load_fixture(Config::load(fixture_cfg)));
      }
      opts.crash_on_step = crash_on_step;
      net::EnvServer server(net::parse_endpoint(env_bind, true), opts);
      std::cout << "serving MiniGUI on " << server.endpoint().str() << std::endl;
      wait_for_signal();
      server.stop();
      return 0;
    }
    if (*serve_prm) {
      block_signals();
      auto model = std::make_shared<const prm::PrmModel>(prm::load_prm(fs::path(prm_model_path)));
      auto server = prm::serve_prm(model, net::parse_endpoint(prm_bind, true));
      std::cout << "serving PRM on " << server->endpoint().str() << std::endl;
      wait_for_signal();
      server->stop();
      return 0;
    }
    if (*report_cmd) {
      std::vector<fs::path> paths(rp_inputs.begin(), rp_inputs.end());
      report::make_report(paths, rp_out);
      std::cout << "report written to " << (fs::path(rp_out) / "index.md").string() << "\n";
      return 0;
    }

    world::DistanceOracle oracle;
    const auto bank = datagen::default_task_bank();

    if (*gen) {
      auto pol = open_policy(gd.policy, oracle);
      auto pool = open_pool(gd.pool);
      policy::PolicyAgent agent(pol);
      recipes::DataSpec spec;
      if (gd_pipeline == "traj") {
        spec.trajectories = gd_n;
        spec.single_step = 0;
      } else if (gd_pipeline == "single") {
        spec.trajectories = 0;
        spec.single_step = gd_n;
      } else {
        spec.trajectories = gd_n / 10;
        spec.single_step = gd_n;
      }
      if (gd_traj) spec.trajectories = *gd_traj;
      if (gd_single) spec.single_step = *gd_single;
      spec.options.obstacle_prob = gd_obstacles;
      spec.options.workers = gd.workers;
      datagen::PipelineStats stats;
      auto records = recipes::prm_records(agent, pool.get(), bank, spec, gd.seed, oracle, &stats);
      const auto annotator = datagen::annotator_preset(gd_annotator);
      datagen::apply_annotator(records, annotator, derive_seed(gd.seed, 7));
      auto out = open_out(gd_out);
      datagen::write_records(out, records);
      std::size_t pos = 0;
      for (const auto& r : records) pos += r.label == datagen::Label::Positive ? 1 : 0;
      std::cout << records.size() << " records (" << pos << " positive, " << stats.skipped
                << " skipped as undefined) -> " << gd_out << "\n";
      return 0;
    }

    if (*train_prm) {
      std::ifstream in(tp_data);
      const auto records = datagen::read_records(in);
      const auto [train, heldout] = datagen::balance_and_split(records, tp_ratio, tp_heldout, derive_seed(tp.seed, 8));
      const auto res = prm::train_prm(train, tp_cfg, derive_seed(tp.seed, 9));
      prm::save_prm(fs::path(tp_out), res.model);
      if (!tp_metrics.empty()) {
        auto out = open_out(tp_metrics);
        out << "epoch,train_loss\n";
        for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) out << e + 1 << "," << res.epoch_loss[e] << "\n";
      }
      std::cout << "trained on " << train.records.size() << " (" << train.pos_count << "+/" << train.neg_count
                << "-)\n";
      if (!heldout.records.empty()) {
        std::cout << "held-out ";
        print_accuracy(res.model, heldout);
      }
      return 0;
    }

    if (*eval_prm) {
      std::ifstream in(ep_data);
      datagen::LabeledDataset data;
      data.records = datagen::read_records(in);
      data.recount();
      print_accuracy(prm::load_prm(fs::path(ep_model)), data);
      return 0;
    }

    if (*train_ppo) {
      const auto mode = pp_reward == "prm" ? ppo::RewardMode::Prm : ppo::RewardMode::Orm;
      std::shared_ptr<const prm::PrmModel> local;
      std::unique_ptr<prm::StepScorer> scorer;
      if (!pp_prm.empty()) scorer = open_scorer(pp_prm, &local);
      if (mode == ppo::RewardMode::Prm && !scorer) throw ValidationError("--reward prm needs --prm");
      auto pol = open_policy(pp.policy, oracle);
      auto pool = open_pool(pp.pool);
      pp_hyper.workers = pp.workers;
      const bool from_prm = mode == ppo::RewardMode::Prm && pp_value_init == "prm";
      if (from_prm && !local) throw ValidationError("--value-init prm needs a local --prm checkpoint");
      auto value = from_prm ? policy::init_value_from_prm(*local) : policy::make_value(derive_seed(pp.seed, 11));
      const auto res =
          ppo::train_ppo(*pol, value, mode, scorer.get(), pool.get(), bank, pp_iters, pp_hyper, pp.seed);
      auto out = open_out(pp_metrics);
      ppo::write_metrics_csv(out, res.metrics);
      if (!pp_out.empty()) policy::save_policy(pp_out, res.policy);
      if (!res.metrics.empty()) std::cout << "final batch success rate " << res.metrics.back().success_rate << "\n";
      return 0;
    }

    if (*train_grpo) {
      auto pol = open_policy(gr.policy, oracle);
      gr_hyper.workers = gr.workers;
      auto out = open_out(gr_metrics);
      policy::PolicyModel trained;
      if (gr_mode == "trajectory") {
        if (gr_reward != "orm") throw ValidationError("trajectory mode uses the outcome reward (--reward orm)");
        auto pool = open_pool(gr.pool);
        auto res = grpo::train_grpo_trajectory(*pol, pool.get(), bank, gr_hyper, gr_iters, gr.seed);
        grpo::write_metrics_csv(out, res.metrics);
        trained = std::move(res.policy);
      } else {
        if (gr_reward == "orm") throw ValidationError("offline mode uses --reward oracle or prm");
        std::unique_ptr<prm::StepScorer> scorer;
        if (gr_reward == "prm") {
          if (gr_prm.empty()) throw ValidationError("--reward prm needs --prm");
          scorer = open_scorer(gr_prm, nullptr);
        }
        const auto train = datagen::offline_examples(bank, gr_examples, derive_seed(gr.seed, 21), oracle,
                                                     world::kTrainingObstacleProb);
        const auto val = datagen::offline_examples(bank, gr_val, derive_seed(gr.seed, 22), oracle,
                                                   world::kTrainingObstacleProb);
        const auto reward = gr_reward == "prm" ? grpo::OfflineReward::Prm : grpo::OfflineReward::Oracle;
        auto res = grpo::train_grpo_offline(*pol, train, val, reward, scorer.get(), gr_hyper, gr_iters, gr.seed);
        grpo::write_metrics_csv(out, res.metrics);
        trained = std::move(res.policy);
      }
      if (!gr_out.empty()) policy::save_policy(gr_out, trained);
      return 0;
    }

    if (*verify_cmd) {
      const auto mode = *verify::parse_mode(vf_mode);
      std::unique_ptr<prm::StepScorer> scorer;
      if (!vf_prm.empty()) scorer = open_scorer(vf_prm, nullptr);
      if (mode == verify::Mode::Prm && !scorer) throw ValidationError("--mode prm needs --prm");
      auto pol = open_policy(vf.policy, oracle);
      auto pool = open_pool(vf.pool);
      const auto suite = open_suite(vf_bench);
      const auto rows = verify::sweep_n(pol, scorer.get(), mode, suite, vf_n, vf.seed, pool.get(), vf.workers);
      auto out = open_out(vf_out);
      harness::write_sweep_csv(out, rows);
      for (const auto& r : rows) {
        std::cout << "n=" << r.n << " SR " << r.success_rate << " [" << r.ci_low << ", " << r.ci_high << "]\n";
      }
      return 0;
    }

    if (*bench) {
      auto pol = open_policy(bn.policy, oracle);
      auto pool = open_pool(bn.pool);
      const auto suite = open_suite(bn_bench);
      const auto r = harness::run_benchmark(pol, nullptr, {1, verify::Mode::None, true}, suite, bn.seed, pool.get(),
                                            bn.workers);
      auto out = open_out(bn_out);
      harness::write_report_csv(out, r);
      std::cout << "SR " << r.success_rate << " [" << r.ci.low << ", " << r.ci.high << "] over " << r.episodes
                << " episodes, suite " << suite.hash << "\n";
      if (bn_offline > 0) {
        const auto ex = datagen::offline_examples(bank, bn_offline, derive_seed(bn.seed, 22), oracle,
                                                  world::kTrainingObstacleProb);
        const auto o = harness::eval_offline(harness::greedy_predictor(pol), ex);
        std::cout << "offline TM " << o.type_match << " EM " << o.exact_match << " on " << o.examples << " states\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "prmgui: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
