#include "prmgui/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "prmgui/error.hpp"

namespace prmgui::harness {

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::pair<std::vector<world::TaskSpec>, std::vector<std::uint64_t>> BenchmarkSuite::expand() const {
  std::pair<std::vector<world::TaskSpec>, std::vector<std::uint64_t>> out;
  for (const auto& t : tasks) {
    for (auto s : seeds) {
      out.first.push_back(t);
      out.second.push_back(s);
    }
  }
  return out;
}

std::string suite_hash(const BenchmarkSuite& suite) {
  nlohmann::json j;
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : suite.tasks) j["tasks"].push_back(world::to_json(t));
  j["seeds"] = suite.seeds;
  char p[64];
  std::snprintf(p, sizeof p, "%a", suite.obstacle_prob);
  j["obstacle_prob"] = p;
  return content_hash(j.dump());
}

BenchmarkSuite freeze(BenchmarkSuite suite) {
  if (suite.tasks.empty() || suite.seeds.empty()) throw ValidationError("benchmark suite is empty");
  for (auto s : suite.seeds) {
    if (s & (1ULL << 63)) throw ValidationError("benchmark seed " + std::to_string(s) + " lies in the training range");
  }
  suite.hash = suite_hash(suite);
  return suite;
}

void check_frozen(const BenchmarkSuite& suite) {
  if (suite.hash.empty()) throw ValidationError("benchmark suite was never frozen");
  if (suite_hash(suite) != suite.hash) throw ValidationError("benchmark suite changed after it was frozen");
}

BenchmarkSuite default_suite(int seeds_per_task) {
  BenchmarkSuite s;
  s.tasks = datagen::default_task_bank("t");
  for (int i = 0; i < seeds_per_task; ++i) s.seeds.push_back(kBenchmarkSeedBase + static_cast<std::uint64_t>(i));
  s.obstacle_prob = world::kTrainingObstacleProb;
  return freeze(std::move(s));
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  if (successes > trials) throw ValidationError("more successes than trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // At the edges the bound is exact; rounding would otherwise miss p by 1e-17.
  const double low = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double high = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {low, high};
}

namespace {

MetricsReport aggregate(const std::vector<Trajectory>& trajs) {
  MetricsReport r;
  std::map<std::string, TaskBreakdown> by_task;
  for (const auto& t : trajs) {
    auto& b = by_task[t.task.task_id];
    b.task_id = t.task.task_id;
    ++b.episodes;
    b.successes += t.success ? 1 : 0;
    ++r.episodes;
    r.successes += t.success ? 1 : 0;
  }
  for (auto& [_, b] : by_task) r.per_task.push_back(b);
  r.success_rate = r.episodes ? static_cast<double>(r.successes) / static_cast<double>(r.episodes) : 0.0;
  r.ci = wilson_interval(r.successes, r.episodes);
  return r;
}

}  // namespace

MetricsReport run_benchmark(const Agent& agent, const BenchmarkSuite& suite, std::uint64_t policy_seed,
                            net::SessionPool* pool, std::size_t workers) {
  check_frozen(suite);
  const auto [tasks, seeds] = suite.expand();
  const auto trajs = pool ? net::parallel_rollouts(*pool, agent, tasks, seeds, suite.obstacle_prob, policy_seed)
                          : net::local_rollouts(agent, tasks, seeds, suite.obstacle_prob, policy_seed, workers);
  auto r = aggregate(trajs);
  r.metadata["suite_hash"] = suite.hash;
  r.metadata["policy_seed"] = std::to_string(policy_seed);
  r.metadata["seeds"] = std::to_string(suite.seeds.front()) + ".." + std::to_string(suite.seeds.back());
  r.metadata["version"] = kVersion;
  return r;
}

MetricsReport run_benchmark(std::shared_ptr<const policy::PolicyModel> pol, const prm::StepScorer* scorer,
                            const verify::VerifierConfig& config, const BenchmarkSuite& suite,
                            std::uint64_t policy_seed, net::SessionPool* pool, std::size_t workers) {
  verify::VerifiedAgent agent(std::move(pol), scorer, config);
  auto r = run_benchmark(agent, suite, policy_seed, pool, workers);
  r.metadata["verifier"] = std::string(verify::to_string(config.mode)) + "/n=" + std::to_string(config.n);
  return r;
}

void write_report_csv(std::ostream& out, const MetricsReport& r) {
  out << "scope,episodes,successes,success_rate,ci_low,ci_high\n";
  char buf[256];
  auto row = [&](const std::string& scope, std::size_t n, std::size_t k) {
    const auto ci = wilson_interval(k, n);
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.6f,%.6f,%.6f\n", scope.c_str(), n, k,
                  n ? static_cast<double>(k) / static_cast<double>(n) : 0.0, ci.low, ci.high);
    out << buf;
  };
  for (const auto& b : r.per_task) row(b.task_id, b.episodes, b.successes);
  row("all", r.episodes, r.successes);
}

std::string normalize_whitespace(const std::string& s) {
  std::string out;
  bool gap = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      gap = !out.empty();
      continue;
    }
    if (gap) out.push_back(' ');
    gap = false;
    out.push_back(c);
  }
  return out;
}

bool type_match(const world::Action& predicted, const world::Action& truth) { return predicted.kind == truth.kind; }

bool exact_match(const world::Action& predicted, const world::Action& truth, const world::GuiState& state) {
  using world::ActionKind;
  if (predicted.kind != truth.kind) return false;
  switch (truth.kind) {
    case ActionKind::Click:
    case ActionKind::LongPress: {
      if (!predicted.point || !truth.point) return false;
      // Later widgets draw on top (obstacle buttons come last).
      for (auto it = state.widgets.rbegin(); it != state.widgets.rend(); ++it) {
        if (it->bounds.contains(*truth.point)) return it->bounds.contains(*predicted.point);
      }
      return *predicted.point == *truth.point;
    }
    case ActionKind::Type:
      return predicted.content && truth.content && normalize_whitespace(*predicted.content) == normalize_whitespace(*truth.content);
    case ActionKind::Scroll:
      return predicted.direction == truth.direction;
    case ActionKind::OpenApp:
      return predicted.app_name == truth.app_name;
    default:
      return true;
  }
}

OfflineReport eval_offline(const OfflinePredictor& predict, const std::vector<datagen::OfflineExample>& examples) {
  if (examples.empty()) throw ValidationError("eval_offline: empty dataset");
  std::size_t tm = 0, em = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const auto a = predict(ex, i);
    tm += type_match(a, ex.ground_truth) ? 1 : 0;
    em += exact_match(a, ex.ground_truth, ex.state) ? 1 : 0;
  }
  const double n = static_cast<double>(examples.size());
  return {examples.size(), static_cast<double>(tm) / n, static_cast<double>(em) / n};
}

OfflinePredictor greedy_predictor(std::shared_ptr<const policy::PolicyModel> pol) {
  return [pol](const datagen::OfflineExample& ex, std::size_t) {
    const auto cands = world::enumerate_actions(ex.state, ex.task);
    const auto lp = policy::log_probs(*pol, prm::featurize_all(ex.task, ex.state, cands));
    return cands[policy::argmax(lp)];
  };
}

OfflinePredictor verified_predictor(std::shared_ptr<const policy::PolicyModel> pol, const prm::StepScorer* scorer,
                                    const verify::VerifierConfig& config, std::uint64_t seed) {
  auto agent = std::make_shared<verify::VerifiedAgent>(pol, scorer, config);
  return [agent, seed](const datagen::OfflineExample& ex, std::size_t i) {
    const auto cands = world::enumerate_actions(ex.state, ex.task);
    Rng rng(derive_seed(seed, i));
    return cands[agent->choose(ex.task, ex.state, cands, rng, EpisodeContext{}).index];
  };
}

MeanCi mean_ci(const std::vector<double>& xs) {
  MeanCi m;
  if (xs.empty()) return m;
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) {
    m.ci = {m.mean, m.mean};
    return m;
  }
  double v = 0.0;
  for (double x : xs) v += (x - m.mean) * (x - m.mean);
  const double se = std::sqrt(v / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  m.ci = {m.mean - 1.96 * se, m.mean + 1.96 * se};
  return m;
}

std::vector<AblationRow> ablation_annotation(std::shared_ptr<const policy::PolicyModel> pol, const DataSource& data,
                                             const BenchmarkSuite& suite, const AblationConfig& cfg) {
  if (cfg.presets.empty() || cfg.seeds.empty()) throw ValidationError("ablation needs presets and seeds");
  std::vector<datagen::Annotator> arms;
  for (const auto& name : cfg.presets) arms.push_back(datagen::annotator_preset(name));
  std::vector<AblationRow> rows;
  for (const auto& arm : arms) {
    for (auto seed : cfg.seeds) {
      // Regenerated per arm rather than cached: the source is deterministic in
      // the seed, and holding every seed's records at once is the larger cost.
      auto records = data(seed);
      datagen::apply_annotator(records, arm, derive_seed(seed, 7));
      const auto [train, heldout] = datagen::balance_and_split(records, cfg.ratio, cfg.heldout_fraction,
                                                               derive_seed(seed, 8));
      const auto trained = prm::train_prm(train, cfg.train, derive_seed(seed, 9));
      AblationRow row;
      row.annotator = arm.name;
      row.accuracy = arm.accuracy;
      row.seed = seed;
      row.prm_accuracy = prm::prm_accuracy(trained.model, heldout);
      prm::LocalScorer scorer(std::make_shared<const prm::PrmModel>(trained.model));
      row.success_rate =
          run_benchmark(pol, &scorer, cfg.verifier, suite, derive_seed(seed, 10), nullptr, cfg.workers).success_rate;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "annotator,accuracy,seed,prm_accuracy,success_rate\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.2f,%llu,%.6f,%.6f\n", r.annotator.c_str(), r.accuracy,
                  static_cast<unsigned long long>(r.seed), r.prm_accuracy, r.success_rate);
    out << buf;
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<verify::SweepRow>& rows) {
  out << "n,success_rate,ci_low,ci_high,ms_per_step,episodes\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.4f,%zu\n", r.n, r.success_rate, r.ci_low, r.ci_high,
                  r.ms_per_step, r.episodes);
    out << buf;
  }
}

}  // namespace prmgui::harness
