#include "prmgui/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "prmgui/error.hpp"
#include "prmgui/parallel.hpp"

namespace prmgui::datagen {

using nlohmann::json;
using world::Action;
using world::ActionKind;
using world::TaskSpec;
using world::Template;

std::string_view to_string(Label l) { return l == Label::Positive ? "positive" : "negative"; }
std::string_view to_string(Source s) { return s == Source::TrajectoryPipeline ? "trajectory" : "single_step"; }
std::string_view to_string(Split s) { return s == Split::Train ? "train" : "heldout"; }
Label flip(Label l) { return l == Label::Positive ? Label::Negative : Label::Positive; }

Annotator annotator_preset(std::string_view name) {
  if (name == "oracle") return {"oracle", 1.0};
  if (name == "gpt4o-base") return {"gpt4o-base", 0.86};
  if (name == "gpt4o-improved") return {"gpt4o-improved", 0.92};
  if (name == "human") return {"human", 0.98};
  throw ValidationError("unknown annotator preset '" + std::string(name) + "'");
}

std::vector<std::string> annotator_preset_names() { return {"oracle", "gpt4o-base", "gpt4o-improved", "human"}; }

void LabeledDataset::recount() {
  pos_count = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const StepRecord& r) { return r.label == Label::Positive; }));
  neg_count = records.size() - pos_count;
}

Label annotate_oracle(const world::WorldInstance& w, const Action& action, const world::DistanceOracle& oracle) {
  if (action.kind == ActionKind::Finished) {
    return world::check_success(w) ? Label::Positive : Label::Negative;
  }
  if (world::is_correct_dismissal(w, action)) return Label::Positive;
  const auto before = oracle.distance(w);
  if (!before.reachable()) throw AnnotationUndefined("success unreachable before the action");
  const auto after = oracle.distance_after(w, action);
  if (!after.reachable()) throw AnnotationUndefined("success unreachable after " + world::describe(action));
  return *after.steps < *before.steps ? Label::Positive : Label::Negative;
}

Label annotate_noisy(Label label, double accuracy, Rng& rng) {
  if (!(accuracy >= 0.5 && accuracy <= 1.0)) throw ValidationError("annotator accuracy must be in [0.5, 1]");
  return uniform01(rng) < accuracy ? label : flip(label);
}

void apply_annotator(std::vector<StepRecord>& records, const Annotator& annotator, std::uint64_t seed) {
  if (!(annotator.accuracy >= 0.5 && annotator.accuracy <= 1.0)) {
    throw ValidationError("annotator accuracy must be in [0.5, 1]");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    records[i].label = annotate_noisy(records[i].oracle_label, annotator.accuracy, rng);
    records[i].annotator = annotator;
  }
}

namespace {

constexpr std::uint64_t kTaskTag = 1;
constexpr std::uint64_t kWorldTag = 2;
constexpr std::uint64_t kPolicyTag = 3;
constexpr std::uint64_t kNoiseTag = 4;
constexpr std::uint64_t kProbeTag = 5;

std::vector<Action> non_terminal(std::vector<Action> cands) {
  std::erase_if(cands, [](const Action& a) { return a.kind == ActionKind::Finished; });
  return cands;
}

}  // namespace

std::vector<StepRecord> rollout_pipeline(const Agent& policy, net::SessionPool* pool,
                                         const std::vector<TaskSpec>& task_bank, std::size_t n_trajectories,
                                         std::uint64_t seed, const world::DistanceOracle& oracle,
                                         const PipelineOptions& opts, PipelineStats* stats) {
  if (n_trajectories == 0) return {};
  if (task_bank.empty()) throw ValidationError("task bank is empty");
  std::vector<TaskSpec> tasks;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_trajectories; ++i) {
    Rng rng(derive_seed(seed, kTaskTag, i));
    tasks.push_back(task_bank[uniform_index(rng, task_bank.size())]);
    seeds.push_back(derive_seed(seed, kWorldTag, i));
  }
  const std::uint64_t policy_seed = derive_seed(seed, kPolicyTag);
  const auto trajs = pool ? net::parallel_rollouts(*pool, policy, tasks, seeds, opts.obstacle_prob, policy_seed)
                          : net::local_rollouts(policy, tasks, seeds, opts.obstacle_prob, policy_seed, opts.workers);

  std::vector<std::vector<StepRecord>> per_traj(trajs.size());
  std::vector<std::size_t> skipped(trajs.size(), 0);
  parallel_for(trajs.size(), opts.workers, [&](std::size_t t) {
    const auto& traj = trajs[t];
    auto w = world::create_world(traj.task, traj.seed, traj.obstacle_prob);
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      const auto& st = traj.steps[k];
      try {
        StepRecord r;
        r.task = traj.task;
        r.seed = traj.seed;
        r.step_index = static_cast<int>(k);
        r.state = st.state;
        r.action = st.action;
        r.oracle_label = annotate_oracle(w, st.action, oracle);
        r.label = r.oracle_label;
        r.source = Source::TrajectoryPipeline;
        per_traj[t].push_back(std::move(r));
      } catch (const AnnotationUndefined&) {
        ++skipped[t];
      }
      world::step(w, st.action);
    }
  });
  std::vector<StepRecord> out;
  std::size_t skip_total = 0;
  for (std::size_t t = 0; t < trajs.size(); ++t) {
    for (auto& r : per_traj[t]) out.push_back(std::move(r));
    skip_total += skipped[t];
  }
  apply_annotator(out, opts.annotator, derive_seed(seed, kNoiseTag));
  if (stats) {
    stats->records += out.size();
    stats->skipped += skip_total;
  }
  return out;
}

SampledState sample_state(const std::vector<TaskSpec>& task_bank, std::size_t i, std::uint64_t seed,
                          double obstacle_prob, const world::DistanceOracle& oracle) {
  if (task_bank.empty()) throw ValidationError("task bank is empty");
  Rng rng(derive_seed(seed, kTaskTag, i));
  const TaskSpec& task = task_bank[uniform_index(rng, task_bank.size())];
  const std::uint64_t wseed = derive_seed(seed, kWorldTag, i);
  SampledState s{task, wseed, {}, world::create_world(task, wseed, obstacle_prob)};
  const auto len = static_cast<int>(uniform_index(rng, kMaxPrefix + 1));
  for (int t = 0; t < len; ++t) {
    if (s.world.done() || s.world.state().step_count + 1 >= task.max_steps) break;
    const auto cands = non_terminal(world::enumerate_actions(s.world.state(), task));
    Action a = cands[uniform_index(rng, cands.size())];
    if (uniform01(rng) < 0.5) {
      for (const auto& opt : oracle.optimal_actions(s.world)) {
        if (opt.kind != ActionKind::Finished) {
          a = opt;
          break;
        }
      }
    }
    world::step(s.world, a);
    s.prefix.push_back(std::move(a));
  }
  return s;
}

std::vector<StepRecord> single_step_pipeline(const std::vector<TaskSpec>& task_bank, const Agent& policy,
                                             std::size_t n_samples, std::uint64_t seed,
                                             const world::DistanceOracle& oracle, const PipelineOptions& opts,
                                             PipelineStats* stats) {
  if (n_samples == 0) return {};
  if (task_bank.empty()) throw ValidationError("task bank is empty");
  std::vector<std::optional<StepRecord>> slots(n_samples);
  parallel_for(n_samples, opts.workers, [&](std::size_t i) {
    SampledState s = sample_state(task_bank, i, seed, opts.obstacle_prob, oracle);
    const auto cands = world::enumerate_actions(s.world.state(), s.task);
    Rng rng(derive_seed(seed, kProbeTag, i));
    EpisodeContext ctx{s.seed, opts.obstacle_prob, s.prefix, nullptr};
    const auto choice = policy.choose(s.task, s.world.state(), cands, rng, ctx);
    StepRecord r;
    r.task = s.task;
    r.seed = s.seed;
    r.step_index = static_cast<int>(s.prefix.size());
    r.state = s.world.state();
    r.action = cands.at(choice.index);
    try {
      r.oracle_label = annotate_oracle(s.world, r.action, oracle);
    } catch (const AnnotationUndefined&) {
      return;
    }
    r.label = r.oracle_label;
    r.source = Source::SingleStepPipeline;
    slots[i] = std::move(r);
  });
  std::vector<StepRecord> out;
  std::size_t skipped = 0;
  for (auto& s : slots) {
    if (s) {
      out.push_back(std::move(*s));
    } else {
      ++skipped;
    }
  }
  apply_annotator(out, opts.annotator, derive_seed(seed, kNoiseTag));
  if (stats) {
    stats->records += out.size();
    stats->skipped += skipped;
  }
  return out;
}

namespace {

LabeledDataset balance_split(const std::vector<const StepRecord*>& recs, double ratio, std::uint64_t seed,
                             Split split) {
  LabeledDataset ds;
  ds.split = split;
  if (recs.empty()) return ds;
  // [source][label] -> indices into recs
  std::map<Source, std::array<std::vector<std::size_t>, 2>> groups;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    groups[recs[i]->source][recs[i]->label == Label::Positive ? 0 : 1].push_back(i);
  }
  // A source with a single label cannot keep its share; it is dropped.
  double usable = 0.0;
  for (const auto& [src, g] : groups) {
    if (!g[0].empty() && !g[1].empty()) usable += static_cast<double>(g[0].size() + g[1].size());
  }
  if (usable == 0.0) throw BalanceImpossible("split " + std::string(to_string(split)) + " has a single label");
  double k = std::numeric_limits<double>::infinity();
  for (const auto& [src, g] : groups) {
    if (g[0].empty() || g[1].empty()) continue;
    const double share = static_cast<double>(g[0].size() + g[1].size()) / usable;
    k = std::min(k, std::min(static_cast<double>(g[1].size()), static_cast<double>(g[0].size()) / ratio) / share);
  }
  std::vector<std::size_t> keep;
  for (auto& [src, g] : groups) {
    if (g[0].empty() || g[1].empty()) continue;
    const double share = static_cast<double>(g[0].size() + g[1].size()) / usable;
    const auto n_neg = static_cast<std::size_t>(std::floor(share * k + 1e-9));
    const auto n_pos = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_neg) + 1e-9));
    for (int lab = 0; lab < 2; ++lab) {
      auto idx = g[lab];
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(src), static_cast<std::uint64_t>(lab)));
      shuffle(std::span<std::size_t>(idx), rng);
      idx.resize(std::min(idx.size(), lab == 0 ? n_pos : n_neg));
      keep.insert(keep.end(), idx.begin(), idx.end());
    }
  }
  std::sort(keep.begin(), keep.end());
  for (auto i : keep) ds.records.push_back(*recs[i]);
  ds.recount();
  return ds;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> balance_and_split(const std::vector<StepRecord>& records, double ratio,
                                                            double heldout_fraction, std::uint64_t seed) {
  if (!(ratio > 0.0)) throw ValidationError("balance ratio must be positive");
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
    throw ValidationError("heldout_fraction must be in [0, 1)");
  }
  const bool has_pos = std::any_of(records.begin(), records.end(), [](auto& r) { return r.label == Label::Positive; });
  const bool has_neg = std::any_of(records.begin(), records.end(), [](auto& r) { return r.label == Label::Negative; });
  if (!has_pos || !has_neg) throw BalanceImpossible("balancing needs both labels");

  std::vector<const StepRecord*> train, heldout;
  for (const auto& r : records) {
    const std::string key = r.task.task_id + "#" + std::to_string(r.seed);
    Rng rng(derive_seed(seed, fnv1a(key)));
    (uniform01(rng) < heldout_fraction ? heldout : train).push_back(&r);
  }
  auto tr = balance_split(train, ratio, derive_seed(seed, 11), Split::Train);
  LabeledDataset ho;
  ho.split = Split::Heldout;
  if (!heldout.empty()) ho = balance_split(heldout, ratio, derive_seed(seed, 12), Split::Heldout);
  return {std::move(tr), std::move(ho)};
}

json to_json(const StepRecord& r) {
  return {{"task", world::to_json(r.task)},
          {"seed", r.seed},
          {"step", r.step_index},
          {"state", world::to_json(r.state)},
          {"action", world::to_json(r.action)},
          {"label", to_string(r.label)},
          {"oracle_label", to_string(r.oracle_label)},
          {"source", to_string(r.source)},
          {"annotator", {{"name", r.annotator.name}, {"accuracy", r.annotator.accuracy}}}};
}

namespace {

Label parse_label(const std::string& s) {
  if (s == "positive") return Label::Positive;
  if (s == "negative") return Label::Negative;
  throw FormatError("unknown label '" + s + "'");
}

}  // namespace

StepRecord record_from_json(const json& j) {
  StepRecord r;
  r.task = world::task_from_json(j.at("task"));
  r.seed = j.at("seed").get<std::uint64_t>();
  r.step_index = j.at("step").get<int>();
  r.state = world::gui_state_from_json(j.at("state"));
  r.action = world::action_from_json(j.at("action"));
  r.label = parse_label(j.at("label").get<std::string>());
  r.oracle_label = parse_label(j.at("oracle_label").get<std::string>());
  const auto src = j.at("source").get<std::string>();
  if (src == "trajectory") {
    r.source = Source::TrajectoryPipeline;
  } else if (src == "single_step") {
    r.source = Source::SingleStepPipeline;
  } else {
    throw FormatError("unknown source '" + src + "'");
  }
  r.annotator.name = j.at("annotator").at("name").get<std::string>();
  r.annotator.accuracy = j.at("annotator").at("accuracy").get<double>();
  return r;
}

void write_records(std::ostream& out, const std::vector<StepRecord>& records) {
  out << json{{"schema", "prmgui-steps"}, {"version", kDatasetSchemaVersion}, {"count", records.size()}}.dump()
      << '\n';
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw IoError("failed writing dataset");
}

std::vector<StepRecord> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset is empty (missing header)");
  const auto header = json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("schema", "") != "prmgui-steps") {
    throw FormatError("not a prmgui step dataset");
  }
  if (header.value("version", -1) != kDatasetSchemaVersion) {
    throw VersionMismatch("dataset schema version " + header["version"].dump() + ", expected " +
                          std::to_string(kDatasetSchemaVersion));
  }
  std::vector<StepRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError("dataset line " + std::to_string(lineno) + " is not JSON");
    out.push_back(record_from_json(j));
  }
  return out;
}

std::vector<TaskSpec> default_task_bank(const std::string& id_prefix) {
  std::vector<TaskSpec> bank;
  int n = 0;
  auto add = [&](Template t, std::map<std::string, std::string> p) {
    bank.push_back(world::make_task(id_prefix + std::to_string(n++), t, std::move(p)));
  };
  for (const char* name : {"John", "Emma", "Frank", "Grace"}) add(Template::AddContact, {{"name", name}});
  for (const char* name : {"Dave", "Henry", "Irene", "Jack"}) add(Template::DeleteContact, {{"name", name}});
  for (const char* time : {"07:30", "06:45", "09:15", "21:05"}) add(Template::SetAlarm, {{"time", time}});
  add(Template::ToggleSetting, {{"setting", "Bluetooth"}, {"state", "on"}});
  add(Template::ToggleSetting, {{"setting", "Wi-Fi"}, {"state", "off"}});
  add(Template::ToggleSetting, {{"setting", "Airplane mode"}, {"state", "on"}});
  add(Template::ToggleSetting, {{"setting", "Bluetooth"}, {"state", "off"}});
  add(Template::WriteNote, {{"title", "Groceries"}, {"body", "Buy milk"}});
  add(Template::WriteNote, {{"title", "Meeting"}, {"body", "At noon"}});
  add(Template::WriteNote, {{"title", "Trip"}, {"body", "Pack bags"}});
  add(Template::WriteNote, {{"title", "Gym"}, {"body", "Leg day"}});
  return bank;
}

std::vector<OfflineExample> offline_examples(const std::vector<TaskSpec>& task_bank, std::size_t n, std::uint64_t seed,
                                             const world::DistanceOracle& oracle, double obstacle_prob) {
  std::vector<OfflineExample> out;
  out.reserve(n);
  for (std::size_t i = 0; out.size() < n; ++i) {
    if (i > 4 * n + 100) throw ValidationError("could not sample enough reachable states");
    auto s = sample_state(task_bank, i, seed, obstacle_prob, oracle);
    const auto opt = oracle.optimal_actions(s.world);
    if (opt.empty()) continue;
    out.push_back({s.task, s.seed, s.world.state(), opt.front()});
  }
  return out;
}

}  // namespace prmgui::datagen
