#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "prmgui/datagen.hpp"
#include "prmgui/error.hpp"

using namespace prmgui;
using namespace prmgui::datagen;

namespace {

const world::DistanceOracle& oracle() {
  static world::DistanceOracle o;
  return o;
}

// Synthetic records: one per (task, seed) group so the split is fine-grained.
std::vector<StepRecord> synthetic(std::size_t pos, std::size_t neg, Source src, std::uint64_t seed_base = 0) {
  const auto task = world::make_task("t", world::Template::AddContact, {{"name", "John"}});
  std::vector<StepRecord> out;
  for (std::size_t i = 0; i < pos + neg; ++i) {
    StepRecord r;
    r.task = task;
    r.seed = seed_base + i;
    r.label = r.oracle_label = i < pos ? Label::Positive : Label::Negative;
    r.source = src;
    out.push_back(r);
  }
  return out;
}

double source_share(const LabeledDataset& d, Source s) {
  std::size_t k = 0;
  for (const auto& r : d.records) k += r.source == s ? 1 : 0;
  return static_cast<double>(k) / static_cast<double>(d.records.size());
}

}  // namespace

TEST_CASE("BFS-optimal actions are positive and missed clicks negative") {
  for (const auto& task : default_task_bank()) {
    auto w = world::create_world(task, 21, 0.0);
    const auto opt = oracle().optimal_actions(w);
    REQUIRE_FALSE(opt.empty());
    CHECK(annotate_oracle(w, opt.front(), oracle()) == Label::Positive);
    CHECK(annotate_oracle(w, world::Action::click({0.01, 0.99}), oracle()) == Label::Negative);
    CHECK(annotate_oracle(w, world::Action::wait(), oracle()) == Label::Negative);
  }
}

TEST_CASE("Finished is positive only in a solved state") {
  const auto task = world::make_task("t", world::Template::AddContact, {{"name", "John"}});
  auto w = world::create_world(task, 7, 0.0);
  CHECK(annotate_oracle(w, world::Action::finished(), oracle()) == Label::Negative);
  while (!world::check_success(w)) world::step(w, oracle().optimal_actions(w).front());
  CHECK(annotate_oracle(w, world::Action::finished(), oracle()) == Label::Positive);
}

TEST_CASE("the right dialog button is positive and the wrong one negative") {
  const auto task = world::make_task("t", world::Template::AddContact, {{"name", "John"}});
  auto w = world::create_world(task, 3, 1.0);
  world::step(w, world::Action::open_app("Contacts"));
  REQUIRE(w.state().obstacle.has_value());
  const auto acts = world::enumerate_actions(w.state(), task);
  const auto opt = oracle().optimal_actions(w);
  REQUIRE(opt.size() == 1);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(annotate_oracle(w, acts[i], oracle()) == (acts[i] == opt.front() ? Label::Positive : Label::Negative));
  }
}

TEST_CASE("a dialog over a solved task must be dismissed before Finished") {
  const auto task = world::make_task("t", world::Template::ToggleSetting, {{"setting", "Wi-Fi"}, {"state", "off"}});
  bool seen = false;
  for (std::uint64_t seed = 0; seed < 200 && !seen; ++seed) {
    auto w = world::create_world(task, seed, 1.0);
    if (!world::check_success(w)) continue;
    world::step(w, world::Action::open_app("Clock"));
    if (!w.state().obstacle) continue;
    seen = true;
    CHECK(*oracle().distance(w).steps == 0);
    const auto opt = oracle().optimal_actions(w);
    REQUIRE(opt.size() == 1);
    CHECK(world::is_correct_dismissal(w, opt.front()));
    CHECK(annotate_oracle(w, opt.front(), oracle()) == Label::Positive);
  }
  CHECK(seen);
}

TEST_CASE("unreachable states cannot be annotated") {
  auto fx = std::make_shared<world::Fixture>();
  fx->installed = {world::App::Clock};
  const auto task = world::make_task("t", world::Template::AddContact, {{"name", "John"}});
  const auto w = world::create_world(task, 1, 0.0, fx);
  CHECK_THROWS_AS(annotate_oracle(w, world::Action::wait(), oracle()), AnnotationUndefined);
}

TEST_CASE("an optimal agent's trajectory is labeled positive throughout") {
  OracleAgent agent(oracle());
  PipelineStats stats;
  const auto recs = rollout_pipeline(agent, nullptr, default_task_bank(), 1, 3, oracle(), {}, &stats);
  REQUIRE_FALSE(recs.empty());
  for (const auto& r : recs) {
    CHECK(r.label == Label::Positive);
    CHECK(r.source == Source::TrajectoryPipeline);
  }
  CHECK(stats.records == recs.size());
  CHECK(rollout_pipeline(agent, nullptr, default_task_bank(), 0, 3, oracle()).empty());
}

TEST_CASE("a uniform agent produces both labels") {
  UniformAgent agent;
  const auto recs = rollout_pipeline(agent, nullptr, default_task_bank(), 100, 4, oracle());
  std::set<Label> seen;
  for (const auto& r : recs) seen.insert(r.label);
  CHECK(seen.size() == 2);
}

TEST_CASE("single-step sampling is deterministic and uniform over templates") {
  UniformAgent agent;
  const auto bank = default_task_bank();
  CHECK(single_step_pipeline(bank, agent, 0, 1, oracle()).empty());
  const auto a = single_step_pipeline(bank, agent, 50, 8, oracle());
  const auto b = single_step_pipeline(bank, agent, 50, 8, oracle());
  CHECK(a == b);
  for (const auto& r : a) CHECK(r.source == Source::SingleStepPipeline);

  // Counts per template over 1000 draws stay inside a 99.9% multinomial band.
  std::map<world::Template, int> counts;
  for (std::size_t i = 0; i < 1000; ++i) ++counts[sample_state(bank, i, 17, 0.0, oracle()).task.tmpl];
  REQUIRE(counts.size() == 5);
  for (const auto& [t, c] : counts) {
    CAPTURE(world::to_string(t));
    CHECK(c >= 150);
    CHECK(c <= 250);
  }
}

TEST_CASE("noisy annotation keeps labels at the stated rate") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(annotate_noisy(Label::Positive, 1.0, rng) == Label::Positive);
  CHECK_THROWS_AS(annotate_noisy(Label::Positive, 0.4, rng), ValidationError);
  CHECK_THROWS_AS(annotate_noisy(Label::Positive, 1.01, rng), ValidationError);

  // 10k draws at 0.98: flips inside the 99.9% binomial interval around 200.
  int flips = 0;
  for (int i = 0; i < 10000; ++i) flips += annotate_noisy(Label::Negative, 0.98, rng) == Label::Positive ? 1 : 0;
  const double sd = std::sqrt(10000 * 0.02 * 0.98);
  CHECK(std::abs(flips - 200) <= 3.29 * sd);
}

TEST_CASE("annotator presets carry their documented accuracies") {
  CHECK(annotator_preset("oracle").accuracy == 1.0);
  CHECK(annotator_preset("gpt4o-base").accuracy == doctest::Approx(0.86));
  CHECK(annotator_preset("gpt4o-improved").accuracy == doctest::Approx(0.92));
  CHECK(annotator_preset("human").accuracy == doctest::Approx(0.98));
  CHECK_THROWS_AS(annotator_preset("crowd"), ValidationError);
}

TEST_CASE("noisy agreement converges to the annotator accuracy") {
  for (const char* name : {"gpt4o-base", "gpt4o-improved", "human"}) {
    auto recs = synthetic(5000, 5000, Source::SingleStepPipeline);
    const auto ann = annotator_preset(name);
    apply_annotator(recs, ann, 33);
    std::size_t agree = 0;
    for (const auto& r : recs) {
      agree += r.label == r.oracle_label ? 1 : 0;
      CHECK(r.annotator == ann);
    }
    CHECK(std::abs(static_cast<double>(agree) / 1e4 - ann.accuracy) <= 0.015);
  }
}

TEST_CASE("more accurate annotators flip a subset of what less accurate ones flip") {
  auto base = synthetic(500, 500, Source::SingleStepPipeline);
  auto low = base, high = base;
  apply_annotator(low, annotator_preset("gpt4o-base"), 5);
  apply_annotator(high, annotator_preset("human"), 5);
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (high[i].label != high[i].oracle_label) CHECK(low[i].label != low[i].oracle_label);
  }
}

TEST_CASE("balancing down-samples the majority to a 1:1 ratio") {
  const auto recs = synthetic(600, 400, Source::TrajectoryPipeline);
  const auto [train, heldout] = balance_and_split(recs, 1.0, 0.0, 1);
  CHECK(train.pos_count == 400);
  CHECK(train.neg_count == 400);
  CHECK(heldout.records.empty());
  const auto [t2, h2] = balance_and_split(recs, 1.0, 0.0, 1);
  CHECK(t2.records == train.records);
}

TEST_CASE("balancing needs both labels") {
  CHECK_THROWS_AS(balance_and_split(synthetic(10, 0, Source::TrajectoryPipeline), 1.0, 0.2, 1), BalanceImpossible);
  CHECK_THROWS_AS(balance_and_split(synthetic(10, 10, Source::TrajectoryPipeline), 0.0, 0.2, 1), ValidationError);
}

TEST_CASE("splits are disjoint by task and seed and keep each source's share") {
  auto recs = synthetic(1300, 700, Source::TrajectoryPipeline);
  const auto more = synthetic(900, 1100, Source::SingleStepPipeline, 100000);
  recs.insert(recs.end(), more.begin(), more.end());
  // Several records per group so grouping actually matters.
  for (auto& r : recs) r.seed /= 3;
  const auto [train, heldout] = balance_and_split(recs, 1.0, 0.25, 9);
  CHECK(train.pos_count == train.neg_count);
  CHECK(heldout.pos_count == heldout.neg_count);
  CHECK(train.split == Split::Train);
  CHECK(heldout.split == Split::Heldout);
  std::set<std::pair<std::string, std::uint64_t>> a;
  for (const auto& r : train.records) a.insert({r.task.task_id, r.seed});
  for (const auto& r : heldout.records) CHECK_FALSE(a.contains({r.task.task_id, r.seed}));
  std::size_t traj = 0;
  for (const auto& r : recs) traj += r.source == Source::TrajectoryPipeline ? 1 : 0;
  const double before = static_cast<double>(traj) / static_cast<double>(recs.size());
  CHECK(std::abs(source_share(train, Source::TrajectoryPipeline) - before) <= 0.02);
}

TEST_CASE("records survive a write and read round trip") {
  UniformAgent agent;
  auto recs = single_step_pipeline(default_task_bank(), agent, 20, 2, oracle());
  apply_annotator(recs, annotator_preset("gpt4o-improved"), 1);
  std::stringstream buf;
  write_records(buf, recs);
  const auto first = buf.str().substr(0, buf.str().find('\n'));
  CHECK(first.find("schema") != std::string::npos);
  CHECK(read_records(buf) == recs);
  std::stringstream bad("{\"schema\":\"something-else\"}\n");
  CHECK_THROWS(read_records(bad));
}

TEST_CASE("offline examples pair reachable states with an optimal action") {
  const auto ex = offline_examples(default_task_bank(), 30, 4, oracle(), 0.15);
  REQUIRE(ex.size() == 30);
  for (const auto& e : ex) {
    const auto acts = world::enumerate_actions(e.state, e.task);
    CHECK(std::find(acts.begin(), acts.end(), e.ground_truth) != acts.end());
  }
}
