#include <doctest.h>

#include <set>
#include <sstream>
#include <thread>

#include "prmgui/error.hpp"
#include "prmgui/netenv.hpp"
#include "shared.hpp"

using namespace prmgui;
using namespace prmgui::prm;
using testing::oracle;

namespace {

// Every state reachable within `depth` steps at p=0, deduplicated.
std::vector<world::WorldInstance> reachable(const world::TaskSpec& task, int depth) {
  std::vector<world::WorldInstance> frontier{world::create_world(task, 1, 0.0)};
  std::set<std::string> seen{world::serialize(frontier.front().state())};
  std::vector<world::WorldInstance> all = frontier;
  for (int d = 0; d < depth; ++d) {
    std::vector<world::WorldInstance> next;
    for (const auto& w : frontier) {
      if (w.done()) continue;
      for (const auto& a : world::enumerate_actions(w.state(), task)) {
        if (a.kind == world::ActionKind::Finished) continue;
        auto n = world::peek_step(w, a);
        if (seen.insert(world::serialize(n.state())).second) next.push_back(n);
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return all;
}

}  // namespace

TEST_CASE("feature vectors have the documented layout") {
  const auto task = world::make_task("t", world::Template::SetAlarm, {{"time", "07:30"}});
  const auto w = world::create_world(task, 1, 0.0);
  const auto acts = world::enumerate_actions(w.state(), task);
  const auto f = featurize(task, w.state(), acts.front());
  CHECK(f.size() == kFeatureDim);
  const auto s = featurize_state(task, w.state());
  CHECK(s.tail(kActionDim).isZero());
  CHECK(f.head(kStateDim) == s.head(kStateDim));
  const auto all = featurize_all(task, w.state(), acts);
  CHECK(all.cols() == static_cast<Eigen::Index>(acts.size()));
  CHECK(all.col(0) == f);
}

TEST_CASE("distinct candidates get distinct features in every state up to depth 6") {
  for (const auto& task : datagen::default_task_bank()) {
    if (task.task_id != "t0" && task.task_id != "t4" && task.task_id != "t8" && task.task_id != "t12" &&
        task.task_id != "t16") {
      continue;  // one task per template
    }
    for (const auto& w : reachable(task, 6)) {
      const auto acts = world::enumerate_actions(w.state(), task);
      const auto m = featurize_all(task, w.state(), acts);
      for (Eigen::Index i = 0; i < m.cols(); ++i) {
        for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
          if (m.col(i) == m.col(j)) {
            FAIL_CHECK(world::describe(acts[static_cast<std::size_t>(i)])
                       << " and " << world::describe(acts[static_cast<std::size_t>(j)]) << " collide on "
                       << w.state().screen);
          }
        }
      }
    }
  }
}

TEST_CASE("ties between the two logits go to the negative label") {
  CHECK(score_from_logits(0.3, 0.3).label == Label::Negative);
  CHECK(score_from_logits(0.3, 0.3).p_pos == doctest::Approx(0.5));
  const auto s = score_from_logits(2.0, 0.0);
  CHECK(s.label == Label::Positive);
  CHECK(s.p_pos == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  CHECK(prm_scalar(s) == doctest::Approx(2.0 * s.p_pos - 1.0));
  CHECK(prm_scalar(s, true) == 1.0);
  CHECK(prm_scalar(score_from_logits(-1.0, 1.0), true) == -1.0);
}

TEST_CASE("checkpoints round-trip and refuse another featurizer") {
  const auto m = make_prm(3);
  std::stringstream buf;
  save_prm(buf, m);
  const auto back = load_prm(buf);
  CHECK(back.params == m.params);
  CHECK(back.featurizer_version == featurizer_version());

  auto other = m;
  other.featurizer_version = "feat-0/minigui-1";
  std::stringstream buf2;
  save_prm(buf2, other);
  CHECK_THROWS_AS(load_prm(buf2), VersionMismatch);
  CHECK_THROWS_AS(check_version("feat-1/minigui-2", featurizer_version()), VersionMismatch);
}

TEST_CASE("training on clean labels beats chance by a wide margin") {
  const auto& t = testing::trained_prm();
  const double acc = prm_accuracy(*t.model, t.heldout);
  CHECK(acc >= 0.90);
}

TEST_CASE("optimal actions on held-out states score confidently positive") {
  const auto& t = testing::trained_prm();
  const auto ex = datagen::offline_examples(datagen::default_task_bank(), 200, 777, oracle(), 0.15);
  int positive = 0, confident = 0;
  for (const auto& e : ex) {
    const auto s = prm_score(*t.model, e.task, e.state, e.ground_truth);
    positive += s.label == Label::Positive ? 1 : 0;
    confident += s.p_pos > 0.9 ? 1 : 0;
  }
  // Measured once on this recipe (194 and 169 of 200), then frozen with margin.
  CHECK(positive >= 190);
  CHECK(confident >= 160);
}

TEST_CASE("training is deterministic in the seed") {
  datagen::LabeledDataset d;
  const auto& h = testing::trained_prm().heldout;
  d.records.assign(h.records.begin(), h.records.begin() + std::min<std::size_t>(200, h.records.size()));
  d.recount();
  PrmTrainConfig c;
  c.epochs = 1;
  const auto a = train_prm(d, c, 5);
  const auto b = train_prm(d, c, 5);
  CHECK(a.model.params == b.model.params);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.step_loss.size() == (d.records.size() + 31) / 32);
}

TEST_CASE("the scoring service returns what the local model computes") {
  const auto model = testing::trained_prm().model;
  auto server = serve_prm(model, net::parse_endpoint("127.0.0.1:0", true));
  RemoteScorer remote(server->endpoint());
  LocalScorer local(model);
  const auto task = datagen::default_task_bank()[4];
  auto w = world::create_world(task, 3, 0.0);
  const auto acts = world::enumerate_actions(w.state(), task);
  CHECK(remote.score(task, w.state(), acts) == local.score(task, w.state(), acts));
  CHECK(remote.score_one(task, w.state(), acts[2]) == local.score_one(task, w.state(), acts[2]));
}

TEST_CASE("a hundred concurrent identical requests get identical answers") {
  const auto model = testing::trained_prm().model;
  auto server = serve_prm(model, net::parse_endpoint("127.0.0.1:0", true));
  RemoteScorer shared(server->endpoint());
  const auto task = datagen::default_task_bank()[0];
  const auto w = world::create_world(task, 3, 0.0);
  const auto acts = world::enumerate_actions(w.state(), task);
  std::vector<PrmScore> got(100);
  std::vector<std::thread> threads;
  for (int i = 0; i < 100; ++i) {
    threads.emplace_back([&, i] {
      // Half share one client, half open their own connection.
      if (i % 2) {
        got[static_cast<std::size_t>(i)] = shared.score_one(task, w.state(), acts[1]);
      } else {
        RemoteScorer own(server->endpoint());
        got[static_cast<std::size_t>(i)] = own.score_one(task, w.state(), acts[1]);
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& g : got) CHECK(g == got.front());
}
