#include <doctest.h>

#include <cmath>
#include <sstream>

#include "prmgui/error.hpp"
#include "prmgui/grpo.hpp"
#include "shared.hpp"

using namespace prmgui;
using namespace prmgui::grpo;
using world::Action;

namespace {

std::vector<double> uniform_vec(std::size_t n, double lo, double hi, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
  return v;
}

}  // namespace

TEST_CASE("group advantages are standardized") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = uniform_vec(2 + uniform_index(rng, 14), -3, 3, rng);
    const auto a = group_advantages(r);
    double mean = 0.0, sq = 0.0;
    for (double x : a) mean += x;
    mean /= static_cast<double>(a.size());
    for (double x : a) sq += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(sq / static_cast<double>(a.size())) - 1.0) < 1e-9);
  }
}

TEST_CASE("a group where every completion scores alike carries no signal") {
  const std::vector<double> same{0.3, 0.3, 0.3, 0.3};
  for (double a : group_advantages(same)) CHECK(a == 0.0);
  const std::vector<double> wins{1.0, 1.0};
  for (double a : group_advantages(wins)) CHECK(a == 0.0);
  CHECK_THROWS_AS(group_advantages(std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("two-member group gives plus and minus one") {
  const auto a = group_advantages(std::vector<double>{1.0, 0.0});
  CHECK(a[0] == doctest::Approx(1.0));
  CHECK(a[1] == doctest::Approx(-1.0));
}

TEST_CASE("the KL estimate is non-negative and vanishes only at equality") {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const double a = -5 * uniform01(rng), b = -5 * uniform01(rng);
    CHECK(kl_estimate(a, b) >= 0.0);
    if (a != b) CHECK(kl_estimate(a, b) > 0.0);
  }
  CHECK(kl_estimate(-1.3, -1.3) == 0.0);
}

TEST_CASE("GRPO gradient matches finite differences") {
  Rng rng(43);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    auto lp = uniform_vec(n, -3, 0, rng);
    const auto ref = uniform_vec(n, -3, 0, rng);
    const auto adv = uniform_vec(n, -2, 2, rng);
    const double beta = 0.5 * uniform01(rng);
    const auto g = grpo_grad(lp, ref, adv, beta);
    for (std::size_t i = 0; i < n; ++i) {
      const double x0 = lp[i];
      lp[i] = x0 + h;
      const double up = grpo_loss(lp, ref, adv, beta);
      lp[i] = x0 - h;
      const double down = grpo_loss(lp, ref, adv, beta);
      lp[i] = x0;
      const double num = (up - down) / (2 * h);
      CHECK(std::abs(num - g[i]) / std::max({std::abs(num), std::abs(g[i]), 1e-6}) < 1e-4);
    }
  }
}

TEST_CASE("GRPO inputs are checked") {
  const std::vector<double> a{0.0, 0.0}, b{0.0};
  CHECK_THROWS_AS(grpo_loss(a, b, a, 0.1), ValidationError);
  const std::vector<double> bad{0.0, std::nan("")};
  CHECK_THROWS_AS(grpo_grad(bad, a, a, 0.1), NumericError);
}

TEST_CASE("oracle reward scores kind then typed text") {
  CHECK(oracle_reward(Action::click({0.1, 0.1}), Action::click({0.9, 0.9})) == 1.0);
  CHECK(oracle_reward(Action::wait(), Action::click({0.5, 0.5})) == 0.0);
  CHECK(oracle_reward(Action::type("John  Smith "), Action::type("John Smith")) == 2.0);
  CHECK(oracle_reward(Action::type("Jon"), Action::type("John")) == 1.0);
}

TEST_CASE("offline GRPO logs the frozen policy first and is reproducible") {
  const auto bank = datagen::default_task_bank();
  const auto train = datagen::offline_examples(bank, 40, 44, testing::oracle(), 0.15);
  const auto val = datagen::offline_examples(bank, 30, 45, testing::oracle(), 0.15);
  GrpoHyper h;
  h.eval_every = 5;
  h.lr = 1e-3;
  const auto a = train_grpo_offline(*testing::baseline(), train, val, OfflineReward::Oracle, nullptr, h, 12, 46);
  const auto b = train_grpo_offline(*testing::baseline(), train, val, OfflineReward::Oracle, nullptr, h, 12, 46);
  REQUIRE(a.metrics.size() == 4);  // 0, 5, 10, 12
  CHECK(a.metrics[0].step == 0);
  CHECK(a.metrics[3].step == 12);
  std::stringstream x, y;
  write_metrics_csv(x, a.metrics);
  write_metrics_csv(y, b.metrics);
  CHECK(x.str() == y.str());
  CHECK(x.str().rfind("step,mean_reward,loss,kl,type_match,exact_match\n", 0) == 0);
  CHECK_THROWS_AS(train_grpo_offline(*testing::baseline(), train, val, OfflineReward::Prm, nullptr, h, 1, 46),
                  ValidationError);
}

TEST_CASE("trajectory GRPO runs locally and reproducibly") {
  GrpoHyper h;
  h.group_size = 4;
  h.lr = 1e-3;
  const auto bank = datagen::default_task_bank();
  const auto a = train_grpo_trajectory(*testing::baseline(), nullptr, bank, h, 3, 47);
  const auto b = train_grpo_trajectory(*testing::baseline(), nullptr, bank, h, 3, 47);
  std::stringstream x, y;
  write_metrics_csv(x, a.metrics);
  write_metrics_csv(y, b.metrics);
  CHECK(x.str() == y.str());
  CHECK(a.metrics.size() == 3);
  for (const auto& m : a.metrics) CHECK(m.kl >= 0.0);
}
