#include <doctest.h>

#include <set>

#include "prmgui/datagen.hpp"
#include "prmgui/error.hpp"
#include "prmgui/world.hpp"

using namespace prmgui;
using namespace prmgui::world;

namespace {

TaskSpec add_john() { return make_task("a", Template::AddContact, {{"name", "John"}}); }

const Widget* find_widget(const GuiState& s, const std::string& id) {
  for (const auto& w : s.widgets) {
    if (w.id == id) return &w;
  }
  return nullptr;
}

// Walks the first optimal action until success; returns the actions taken.
std::vector<Action> solve(WorldInstance& w, const DistanceOracle& oracle) {
  std::vector<Action> taken;
  while (!check_success(w) && !w.done()) {
    const auto opt = oracle.optimal_actions(w);
    REQUIRE_FALSE(opt.empty());
    taken.push_back(opt.front());
    step(w, opt.front());
  }
  return taken;
}

}  // namespace

TEST_CASE("tasks validate their placeholders") {
  CHECK_THROWS_AS(make_task("x", Template::AddContact, {}), ValidationError);
  CHECK_THROWS_AS(make_task("x", Template::SetAlarm, {{"time", "25:00"}}), ValidationError);
  CHECK_THROWS_AS(make_task("x", Template::ToggleSetting, {{"setting", "Bluetooth"}, {"state", "maybe"}}),
                  ValidationError);
  const auto t = add_john();
  CHECK(t.instruction.find("John") != std::string::npos);
  CHECK(t.max_steps == 15);
}

TEST_CASE("actions need exactly the fields their kind uses") {
  CHECK_NOTHROW(validate_action(Action::click({0.5, 0.5})));
  CHECK_THROWS_AS(validate_action(Action::click({1.5, 0.5})), FormatError);
  Action bad = Action::press_home();
  bad.content = "x";
  CHECK_THROWS_AS(validate_action(bad), FormatError);
  Action no_point{ActionKind::Click, {}, {}, {}, {}};
  CHECK_FALSE(is_well_formed(no_point));
}

TEST_CASE("a fresh world is not solved and the home screen lists installed apps") {
  const auto w = create_world(add_john(), 7, 0.0);
  CHECK_FALSE(check_success(w));
  CHECK(w.state().screen == "home");
  CHECK(find_widget(w.state(), "icon.Contacts") != nullptr);
  CHECK(w.state().step_count == 0);
}

TEST_CASE("clicking Add on the contact list opens the editor") {
  auto w = create_world(add_john(), 7, 0.0);
  step(w, Action::open_app("Contacts"));
  REQUIRE(w.state().screen == "contacts.list");
  const auto* add = find_widget(w.state(), "contacts.add");
  REQUIRE(add != nullptr);
  step(w, Action::click(add->bounds.center()));
  CHECK(w.state().screen == "contacts.editor");
}

TEST_CASE("a missed click is a legal no-op") {
  auto w = create_world(add_john(), 7, 0.0);
  const auto before = w.state();
  const auto r = step(w, Action::click({0.01, 0.99}));
  CHECK_FALSE(r.terminated);
  CHECK(r.state.screen == before.screen);
  CHECK(r.state.text_buffers == before.text_buffers);
  CHECK(r.state.step_count == before.step_count + 1);
}

TEST_CASE("the episode terminates at the step cap") {
  auto w = create_world(add_john(), 7, 0.0);
  StepResult r;
  for (int i = 0; i < 15; ++i) {
    CHECK_FALSE(w.done());
    r = step(w, Action::wait());
  }
  CHECK(r.terminated);
  CHECK(r.state.step_count == 15);
  CHECK_THROWS_AS(step(w, Action::wait()), SessionError);
}

TEST_CASE("Finished ends the episode and malformed actions leave the world untouched") {
  auto w = create_world(add_john(), 7, 0.0);
  Action bad{ActionKind::Type, {}, {}, {}, {}};
  CHECK_THROWS_AS(step(w, bad), FormatError);
  CHECK(w.state().step_count == 0);
  CHECK(step(w, Action::finished()).terminated);
  CHECK(w.done());
}

TEST_CASE("a toggle already at its target counts as solved before any action") {
  // Initial toggles are drawn from the seed; take the first seed with Wi-Fi on.
  const auto t = make_task("w", Template::ToggleSetting, {{"setting", "Wi-Fi"}, {"state", "on"}});
  std::uint64_t seed = 0;
  while (buffer_or(create_world(t, seed, 0.0).state(), "set.Wi-Fi") != "on") ++seed;
  const auto w = create_world(t, seed, 0.0);
  CHECK(check_success(w));
  CHECK(check_success(w));
  DistanceOracle oracle;
  CHECK(*oracle.distance(w).steps == 0);
}

TEST_CASE("shortest distances from home are frozen per fixture version") {
  DistanceOracle oracle;
  struct Case {
    Template tmpl;
    std::map<std::string, std::string> params;
    int steps;
  };
  const std::vector<Case> cases{
      {Template::AddContact, {{"name", "John"}}, 5},
      {Template::DeleteContact, {{"name", "Dave"}}, 4},
      {Template::SetAlarm, {{"time", "07:30"}}, 6},
      {Template::ToggleSetting, {{"setting", "Bluetooth"}, {"state", "on"}}, 4},
      {Template::WriteNote, {{"title", "Groceries"}, {"body", "Buy milk"}}, 7},
  };
  REQUIRE(default_fixture()->version == "minigui-1");
  for (const auto& c : cases) {
    const auto w = create_world(make_task("t", c.tmpl, c.params), 7, 0.0);
    const auto d = min_steps_to_success(w);
    REQUIRE(d.reachable());
    CHECK(*d.steps == c.steps);
    CHECK(*oracle.distance(w).steps == c.steps);
  }
}

TEST_CASE("a task whose app is not installed is unreachable") {
  auto fx = std::make_shared<Fixture>();
  fx->installed = {App::Clock, App::Settings, App::Notes};
  const auto w = create_world(add_john(), 7, 0.0, fx);
  const auto d = min_steps_to_success(w);
  CHECK_FALSE(d.reachable());
  CHECK_FALSE(d.budget_exhausted);
}

TEST_CASE("a tiny node budget reports exhaustion") {
  const auto w = create_world(make_task("n", Template::WriteNote, {{"title", "A"}, {"body", "B"}}), 7, 0.0);
  const auto d = min_steps_to_success(w, 10);
  CHECK_FALSE(d.reachable());
  CHECK(d.budget_exhausted);
}

TEST_CASE("following optimal actions succeeds in exactly the BFS distance") {
  DistanceOracle oracle;
  for (const auto& task : datagen::default_task_bank()) {
    auto w = create_world(task, 11, 0.0);
    const int d = *oracle.distance(w).steps;
    const auto taken = solve(w, oracle);
    CHECK(static_cast<int>(taken.size()) == d);
    CHECK(check_success(w));
  }
}

TEST_CASE("replaying the same actions reproduces serialized states bit for bit") {
  const auto task = make_task("s", Template::SetAlarm, {{"time", "06:45"}});
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto a = create_world(task, seed, 0.5);
    auto b = create_world(task, seed, 0.5);
    Rng rng(seed);
    while (!a.done()) {
      const auto acts = enumerate_actions(a.state(), task);
      const auto& act = acts[uniform_index(rng, acts.size())];
      step(a, act);
      step(b, act);
      REQUIRE(serialize(a.state()) == serialize(b.state()));
    }
  }
}

TEST_CASE("the step counter rises by one per step and stays within the cap") {
  const auto task = add_john();
  auto w = create_world(task, 5, 0.3);
  Rng rng(5);
  int last = 0;
  while (!w.done()) {
    const auto acts = enumerate_actions(w.state(), task);
    step(w, acts[uniform_index(rng, acts.size())]);
    CHECK(w.state().step_count == last + 1);
    CHECK(w.state().step_count <= task.max_steps);
    last = w.state().step_count;
  }
}

TEST_CASE("candidate lists are deterministic and cover typing and every scroll") {
  auto w = create_world(add_john(), 7, 0.0);
  step(w, Action::open_app("Contacts"));
  step(w, Action::click(find_widget(w.state(), "contacts.add")->bounds.center()));
  const auto a = enumerate_actions(w.state(), w.task());
  const auto b = enumerate_actions(w.state(), w.task());
  CHECK(a == b);
  CHECK(a.size() >= 4);
  std::set<std::string> typed;
  std::set<Direction> dirs;
  for (const auto& x : a) {
    if (x.kind == ActionKind::Type) typed.insert(*x.content);
    if (x.kind == ActionKind::Scroll) dirs.insert(*x.direction);
  }
  CHECK(typed.contains("John"));
  CHECK(typed.contains(distractor_text(w.task())));
  CHECK(dirs.size() == 4);
  CHECK(a.back().kind == ActionKind::Finished);
}

TEST_CASE("while a dialog is up only its buttons, Back and Wait are offered") {
  const auto task = add_john();
  auto w = create_world(task, 3, 1.0);
  step(w, Action::open_app("Contacts"));
  REQUIRE(w.state().obstacle.has_value());
  const auto acts = enumerate_actions(w.state(), task);
  REQUIRE(acts.size() == 4);
  CHECK(acts[0].kind == ActionKind::Click);
  CHECK(acts[1].kind == ActionKind::Click);
  CHECK(acts[2].kind == ActionKind::PressBack);
  CHECK(acts[3].kind == ActionKind::Wait);
}

TEST_CASE("clicks outside a dialog leave task state unchanged") {
  const auto task = add_john();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto w = create_world(task, seed, 1.0);
    step(w, Action::open_app("Contacts"));
    if (!w.state().obstacle) continue;
    const auto before = w.state();
    step(w, Action::click({0.835, 0.070}));
    CHECK(w.state().obstacle == before.obstacle);
    CHECK(w.state().screen == before.screen);
    CHECK(w.state().text_buffers == before.text_buffers);
  }
}

TEST_CASE("the correct dismissal keeps the distance it had before the dialog") {
  DistanceOracle oracle;
  const auto task = add_john();
  auto clean = create_world(task, 3, 0.0);
  step(clean, Action::open_app("Contacts"));
  auto w = create_world(task, 3, 1.0);
  step(w, Action::open_app("Contacts"));
  REQUIRE(w.state().obstacle.has_value());
  const auto opt = oracle.optimal_actions(w);
  REQUIRE(opt.size() == 1);
  const auto after = peek_step(w, opt.front());
  CHECK_FALSE(after.state().obstacle.has_value());
  CHECK(*oracle.distance(after).steps == *oracle.distance(clean).steps);
}

TEST_CASE("peek_step does not consume the world's randomness") {
  const auto task = add_john();
  auto a = create_world(task, 9, 0.5);
  auto b = create_world(task, 9, 0.5);
  (void)peek_step(a, Action::open_app("Contacts"));
  step(a, Action::open_app("Clock"));
  step(b, Action::open_app("Clock"));
  CHECK(serialize(a.state()) == serialize(b.state()));
}

TEST_CASE("states, actions and tasks round-trip through JSON") {
  auto w = create_world(add_john(), 7, 0.0);
  step(w, Action::open_app("Contacts"));
  CHECK(gui_state_from_json(to_json(w.state())) == w.state());
  for (const auto& a : enumerate_actions(w.state(), w.task())) CHECK(action_from_json(to_json(a)) == a);
  CHECK(task_from_json(to_json(w.task())) == w.task());
}

TEST_CASE("fixtures and tasks load from key-value config") {
  const auto cfg = Config::parse(
      "fixture.contacts = Zed\n"
      "fixture.list_rows = 3\n"
      "task.b = AddContact | name=Ann | max_steps=9\n"
      "task.a = SetAlarm | time=08:00\n");
  const auto fx = load_fixture(cfg);
  CHECK(fx.base_contacts == std::vector<std::string>{"Zed"});
  CHECK(fx.list_rows == 3);
  const auto tasks = load_tasks(cfg);
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[0].task_id == "a");
  CHECK(tasks[1].max_steps == 9);
  CHECK_THROWS_AS(load_tasks(Config::parse("task.x = Juggle | n=3\n")), ValidationError);
  CHECK_THROWS_AS(load_fixture(Config::parse("fixture.apps = Camera\n")), ValidationError);
}
