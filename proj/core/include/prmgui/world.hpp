#pragma once

// MiniGUI: a deterministic multi-app GUI simulator. States are structured
// widget trees rather than pixels; transitions are table-driven per app.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prmgui/config.hpp"
#include "prmgui/rng.hpp"

#include <json.hpp>

namespace prmgui::world {

enum class App : std::uint8_t { Home, Contacts, Clock, Settings, Notes };
enum class Template : std::uint8_t { AddContact, DeleteContact, SetAlarm, ToggleSetting, WriteNote };
enum class WidgetKind : std::uint8_t { Button, TextField, Toggle, ListItem };
enum class ObstacleKind : std::uint8_t { PermissionDialog, UpdatePrompt };
enum class ActionKind : std::uint8_t {
  Click, LongPress, Type, Scroll, OpenApp, PressHome, PressBack, Wait, Finished
};
enum class Direction : std::uint8_t { Up, Down, Left, Right };

inline constexpr int kNumApps = 5;
inline constexpr int kNumTemplates = 5;
inline constexpr int kNumActionKinds = 9;
inline constexpr int kDefaultMaxSteps = 15;

std::string_view to_string(App);
std::string_view to_string(Template);
std::string_view to_string(WidgetKind);
std::string_view to_string(ObstacleKind);
std::string_view to_string(ActionKind);
std::string_view to_string(Direction);

std::optional<App> parse_app(std::string_view);
std::optional<Template> parse_template(std::string_view);
std::optional<WidgetKind> parse_widget_kind(std::string_view);
std::optional<ObstacleKind> parse_obstacle_kind(std::string_view);
std::optional<ActionKind> parse_action_kind(std::string_view);
std::optional<Direction> parse_direction(std::string_view);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

// Normalized rectangle; half-open containment [x0, x1) x [y0, y1).
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  bool contains(Point p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
  Point center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
  double area() const { return (x1 - x0) * (y1 - y0); }
  bool valid() const { return x0 >= 0.0 && y0 >= 0.0 && x1 <= 1.0 && y1 <= 1.0 && x1 > x0 && y1 > y0; }
  bool operator==(const Rect&) const = default;
};

struct Widget {
  std::string id;
  WidgetKind kind = WidgetKind::Button;
  std::string label;
  Rect bounds;
  bool enabled = true;
  bool operator==(const Widget&) const = default;
};

struct TaskSpec {
  std::string task_id;
  std::string instruction;
  Template tmpl = Template::AddContact;
  std::map<std::string, std::string> params;
  int max_steps = kDefaultMaxSteps;
  bool operator==(const TaskSpec&) const = default;
};

// Placeholders each template requires in TaskSpec::params.
std::vector<std::string> required_params(Template);

// Builds a task with a generated instruction; validates it.
TaskSpec make_task(std::string task_id, Template tmpl, std::map<std::string, std::string> params,
                   int max_steps = kDefaultMaxSteps);

// Throws ValidationError naming the first missing or malformed placeholder.
void validate_task(const TaskSpec& task);

// Text values the agent may need to type for this task, in a fixed order.
std::vector<std::string> task_text_values(const TaskSpec& task);
// The single wrong-but-plausible text offered alongside the task values.
std::string distractor_text(const TaskSpec& task);

// The app a task has to be completed in.
App task_app(Template tmpl);

// Observable state. `text_buffers` carries every piece of app data the
// screen exposes: editor field contents (`field.*`), app databases (`db.*`,
// newline-separated), settings toggles (`set.*`), UI focus/scroll/selection
// (`ui.*`) and installed apps (`sys.apps`).
struct GuiState {
  App app = App::Home;
  std::string screen;
  std::vector<Widget> widgets;
  std::map<std::string, std::string> text_buffers;
  std::optional<ObstacleKind> obstacle;
  int step_count = 0;
  bool operator==(const GuiState&) const = default;
};

struct Action {
  ActionKind kind = ActionKind::Wait;
  std::optional<Point> point;
  std::optional<std::string> content;
  std::optional<Direction> direction;
  std::optional<std::string> app_name;

  static Action click(Point p) { return {ActionKind::Click, p, {}, {}, {}}; }
  static Action long_press(Point p) { return {ActionKind::LongPress, p, {}, {}, {}}; }
  static Action type(std::string text) { return {ActionKind::Type, {}, std::move(text), {}, {}}; }
  static Action scroll(Direction d) { return {ActionKind::Scroll, {}, {}, d, {}}; }
  static Action open_app(std::string app) { return {ActionKind::OpenApp, {}, {}, {}, std::move(app)}; }
  static Action press_home() { return {ActionKind::PressHome, {}, {}, {}, {}}; }
  static Action press_back() { return {ActionKind::PressBack, {}, {}, {}, {}}; }
  static Action wait() { return {ActionKind::Wait, {}, {}, {}, {}}; }
  static Action finished(std::string answer = "done") {
    return {ActionKind::Finished, {}, std::move(answer), {}, {}};
  }

  bool operator==(const Action&) const = default;
};

// Throws FormatError unless exactly the fields required by `kind` are set
// and their values are in range.
void validate_action(const Action& action);
bool is_well_formed(const Action& action);

std::string describe(const Action& action);

struct SettingItem {
  std::string name;
  bool toggle = false;
};

// Static app content shared by every world built from it.
struct Fixture {
  std::string version = "minigui-1";
  std::vector<App> installed{App::Contacts, App::Clock, App::Settings, App::Notes};
  std::vector<std::string> base_contacts{"Alice", "Bob", "Carol"};
  std::vector<SettingItem> settings{{"Wi-Fi", true},    {"Display", false}, {"Sound", false},
                                    {"Battery", false}, {"Bluetooth", true}, {"Storage", false},
                                    {"Airplane mode", true}, {"About", false}};
  int list_rows = 4;

  bool installed_app(App app) const;
  const SettingItem* find_setting(std::string_view name) const;
};

std::shared_ptr<const Fixture> default_fixture();

// Reads `fixture.*` keys; unspecified keys keep their defaults.
Fixture load_fixture(const Config& cfg);

// Reads `task.<id> = Template | key=value | ...` entries in id order.
std::vector<TaskSpec> load_tasks(const Config& cfg);

struct StepResult {
  GuiState state;
  bool terminated = false;
};

namespace detail {
struct Model;
class Vocab;
}  // namespace detail

// One running episode. Copyable; copies evolve independently.
class WorldInstance {
 public:
  WorldInstance(const WorldInstance&);
  WorldInstance& operator=(const WorldInstance&);
  WorldInstance(WorldInstance&&) noexcept;
  WorldInstance& operator=(WorldInstance&&) noexcept;
  ~WorldInstance();

  const TaskSpec& task() const { return task_; }
  const GuiState& state() const { return state_; }
  std::uint64_t rng_seed() const { return seed_; }
  double obstacle_prob() const { return obstacle_prob_; }
  bool done() const { return done_; }
  const Fixture& fixture() const { return *fixture_; }
  const std::shared_ptr<const Fixture>& fixture_ptr() const { return fixture_; }

 private:
  friend WorldInstance create_world(const TaskSpec&, std::uint64_t, double, std::shared_ptr<const Fixture>);
  friend StepResult step(WorldInstance&, const Action&);
  friend bool check_success(const WorldInstance&);
  friend WorldInstance peek_step(const WorldInstance&, const Action&);
  friend struct WorldAccess;

  WorldInstance() = default;
  void refresh_state();

  TaskSpec task_;
  std::shared_ptr<const Fixture> fixture_;
  std::unique_ptr<detail::Vocab> vocab_;
  std::unique_ptr<detail::Model> model_;
  GuiState state_;
  std::uint64_t seed_ = 0;
  double obstacle_prob_ = 0.0;
  bool done_ = false;
  Rng rng_;
};

inline constexpr double kTrainingObstacleProb = 0.15;

WorldInstance create_world(const TaskSpec& task, std::uint64_t seed, double obstacle_prob,
                           std::shared_ptr<const Fixture> fixture = default_fixture());

// Applies one action. Throws SessionError when the world is done and
// FormatError for malformed actions; neither changes the world.
StepResult step(WorldInstance& world, const Action& action);

bool check_success(const WorldInstance& world);

// Candidate actions for a state, in a fixed order: enabled-widget clicks,
// typing, scrolls, app launches, then Home/Back/Wait/Finished. While an
// obstacle is up only its buttons plus Back and Wait are offered.
std::vector<Action> enumerate_actions(const GuiState& state, const TaskSpec& task);

struct Distance {
  std::optional<int> steps;  // empty when unreachable
  bool budget_exhausted = false;
  std::size_t nodes_expanded = 0;
  bool reachable() const { return steps.has_value(); }
};

inline constexpr std::size_t kDefaultNodeBudget = 1'000'000;

// Breadth-first search over enumerate_actions with obstacles switched off,
// counting steps to the nearest state where check_success holds (the final
// Finished is not counted).
Distance min_steps_to_success(const WorldInstance& world, std::size_t node_budget = kDefaultNodeBudget);

// Memoizing wrapper around the search. Thread-safe.
class DistanceOracle {
 public:
  explicit DistanceOracle(std::size_t node_budget = kDefaultNodeBudget);
  ~DistanceOracle();
  DistanceOracle(const DistanceOracle&) = delete;
  DistanceOracle& operator=(const DistanceOracle&) = delete;

  Distance distance(const WorldInstance& world) const;
  // Distance after `action` is applied without obstacle spawning.
  Distance distance_after(const WorldInstance& world, const Action& action) const;
  std::vector<Action> optimal_actions(const WorldInstance& world) const;

  std::size_t cache_size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Actions from enumerate_actions that lie on a shortest path; {Finished}
// when the world is already successful (or the dismissal, if a dialog is
// up); empty when unreachable.
std::vector<Action> optimal_actions(const WorldInstance& world, const DistanceOracle& oracle);

// True for the dialog button that clears the obstacle and keeps the screen.
bool is_correct_dismissal(const WorldInstance& world, const Action& action);

// The successor of `world` under `action` with obstacle spawning disabled
// and without consuming the world's random stream.
WorldInstance peek_step(const WorldInstance& world, const Action& action);

// Canonical, byte-stable JSON encoding.
nlohmann::json to_json(const GuiState& state);
GuiState gui_state_from_json(const nlohmann::json& j);
std::string serialize(const GuiState& state);

nlohmann::json to_json(const Action& action);
Action action_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j);

// Helpers for reading list-valued text buffers.
std::vector<std::string> buffer_lines(const GuiState& state, const std::string& key);
std::string buffer_or(const GuiState& state, const std::string& key, std::string fallback = {});

}  // namespace prmgui::world
