#pragma once

// Compact internal representation of a MiniGUI state. Strings are interned
// per world so states hash and compare as small integer tuples, which keeps
// the breadth-first oracle fast.

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "prmgui/world.hpp"

namespace prmgui::world::detail {

enum class Screen : std::uint8_t {
  Home,
  ContactsList,
  ContactEditor,
  ContactDetail,
  ContactConfirm,
  ClockMain,
  AlarmList,
  AlarmEditor,
  SettingsMain,
  SettingDetail,
  NotesList,
  NoteEditor,
};

inline constexpr int kNumScreens = 12;

std::string_view screen_name(Screen s);
App screen_app(Screen s);

class Vocab {
 public:
  Vocab() { intern(""); }

  std::uint16_t intern(const std::string& s);
  // Id of `s` or -1 when it was never interned.
  int find(const std::string& s) const;
  const std::string& at(std::uint16_t id) const { return strings_[id]; }
  std::size_t size() const { return strings_.size(); }

 private:
  std::vector<std::string> strings_;
  std::unordered_map<std::string, std::uint16_t> ids_;
};

struct Model {
  Screen screen = Screen::Home;
  std::uint8_t focus = 0;  // 0 = none, 1/2 = first/second editor field
  std::array<std::uint16_t, 2> fields{0, 0};
  std::uint16_t scroll = 0;
  std::int16_t selected = -1;  // contact vocab id or settings index
  std::int8_t obstacle = -1;   // ObstacleKind or -1
  std::uint32_t toggles = 0;   // bit i = settings[i] switched on
  std::vector<std::uint16_t> contacts;  // sorted ids
  std::vector<std::uint16_t> alarms;    // sorted ids
  std::vector<std::uint32_t> notes;     // sorted (title << 16 | body)
  int step_count = 0;

  bool operator==(const Model&) const = default;
};

struct ModelHash {
  std::size_t operator()(const Model& m) const noexcept;
};

enum class Role : std::uint8_t {
  AppIcon,
  AddContact,
  SaveContact,
  ContactItem,
  ContactName,
  CallContact,
  DeleteContact,
  ConfirmDelete,
  CancelDelete,
  FieldName,
  FieldPhone,
  TabClock,
  TabAlarm,
  TabTimer,
  AddAlarm,
  AlarmItem,
  FieldTime,
  SaveAlarm,
  SettingRow,
  SettingToggle,
  SettingInfo,
  NewNote,
  NoteItem,
  FieldTitle,
  FieldBody,
  SaveNote,
  DialogAllow,
  DialogDeny,
  DialogLater,
  DialogUpdate,
};

struct Slot {
  Role role;
  int arg = -1;  // app index, contact id, alarm id, setting index or note index
  WidgetKind kind;
  Rect bounds;
  bool enabled = true;
};

std::vector<Slot> layout(const Model& m, const Fixture& fx, const Vocab& vocab);
std::string slot_label(const Slot& s, const Model& m, const Fixture& fx, const Vocab& vocab);
std::string slot_id(const Slot& s, const Model& m, const Fixture& fx, const Vocab& vocab);

struct Move {
  ActionKind kind = ActionKind::Wait;
  int slot = -1;  // Click/LongPress target, -1 = missed
  std::uint16_t text = 0;
  Direction dir = Direction::Up;
  int app = -1;  // App index, -1 = not installed / unknown
};

// Pure transition (no obstacle spawning, no step counting).
Model apply(const Model& m, const Move& mv, const std::vector<Slot>& slots, const Fixture& fx,
            const Vocab& vocab);

// Candidate moves aligned one-to-one with enumerate_actions on the rendered
// state.
std::vector<Move> enumerate_moves(const Model& m, const std::vector<Slot>& slots, const Fixture& fx,
                                  const std::vector<std::uint16_t>& typed_ids);

struct Goal {
  Template tmpl = Template::AddContact;
  int name = -1;
  int time = -1;
  int title = -1;
  int body = -1;
  int setting = -1;
  bool target_on = false;
};

Goal make_goal(const TaskSpec& task, const Fixture& fx, const Vocab& vocab);
bool goal_met(const Model& m, const Goal& g);

bool valid_time(const std::string& s);

}  // namespace prmgui::world::detail

namespace prmgui::world {

// Internal accessor used by the search and by peek_step.
struct WorldAccess {
  static const detail::Model& model(const WorldInstance& w) { return *w.model_; }
  static detail::Model& model(WorldInstance& w) { return *w.model_; }
  static const detail::Vocab& vocab(const WorldInstance& w) { return *w.vocab_; }
  static void refresh(WorldInstance& w) { w.refresh_state(); }
  // Ids of task_text_values + distractor, deduplicated, in offer order.
  static std::vector<std::uint16_t> typed_ids(const WorldInstance& w);
};

}  // namespace prmgui::world
