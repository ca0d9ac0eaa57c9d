#include "prmgui/world.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "prmgui/error.hpp"
#include "world_model.hpp"

namespace prmgui::world {

namespace {

constexpr std::array<std::string_view, kNumApps> kAppNames{"Home", "Contacts", "Clock", "Settings", "Notes"};
constexpr std::array<std::string_view, kNumTemplates> kTemplateNames{"AddContact", "DeleteContact", "SetAlarm",
                                                                     "ToggleSetting", "WriteNote"};
constexpr std::array<std::string_view, 4> kWidgetKindNames{"Button", "TextField", "Toggle", "ListItem"};
constexpr std::array<std::string_view, 2> kObstacleNames{"PermissionDialog", "UpdatePrompt"};
constexpr std::array<std::string_view, kNumActionKinds> kActionNames{
    "Click", "LongPress", "Type", "Scroll", "OpenApp", "PressHome", "PressBack", "Wait", "Finished"};
constexpr std::array<std::string_view, 4> kDirectionNames{"up", "down", "left", "right"};

template <typename E, std::size_t N>
std::optional<E> parse_enum(std::string_view s, const std::array<std::string_view, N>& names) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(App v) { return kAppNames[static_cast<int>(v)]; }
std::string_view to_string(Template v) { return kTemplateNames[static_cast<int>(v)]; }
std::string_view to_string(WidgetKind v) { return kWidgetKindNames[static_cast<int>(v)]; }
std::string_view to_string(ObstacleKind v) { return kObstacleNames[static_cast<int>(v)]; }
std::string_view to_string(ActionKind v) { return kActionNames[static_cast<int>(v)]; }
std::string_view to_string(Direction v) { return kDirectionNames[static_cast<int>(v)]; }

std::optional<App> parse_app(std::string_view s) { return parse_enum<App>(s, kAppNames); }
std::optional<Template> parse_template(std::string_view s) { return parse_enum<Template>(s, kTemplateNames); }
std::optional<WidgetKind> parse_widget_kind(std::string_view s) { return parse_enum<WidgetKind>(s, kWidgetKindNames); }
std::optional<ObstacleKind> parse_obstacle_kind(std::string_view s) {
  return parse_enum<ObstacleKind>(s, kObstacleNames);
}
std::optional<ActionKind> parse_action_kind(std::string_view s) { return parse_enum<ActionKind>(s, kActionNames); }
std::optional<Direction> parse_direction(std::string_view s) { return parse_enum<Direction>(s, kDirectionNames); }

// ---------------------------------------------------------------------------
// Tasks

std::vector<std::string> required_params(Template t) {
  switch (t) {
    case Template::AddContact:
    case Template::DeleteContact:
      return {"name"};
    case Template::SetAlarm:
      return {"time"};
    case Template::ToggleSetting:
      return {"setting", "state"};
    case Template::WriteNote:
      return {"title", "body"};
  }
  return {};
}

App task_app(Template t) {
  switch (t) {
    case Template::AddContact:
    case Template::DeleteContact:
      return App::Contacts;
    case Template::SetAlarm:
      return App::Clock;
    case Template::ToggleSetting:
      return App::Settings;
    case Template::WriteNote:
      return App::Notes;
  }
  return App::Home;
}

namespace detail {

bool valid_time(const std::string& s) {
  if (s.size() != 5 || s[2] != ':') return false;
  for (int i : {0, 1, 3, 4}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  const int hh = (s[0] - '0') * 10 + (s[1] - '0');
  const int mm = (s[3] - '0') * 10 + (s[4] - '0');
  return hh < 24 && mm < 60;
}

}  // namespace detail

void validate_task(const TaskSpec& task) {
  if (task.max_steps < 1) throw ValidationError("task " + task.task_id + ": max_steps must be >= 1");
  for (const auto& key : required_params(task.tmpl)) {
    const auto it = task.params.find(key);
    if (it == task.params.end() || it->second.empty()) {
      throw ValidationError("task " + task.task_id + ": missing placeholder '" + key + "' for template " +
                            std::string(to_string(task.tmpl)));
    }
    if (it->second.find_first_of("\n\t") != std::string::npos) {
      throw ValidationError("task " + task.task_id + ": placeholder '" + key + "' contains control characters");
    }
  }
  if (task.tmpl == Template::SetAlarm && !detail::valid_time(task.params.at("time"))) {
    throw ValidationError("task " + task.task_id + ": placeholder 'time' must be HH:MM");
  }
  if (task.tmpl == Template::ToggleSetting) {
    const auto& state = task.params.at("state");
    if (state != "on" && state != "off") {
      throw ValidationError("task " + task.task_id + ": placeholder 'state' must be on or off");
    }
  }
}

TaskSpec make_task(std::string task_id, Template tmpl, std::map<std::string, std::string> params, int max_steps) {
  TaskSpec t;
  t.task_id = std::move(task_id);
  t.tmpl = tmpl;
  t.params = std::move(params);
  t.max_steps = max_steps;
  validate_task(t);
  const auto& p = t.params;
  switch (tmpl) {
    case Template::AddContact:
      t.instruction = "Add a new contact named " + p.at("name") + ".";
      break;
    case Template::DeleteContact:
      t.instruction = "Delete the contact " + p.at("name") + ".";
      break;
    case Template::SetAlarm:
      t.instruction = "Set an alarm for " + p.at("time") + ".";
      break;
    case Template::ToggleSetting:
      t.instruction = "Turn " + p.at("state") + " " + p.at("setting") + ".";
      break;
    case Template::WriteNote:
      t.instruction = "Create a note titled " + p.at("title") + " that says " + p.at("body") + ".";
      break;
  }
  return t;
}

std::vector<std::string> task_text_values(const TaskSpec& task) {
  std::vector<std::string> out;
  auto add = [&](const char* key) {
    const auto it = task.params.find(key);
    if (it != task.params.end() && !it->second.empty()) out.push_back(it->second);
  };
  switch (task.tmpl) {
    case Template::AddContact:
    case Template::DeleteContact:
      add("name");
      break;
    case Template::SetAlarm:
      add("time");
      break;
    case Template::ToggleSetting:
      break;
    case Template::WriteNote:
      add("title");
      add("body");
      break;
  }
  return out;
}

std::string distractor_text(const TaskSpec& task) {
  switch (task.tmpl) {
    case Template::AddContact:
    case Template::DeleteContact:
      return "Mallory";
    case Template::SetAlarm:
      return "23:59";
    case Template::ToggleSetting:
    case Template::WriteNote:
      return "lorem ipsum";
  }
  return "lorem ipsum";
}

static std::vector<std::string> offered_texts(const TaskSpec& task) {
  auto values = task_text_values(task);
  values.push_back(distractor_text(task));
  std::vector<std::string> out;
  for (auto& v : values) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Actions

void validate_action(const Action& a) {
  const bool need_point = a.kind == ActionKind::Click || a.kind == ActionKind::LongPress;
  const bool need_content = a.kind == ActionKind::Type || a.kind == ActionKind::Finished;
  const bool need_direction = a.kind == ActionKind::Scroll;
  const bool need_app = a.kind == ActionKind::OpenApp;
  const std::string kind(to_string(a.kind));
  if (need_point != a.point.has_value()) {
    throw FormatError(kind + (need_point ? " requires a point" : " must not carry a point"));
  }
  if (need_content != a.content.has_value()) {
    throw FormatError(kind + (need_content ? " requires content" : " must not carry content"));
  }
  if (need_direction != a.direction.has_value()) {
    throw FormatError(kind + (need_direction ? " requires a direction" : " must not carry a direction"));
  }
  if (need_app != a.app_name.has_value()) {
    throw FormatError(kind + (need_app ? " requires app_name" : " must not carry app_name"));
  }
  if (a.point) {
    const auto [x, y] = *a.point;
    if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
      throw FormatError(kind + " point outside the unit square");
    }
  }
  if (a.kind == ActionKind::Type) {
    if (a.content->empty()) throw FormatError("Type requires non-empty content");
    if (a.content->find_first_of("\n\t") != std::string::npos) {
      throw FormatError("Type content contains control characters");
    }
  }
  if (a.app_name && a.app_name->empty()) throw FormatError("OpenApp requires a non-empty app_name");
}

bool is_well_formed(const Action& a) {
  try {
    validate_action(a);
    return true;
  } catch (const FormatError&) {
    return false;
  }
}

std::string describe(const Action& a) {
  std::string out(to_string(a.kind));
  char buf[64];
  if (a.point) {
    std::snprintf(buf, sizeof buf, "(%.3f,%.3f)", a.point->x, a.point->y);
    out += buf;
  }
  if (a.content) out += "(\"" + *a.content + "\")";
  if (a.direction) out += "(" + std::string(to_string(*a.direction)) + ")";
  if (a.app_name) out += "(" + *a.app_name + ")";
  return out;
}

// ---------------------------------------------------------------------------
// Fixture

bool Fixture::installed_app(App app) const {
  return std::find(installed.begin(), installed.end(), app) != installed.end();
}

const SettingItem* Fixture::find_setting(std::string_view name) const {
  for (const auto& s : settings) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::shared_ptr<const Fixture> default_fixture() {
  static const auto fx = std::make_shared<const Fixture>();
  return fx;
}

Fixture load_fixture(const Config& cfg) {
  Fixture fx;
  fx.version = cfg.get_or("fixture.version", fx.version);
  if (cfg.has("fixture.apps")) {
    fx.installed.clear();
    for (const auto& name : split(cfg.get("fixture.apps"), ',')) {
      if (name.empty()) continue;
      const auto app = parse_app(name);
      if (!app || *app == App::Home) throw ValidationError("fixture.apps: unknown app '" + name + "'");
      if (!fx.installed_app(*app)) fx.installed.push_back(*app);
    }
  }
  if (cfg.has("fixture.contacts")) {
    fx.base_contacts.clear();
    for (const auto& name : split(cfg.get("fixture.contacts"), ',')) {
      if (!name.empty()) fx.base_contacts.push_back(name);
    }
  }
  if (cfg.has("fixture.settings")) {
    fx.settings.clear();
    for (const auto& item : split(cfg.get("fixture.settings"), ',')) {
      if (item.empty()) continue;
      const auto colon = item.rfind(':');
      SettingItem s;
      if (colon != std::string::npos && trim(item.substr(colon + 1)) == "toggle") {
        s.name = trim(item.substr(0, colon));
        s.toggle = true;
      } else {
        s.name = item;
      }
      fx.settings.push_back(std::move(s));
    }
    if (fx.settings.size() > 32) throw ValidationError("fixture.settings: at most 32 items");
  }
  fx.list_rows = static_cast<int>(cfg.get_int("fixture.list_rows", fx.list_rows));
  if (fx.list_rows < 1 || fx.list_rows > 6) throw ValidationError("fixture.list_rows must be in [1, 6]");
  return fx;
}

std::vector<TaskSpec> load_tasks(const Config& cfg) {
  std::vector<TaskSpec> tasks;
  for (const auto& [id, value] : cfg.with_prefix("task.")) {
    const auto parts = split(value, '|');
    const auto tmpl = parse_template(parts.at(0));
    if (!tmpl) throw ValidationError("task." + id + ": unknown template '" + parts.at(0) + "'");
    std::map<std::string, std::string> params;
    int max_steps = kDefaultMaxSteps;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      if (eq == std::string::npos) throw ValidationError("task." + id + ": expected key=value, got '" + parts[i] + "'");
      const std::string key = trim(parts[i].substr(0, eq));
      const std::string val = trim(parts[i].substr(eq + 1));
      if (key == "max_steps") {
        max_steps = std::stoi(val);
      } else {
        params[key] = val;
      }
    }
    tasks.push_back(make_task(id, *tmpl, std::move(params), max_steps));
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// Internal model: layout, transitions, goals

namespace detail {

namespace {

constexpr std::array<std::string_view, kNumScreens> kScreenNames{
    "home",         "contacts.list", "contacts.editor", "contacts.detail",  "contacts.confirm", "clock.main",
    "clock.alarms", "clock.editor",  "settings.main",   "settings.detail", "notes.list",       "notes.editor"};

constexpr Rect kTopAction{0.70, 0.03, 0.97, 0.11};
constexpr Rect kField1{0.05, 0.20, 0.95, 0.30};
constexpr Rect kField2{0.05, 0.35, 0.95, 0.45};
constexpr Rect kBodyField{0.05, 0.35, 0.95, 0.60};
constexpr Rect kDialogLeft{0.10, 0.55, 0.45, 0.65};
constexpr Rect kDialogRight{0.55, 0.55, 0.90, 0.65};

Rect list_row(int r) { return {0.03, 0.15 + 0.12 * r, 0.97, 0.15 + 0.12 * (r + 1)}; }

Screen root_screen(App app) {
  switch (app) {
    case App::Contacts:
      return Screen::ContactsList;
    case App::Clock:
      return Screen::ClockMain;
    case App::Settings:
      return Screen::SettingsMain;
    case App::Notes:
      return Screen::NotesList;
    case App::Home:
      break;
  }
  return Screen::Home;
}

// Content length of the scrollable list on the current screen.
int list_length(const Model& m, const Fixture& fx) {
  switch (m.screen) {
    case Screen::ContactsList:
      return static_cast<int>(m.contacts.size());
    case Screen::AlarmList:
      return static_cast<int>(m.alarms.size());
    case Screen::SettingsMain:
      return static_cast<int>(fx.settings.size());
    case Screen::NotesList:
      return static_cast<int>(m.notes.size());
    default:
      return -1;
  }
}

std::vector<std::uint16_t> sorted_by_text(const std::vector<std::uint16_t>& ids, const Vocab& vocab) {
  auto out = ids;
  std::sort(out.begin(), out.end(), [&](auto a, auto b) { return vocab.at(a) < vocab.at(b); });
  return out;
}

std::vector<std::uint32_t> sorted_notes(const std::vector<std::uint32_t>& notes, const Vocab& vocab) {
  auto out = notes;
  std::sort(out.begin(), out.end(), [&](auto a, auto b) {
    const auto& ta = vocab.at(a >> 16);
    const auto& tb = vocab.at(b >> 16);
    if (ta != tb) return ta < tb;
    return vocab.at(a & 0xffff) < vocab.at(b & 0xffff);
  });
  return out;
}

void reset_ui(Model& m, Screen s) {
  m.screen = s;
  m.focus = 0;
  m.fields = {0, 0};
  m.scroll = 0;
  m.selected = -1;
}

template <typename T>
void insert_sorted(std::vector<T>& v, T x) {
  const auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

template <typename T>
void erase_sorted(std::vector<T>& v, T x) {
  const auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it != v.end() && *it == x) v.erase(it);
}

template <typename T>
bool contains_sorted(const std::vector<T>& v, T x) {
  return std::binary_search(v.begin(), v.end(), x);
}

}  // namespace

std::string_view screen_name(Screen s) { return kScreenNames[static_cast<int>(s)]; }

App screen_app(Screen s) {
  switch (s) {
    case Screen::Home:
      return App::Home;
    case Screen::ContactsList:
    case Screen::ContactEditor:
    case Screen::ContactDetail:
    case Screen::ContactConfirm:
      return App::Contacts;
    case Screen::ClockMain:
    case Screen::AlarmList:
    case Screen::AlarmEditor:
      return App::Clock;
    case Screen::SettingsMain:
    case Screen::SettingDetail:
      return App::Settings;
    case Screen::NotesList:
    case Screen::NoteEditor:
      return App::Notes;
  }
  return App::Home;
}

std::uint16_t Vocab::intern(const std::string& s) {
  const auto it = ids_.find(s);
  if (it != ids_.end()) return it->second;
  if (strings_.size() >= 0xffff) throw FormatError("text vocabulary exhausted");
  const auto id = static_cast<std::uint16_t>(strings_.size());
  strings_.push_back(s);
  ids_.emplace(s, id);
  return id;
}

int Vocab::find(const std::string& s) const {
  const auto it = ids_.find(s);
  return it == ids_.end() ? -1 : it->second;
}

std::size_t ModelHash::operator()(const Model& m) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(m.screen);
  auto mix = [&h](std::uint64_t v) { h = splitmix64(h ^ v); };
  mix(m.focus | (std::uint64_t{m.fields[0]} << 8) | (std::uint64_t{m.fields[1]} << 24) |
      (std::uint64_t{m.scroll} << 40));
  mix(static_cast<std::uint16_t>(m.selected) | (std::uint64_t{static_cast<std::uint8_t>(m.obstacle)} << 16) |
      (std::uint64_t{m.toggles} << 24));
  for (auto c : m.contacts) mix(c);
  mix(0xc0);
  for (auto a : m.alarms) mix(a);
  mix(0xa1);
  for (auto n : m.notes) mix(n);
  mix(static_cast<std::uint64_t>(m.step_count));
  return static_cast<std::size_t>(h);
}

std::vector<Slot> layout(const Model& m, const Fixture& fx, const Vocab& vocab) {
  std::vector<Slot> slots;
  const bool blocked = m.obstacle >= 0;
  if (blocked) {
    if (static_cast<ObstacleKind>(m.obstacle) == ObstacleKind::PermissionDialog) {
      slots.push_back({Role::DialogDeny, -1, WidgetKind::Button, kDialogLeft, true});
      slots.push_back({Role::DialogAllow, -1, WidgetKind::Button, kDialogRight, true});
    } else {
      slots.push_back({Role::DialogUpdate, -1, WidgetKind::Button, kDialogLeft, true});
      slots.push_back({Role::DialogLater, -1, WidgetKind::Button, kDialogRight, true});
    }
  }
  const std::size_t first_screen_slot = slots.size();
  auto add = [&](Role role, int arg, WidgetKind kind, Rect r, bool enabled = true) {
    slots.push_back({role, arg, kind, r, enabled});
  };
  const int rows = fx.list_rows;
  switch (m.screen) {
    case Screen::Home:
      for (std::size_t i = 0; i < fx.installed.size(); ++i) {
        const double x0 = 0.05 + 0.23 * static_cast<double>(i % 4);
        const double y0 = 0.40 + 0.15 * static_cast<double>(i / 4);
        add(Role::AppIcon, static_cast<int>(fx.installed[i]), WidgetKind::Button, {x0, y0, x0 + 0.20, y0 + 0.12});
      }
      break;
    case Screen::ContactsList: {
      add(Role::AddContact, -1, WidgetKind::Button, kTopAction);
      const auto shown = sorted_by_text(m.contacts, vocab);
      for (int r = 0; r < rows && m.scroll + r < static_cast<int>(shown.size()); ++r) {
        add(Role::ContactItem, shown[m.scroll + r], WidgetKind::ListItem, list_row(r));
      }
      break;
    }
    case Screen::ContactEditor:
      add(Role::SaveContact, -1, WidgetKind::Button, kTopAction);
      add(Role::FieldName, -1, WidgetKind::TextField, kField1);
      add(Role::FieldPhone, -1, WidgetKind::TextField, kField2);
      break;
    case Screen::ContactDetail:
      add(Role::ContactName, m.selected, WidgetKind::ListItem, {0.05, 0.15, 0.95, 0.27}, false);
      add(Role::CallContact, -1, WidgetKind::Button, {0.05, 0.80, 0.45, 0.90});
      add(Role::DeleteContact, -1, WidgetKind::Button, {0.55, 0.80, 0.95, 0.90});
      break;
    case Screen::ContactConfirm:
      add(Role::CancelDelete, -1, WidgetKind::Button, {0.10, 0.45, 0.45, 0.53});
      add(Role::ConfirmDelete, -1, WidgetKind::Button, {0.55, 0.45, 0.90, 0.53});
      break;
    case Screen::ClockMain:
    case Screen::AlarmList: {
      if (m.screen == Screen::AlarmList) {
        add(Role::AddAlarm, -1, WidgetKind::Button, kTopAction);
        const auto shown = sorted_by_text(m.alarms, vocab);
        for (int r = 0; r < rows && m.scroll + r < static_cast<int>(shown.size()); ++r) {
          add(Role::AlarmItem, shown[m.scroll + r], WidgetKind::ListItem, list_row(r));
        }
      }
      add(Role::TabClock, -1, WidgetKind::Button, {0.0, 0.90, 0.33, 1.0});
      add(Role::TabAlarm, -1, WidgetKind::Button, {0.33, 0.90, 0.66, 1.0});
      add(Role::TabTimer, -1, WidgetKind::Button, {0.66, 0.90, 1.0, 1.0});
      break;
    }
    case Screen::AlarmEditor:
      add(Role::SaveAlarm, -1, WidgetKind::Button, kTopAction);
      add(Role::FieldTime, -1, WidgetKind::TextField, kField1);
      break;
    case Screen::SettingsMain:
      for (int r = 0; r < rows && m.scroll + r < static_cast<int>(fx.settings.size()); ++r) {
        add(Role::SettingRow, m.scroll + r, WidgetKind::ListItem, list_row(r));
      }
      break;
    case Screen::SettingDetail:
      if (m.selected >= 0 && fx.settings[m.selected].toggle) {
        add(Role::SettingToggle, m.selected, WidgetKind::Toggle, kField1);
      } else {
        add(Role::SettingInfo, m.selected, WidgetKind::ListItem, kField1, false);
      }
      break;
    case Screen::NotesList: {
      add(Role::NewNote, -1, WidgetKind::Button, kTopAction);
      const auto shown = sorted_notes(m.notes, vocab);
      for (int r = 0; r < rows && m.scroll + r < static_cast<int>(shown.size()); ++r) {
        add(Role::NoteItem, m.scroll + r, WidgetKind::ListItem, list_row(r));
      }
      break;
    }
    case Screen::NoteEditor:
      add(Role::SaveNote, -1, WidgetKind::Button, kTopAction);
      add(Role::FieldTitle, -1, WidgetKind::TextField, kField1);
      add(Role::FieldBody, -1, WidgetKind::TextField, kBodyField);
      break;
  }
  if (blocked) {
    for (std::size_t i = first_screen_slot; i < slots.size(); ++i) slots[i].enabled = false;
  }
  return slots;
}

std::string slot_label(const Slot& s, const Model& m, const Fixture& fx, const Vocab& vocab) {
  switch (s.role) {
    case Role::AppIcon:
      return std::string(to_string(static_cast<App>(s.arg)));
    case Role::AddContact:
      return "Add contact";
    case Role::SaveContact:
    case Role::SaveAlarm:
    case Role::SaveNote:
      return "Save";
    case Role::ContactItem:
    case Role::ContactName:
    case Role::AlarmItem:
      return s.arg >= 0 ? vocab.at(static_cast<std::uint16_t>(s.arg)) : std::string{};
    case Role::CallContact:
      return "Call";
    case Role::DeleteContact:
      return "Delete";
    case Role::ConfirmDelete:
      return "Confirm";
    case Role::CancelDelete:
      return "Cancel";
    case Role::FieldName:
      return "Name";
    case Role::FieldPhone:
      return "Phone";
    case Role::TabClock:
      return "Clock";
    case Role::TabAlarm:
      return "Alarm";
    case Role::TabTimer:
      return "Timer";
    case Role::AddAlarm:
      return "Add alarm";
    case Role::FieldTime:
      return "Time";
    case Role::SettingRow:
    case Role::SettingToggle:
    case Role::SettingInfo:
      return s.arg >= 0 ? fx.settings[s.arg].name : std::string{};
    case Role::NewNote:
      return "New note";
    case Role::NoteItem:
      return vocab.at(static_cast<std::uint16_t>(sorted_notes(m.notes, vocab)[s.arg] >> 16));
    case Role::FieldTitle:
      return "Title";
    case Role::FieldBody:
      return "Body";
    case Role::DialogAllow:
      return "Allow";
    case Role::DialogDeny:
      return "Deny";
    case Role::DialogLater:
      return "Later";
    case Role::DialogUpdate:
      return "Update";
  }
  return {};
}

std::string slot_id(const Slot& s, const Model& m, const Fixture& fx, const Vocab& vocab) {
  switch (s.role) {
    case Role::AppIcon:
      return "icon." + slot_label(s, m, fx, vocab);
    case Role::AddContact:
      return "contacts.add";
    case Role::SaveContact:
      return "contacts.save";
    case Role::ContactItem:
      return "contacts.item." + slot_label(s, m, fx, vocab);
    case Role::ContactName:
      return "contacts.name";
    case Role::CallContact:
      return "contacts.call";
    case Role::DeleteContact:
      return "contacts.delete";
    case Role::ConfirmDelete:
      return "contacts.confirm";
    case Role::CancelDelete:
      return "contacts.cancel";
    case Role::FieldName:
      return "field.name";
    case Role::FieldPhone:
      return "field.phone";
    case Role::TabClock:
      return "clock.tab.clock";
    case Role::TabAlarm:
      return "clock.tab.alarm";
    case Role::TabTimer:
      return "clock.tab.timer";
    case Role::AddAlarm:
      return "clock.add";
    case Role::AlarmItem:
      return "clock.item." + slot_label(s, m, fx, vocab);
    case Role::FieldTime:
      return "field.time";
    case Role::SaveAlarm:
      return "clock.save";
    case Role::SettingRow:
      return "settings.item." + slot_label(s, m, fx, vocab);
    case Role::SettingToggle:
      return "settings.toggle";
    case Role::SettingInfo:
      return "settings.info";
    case Role::NewNote:
      return "notes.new";
    case Role::NoteItem:
      return "notes.item." + std::to_string(s.arg);
    case Role::FieldTitle:
      return "field.title";
    case Role::FieldBody:
      return "field.body";
    case Role::SaveNote:
      return "notes.save";
    case Role::DialogAllow:
      return "dialog.allow";
    case Role::DialogDeny:
      return "dialog.deny";
    case Role::DialogLater:
      return "dialog.later";
    case Role::DialogUpdate:
      return "dialog.update";
  }
  return {};
}

Model apply(const Model& in, const Move& mv, const std::vector<Slot>& slots, const Fixture& fx, const Vocab& vocab) {
  Model m = in;
  if (m.obstacle >= 0) {
    // Modal dialog: only its own buttons react.
    if ((mv.kind == ActionKind::Click) && mv.slot >= 0) {
      switch (slots[mv.slot].role) {
        case Role::DialogAllow:
        case Role::DialogLater:
          m.obstacle = -1;
          break;
        case Role::DialogDeny:
        case Role::DialogUpdate:
          m.obstacle = -1;
          reset_ui(m, Screen::Home);
          break;
        default:
          break;
      }
    }
    return m;
  }

  switch (mv.kind) {
    case ActionKind::Click: {
      if (mv.slot < 0) break;
      const Slot& s = slots[mv.slot];
      if (!s.enabled) break;
      switch (s.role) {
        case Role::AppIcon:
          reset_ui(m, root_screen(static_cast<App>(s.arg)));
          break;
        case Role::AddContact:
          reset_ui(m, Screen::ContactEditor);
          break;
        case Role::FieldName:
        case Role::FieldTime:
        case Role::FieldTitle:
          m.focus = 1;
          break;
        case Role::FieldPhone:
        case Role::FieldBody:
          m.focus = 2;
          break;
        case Role::SaveContact:
          if (m.fields[0] != 0) {
            insert_sorted(m.contacts, m.fields[0]);
            reset_ui(m, Screen::ContactsList);
          }
          break;
        case Role::ContactItem: {
          const auto id = static_cast<std::int16_t>(s.arg);
          reset_ui(m, Screen::ContactDetail);
          m.selected = id;
          break;
        }
        case Role::DeleteContact: {
          const auto sel = m.selected;
          reset_ui(m, Screen::ContactConfirm);
          m.selected = sel;
          break;
        }
        case Role::ConfirmDelete:
          if (m.selected >= 0) erase_sorted(m.contacts, static_cast<std::uint16_t>(m.selected));
          reset_ui(m, Screen::ContactsList);
          break;
        case Role::CancelDelete: {
          const auto sel = m.selected;
          reset_ui(m, Screen::ContactDetail);
          m.selected = sel;
          break;
        }
        case Role::TabClock:
          if (m.screen != Screen::ClockMain) reset_ui(m, Screen::ClockMain);
          break;
        case Role::TabAlarm:
          if (m.screen != Screen::AlarmList) reset_ui(m, Screen::AlarmList);
          break;
        case Role::AddAlarm:
          reset_ui(m, Screen::AlarmEditor);
          break;
        case Role::SaveAlarm:
          if (m.fields[0] != 0 && valid_time(vocab.at(m.fields[0]))) {
            insert_sorted(m.alarms, m.fields[0]);
            reset_ui(m, Screen::AlarmList);
          }
          break;
        case Role::SettingRow: {
          const auto idx = static_cast<std::int16_t>(s.arg);
          reset_ui(m, Screen::SettingDetail);
          m.selected = idx;
          break;
        }
        case Role::SettingToggle:
          m.toggles ^= (1u << s.arg);
          break;
        case Role::NewNote:
          reset_ui(m, Screen::NoteEditor);
          break;
        case Role::SaveNote:
          if (m.fields[0] != 0) {
            insert_sorted(m.notes, (std::uint32_t{m.fields[0]} << 16) | m.fields[1]);
            reset_ui(m, Screen::NotesList);
          }
          break;
        default:
          break;
      }
      break;
    }
    case ActionKind::Type:
      if (m.focus > 0) m.fields[m.focus - 1] = mv.text;
      break;
    case ActionKind::Scroll: {
      const int n = list_length(m, fx);
      if (n < 0) break;
      const int rows = fx.list_rows;
      const int max_off = std::max(0, n - rows);
      if (mv.dir == Direction::Down) {
        m.scroll = static_cast<std::uint16_t>(std::min(m.scroll + rows, max_off));
      } else if (mv.dir == Direction::Up) {
        m.scroll = static_cast<std::uint16_t>(std::max(m.scroll - rows, 0));
      }
      break;
    }
    case ActionKind::OpenApp:
      if (mv.app > 0 && fx.installed_app(static_cast<App>(mv.app))) {
        reset_ui(m, root_screen(static_cast<App>(mv.app)));
      }
      break;
    case ActionKind::PressHome:
      reset_ui(m, Screen::Home);
      break;
    case ActionKind::PressBack:
      switch (m.screen) {
        case Screen::Home:
          break;
        case Screen::ContactEditor:
        case Screen::ContactDetail:
          reset_ui(m, Screen::ContactsList);
          break;
        case Screen::ContactConfirm: {
          const auto sel = m.selected;
          reset_ui(m, Screen::ContactDetail);
          m.selected = sel;
          break;
        }
        case Screen::AlarmEditor:
          reset_ui(m, Screen::AlarmList);
          break;
        case Screen::SettingDetail:
          reset_ui(m, Screen::SettingsMain);
          break;
        case Screen::NoteEditor:
          reset_ui(m, Screen::NotesList);
          break;
        default:
          reset_ui(m, Screen::Home);
          break;
      }
      break;
    case ActionKind::LongPress:
    case ActionKind::Wait:
    case ActionKind::Finished:
      break;
  }
  return m;
}

std::vector<Move> enumerate_moves(const Model& m, const std::vector<Slot>& slots, const Fixture& fx,
                                  const std::vector<std::uint16_t>& typed_ids) {
  std::vector<Move> moves;
  moves.reserve(slots.size() + typed_ids.size() + 12);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].enabled) moves.push_back({ActionKind::Click, static_cast<int>(i)});
  }
  if (m.obstacle >= 0) {
    moves.push_back({ActionKind::PressBack});
    moves.push_back({ActionKind::Wait});
    return moves;
  }
  for (auto id : typed_ids) {
    Move mv{ActionKind::Type};
    mv.text = id;
    moves.push_back(mv);
  }
  for (Direction d : {Direction::Up, Direction::Down, Direction::Left, Direction::Right}) {
    Move mv{ActionKind::Scroll};
    mv.dir = d;
    moves.push_back(mv);
  }
  for (App app : fx.installed) {
    Move mv{ActionKind::OpenApp};
    mv.app = static_cast<int>(app);
    moves.push_back(mv);
  }
  moves.push_back({ActionKind::PressHome});
  moves.push_back({ActionKind::PressBack});
  moves.push_back({ActionKind::Wait});
  moves.push_back({ActionKind::Finished});
  return moves;
}

Goal make_goal(const TaskSpec& task, const Fixture& fx, const Vocab& vocab) {
  Goal g;
  g.tmpl = task.tmpl;
  auto id_of = [&](const char* key) {
    const auto it = task.params.find(key);
    return it == task.params.end() ? -1 : vocab.find(it->second);
  };
  switch (task.tmpl) {
    case Template::AddContact:
    case Template::DeleteContact:
      g.name = id_of("name");
      break;
    case Template::SetAlarm:
      g.time = id_of("time");
      break;
    case Template::ToggleSetting: {
      const auto& name = task.params.at("setting");
      for (std::size_t i = 0; i < fx.settings.size(); ++i) {
        if (fx.settings[i].name == name && fx.settings[i].toggle) g.setting = static_cast<int>(i);
      }
      g.target_on = task.params.at("state") == "on";
      break;
    }
    case Template::WriteNote:
      g.title = id_of("title");
      g.body = id_of("body");
      break;
  }
  return g;
}

bool goal_met(const Model& m, const Goal& g) {
  switch (g.tmpl) {
    case Template::AddContact:
      return g.name >= 0 && contains_sorted(m.contacts, static_cast<std::uint16_t>(g.name));
    case Template::DeleteContact:
      return g.name < 0 || !contains_sorted(m.contacts, static_cast<std::uint16_t>(g.name));
    case Template::SetAlarm:
      return g.time >= 0 && contains_sorted(m.alarms, static_cast<std::uint16_t>(g.time));
    case Template::ToggleSetting:
      return g.setting >= 0 && (((m.toggles >> g.setting) & 1u) != 0) == g.target_on;
    case Template::WriteNote:
      return g.title >= 0 && g.body >= 0 &&
             contains_sorted(m.notes, (static_cast<std::uint32_t>(g.title) << 16) | static_cast<std::uint32_t>(g.body));
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// WorldInstance

using detail::Model;
using detail::Vocab;

WorldInstance::WorldInstance(const WorldInstance& o)
    : task_(o.task_),
      fixture_(o.fixture_),
      vocab_(o.vocab_ ? std::make_unique<Vocab>(*o.vocab_) : nullptr),
      model_(o.model_ ? std::make_unique<Model>(*o.model_) : nullptr),
      state_(o.state_),
      seed_(o.seed_),
      obstacle_prob_(o.obstacle_prob_),
      done_(o.done_),
      rng_(o.rng_) {}

WorldInstance& WorldInstance::operator=(const WorldInstance& o) {
  if (this != &o) {
    WorldInstance tmp(o);
    *this = std::move(tmp);
  }
  return *this;
}

WorldInstance::WorldInstance(WorldInstance&&) noexcept = default;
WorldInstance& WorldInstance::operator=(WorldInstance&&) noexcept = default;
WorldInstance::~WorldInstance() = default;

std::vector<std::uint16_t> WorldAccess::typed_ids(const WorldInstance& w) {
  std::vector<std::uint16_t> ids;
  for (const auto& text : offered_texts(w.task())) {
    const int id = w.vocab_->find(text);
    if (id > 0) ids.push_back(static_cast<std::uint16_t>(id));
  }
  return ids;
}

void WorldInstance::refresh_state() {
  const Model& m = *model_;
  const Fixture& fx = *fixture_;
  const Vocab& vocab = *vocab_;
  GuiState s;
  s.app = detail::screen_app(m.screen);
  s.screen = std::string(detail::screen_name(m.screen));
  s.step_count = m.step_count;
  if (m.obstacle >= 0) s.obstacle = static_cast<ObstacleKind>(m.obstacle);
  for (const auto& slot : detail::layout(m, fx, vocab)) {
    s.widgets.push_back({detail::slot_id(slot, m, fx, vocab), slot.kind, detail::slot_label(slot, m, fx, vocab),
                         slot.bounds, slot.enabled});
  }

  auto& tb = s.text_buffers;
  {
    std::vector<std::string> apps;
    for (App a : fx.installed) apps.emplace_back(to_string(a));
    tb["sys.apps"] = join_lines(apps);
  }
  {
    std::vector<std::string> names;
    for (auto id : m.contacts) names.push_back(vocab.at(id));
    std::sort(names.begin(), names.end());
    tb["db.contacts"] = join_lines(names);
  }
  {
    std::vector<std::string> times;
    for (auto id : m.alarms) times.push_back(vocab.at(id));
    std::sort(times.begin(), times.end());
    tb["db.alarms"] = join_lines(times);
  }
  {
    std::vector<std::string> notes;
    for (auto n : m.notes) notes.push_back(vocab.at(n >> 16) + "\t" + vocab.at(n & 0xffff));
    std::sort(notes.begin(), notes.end());
    tb["db.notes"] = join_lines(notes);
  }
  for (std::size_t i = 0; i < fx.settings.size(); ++i) {
    if (fx.settings[i].toggle) tb["set." + fx.settings[i].name] = ((m.toggles >> i) & 1u) ? "on" : "off";
  }
  using detail::Screen;
  auto field_names = [&]() -> std::array<const char*, 2> {
    switch (m.screen) {
      case Screen::ContactEditor:
        return {"name", "phone"};
      case Screen::AlarmEditor:
        return {"time", nullptr};
      case Screen::NoteEditor:
        return {"title", "body"};
      default:
        return {nullptr, nullptr};
    }
  }();
  for (int i = 0; i < 2; ++i) {
    if (field_names[i]) tb[std::string("field.") + field_names[i]] = vocab.at(m.fields[i]);
  }
  if (m.focus > 0 && field_names[m.focus - 1]) tb["ui.focus"] = field_names[m.focus - 1];
  switch (m.screen) {
    case Screen::ContactsList:
    case Screen::AlarmList:
    case Screen::SettingsMain:
    case Screen::NotesList:
      tb["ui.scroll"] = std::to_string(m.scroll);
      break;
    case Screen::ContactDetail:
    case Screen::ContactConfirm:
      if (m.selected >= 0) tb["ui.selected"] = vocab.at(static_cast<std::uint16_t>(m.selected));
      break;
    case Screen::SettingDetail:
      if (m.selected >= 0) tb["ui.selected"] = fx.settings[m.selected].name;
      break;
    default:
      break;
  }
  state_ = std::move(s);
}

WorldInstance create_world(const TaskSpec& task, std::uint64_t seed, double obstacle_prob,
                           std::shared_ptr<const Fixture> fixture) {
  validate_task(task);
  if (!(obstacle_prob >= 0.0 && obstacle_prob <= 1.0)) throw ValidationError("obstacle_prob must be in [0, 1]");
  if (!fixture) throw ValidationError("fixture must not be null");
  WorldInstance w;
  w.task_ = task;
  w.fixture_ = std::move(fixture);
  w.seed_ = seed;
  w.obstacle_prob_ = obstacle_prob;
  w.rng_.seed(seed);
  w.vocab_ = std::make_unique<Vocab>();
  w.model_ = std::make_unique<Model>();
  Vocab& vocab = *w.vocab_;
  Model& m = *w.model_;
  for (const auto& name : w.fixture_->base_contacts) detail::insert_sorted(m.contacts, vocab.intern(name));
  for (const auto& text : offered_texts(task)) vocab.intern(text);
  if (task.tmpl == Template::DeleteContact) {
    detail::insert_sorted(m.contacts, vocab.intern(task.params.at("name")));
  }
  if (task.tmpl == Template::AddContact) {
    detail::erase_sorted(m.contacts, vocab.intern(task.params.at("name")));
  }
  for (std::size_t i = 0; i < w.fixture_->settings.size(); ++i) {
    const bool on = (w.rng_() >> 63) != 0;
    if (w.fixture_->settings[i].toggle && on) m.toggles |= (1u << i);
  }
  w.refresh_state();
  return w;
}

namespace {

detail::Move resolve_move(const Model& m, const std::vector<detail::Slot>& slots, const Action& a, Vocab& vocab) {
  detail::Move mv;
  mv.kind = a.kind;
  switch (a.kind) {
    case ActionKind::Click:
    case ActionKind::LongPress:
      for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].enabled && slots[i].bounds.contains(*a.point)) {
          mv.slot = static_cast<int>(i);
          break;
        }
      }
      break;
    case ActionKind::Type:
      // Typing without focus is a no-op; avoid growing the vocabulary then.
      if (m.focus > 0 && m.obstacle < 0) mv.text = vocab.intern(*a.content);
      break;
    case ActionKind::Scroll:
      mv.dir = *a.direction;
      break;
    case ActionKind::OpenApp: {
      const auto app = parse_app(*a.app_name);
      mv.app = app ? static_cast<int>(*app) : -1;
      break;
    }
    default:
      break;
  }
  return mv;
}

}  // namespace

StepResult step(WorldInstance& w, const Action& action) {
  if (w.done_) throw SessionError("step on a finished world");
  validate_action(action);
  const auto slots = detail::layout(*w.model_, *w.fixture_, *w.vocab_);
  detail::Move mv = resolve_move(*w.model_, slots, action, *w.vocab_);
  if (mv.kind == ActionKind::LongPress) mv.slot = -1;
  Model next = detail::apply(*w.model_, mv, slots, *w.fixture_, *w.vocab_);
  next.step_count = w.model_->step_count + 1;
  const bool terminated = action.kind == ActionKind::Finished || next.step_count >= w.task_.max_steps;
  const double u_spawn = uniform01(w.rng_);
  const double u_kind = uniform01(w.rng_);
  if (!terminated && next.obstacle < 0 && u_spawn < w.obstacle_prob_) {
    next.obstacle = static_cast<std::int8_t>(u_kind < 0.5 ? ObstacleKind::PermissionDialog : ObstacleKind::UpdatePrompt);
  }
  *w.model_ = std::move(next);
  w.done_ = terminated;
  w.refresh_state();
  return {w.state_, terminated};
}

bool check_success(const WorldInstance& w) {
  const auto goal = detail::make_goal(w.task_, *w.fixture_, *w.vocab_);
  return detail::goal_met(*w.model_, goal);
}

WorldInstance peek_step(const WorldInstance& w, const Action& action) {
  validate_action(action);
  WorldInstance next(w);
  Model& m = WorldAccess::model(next);
  const auto slots = detail::layout(m, next.fixture(), WorldAccess::vocab(next));
  detail::Move mv = resolve_move(m, slots, action, *next.vocab_);
  if (mv.kind == ActionKind::LongPress) mv.slot = -1;
  const int steps = m.step_count;
  m = detail::apply(m, mv, slots, next.fixture(), WorldAccess::vocab(next));
  m.step_count = steps + 1;
  next.done_ = action.kind == ActionKind::Finished || m.step_count >= next.task().max_steps;
  next.refresh_state();
  return next;
}

// ---------------------------------------------------------------------------
// Candidate actions from the observable state

std::vector<Action> enumerate_actions(const GuiState& state, const TaskSpec& task) {
  std::vector<Action> out;
  for (const auto& w : state.widgets) {
    if (w.enabled) out.push_back(Action::click(w.bounds.center()));
  }
  if (state.obstacle) {
    out.push_back(Action::press_back());
    out.push_back(Action::wait());
    return out;
  }
  for (const auto& text : offered_texts(task)) out.push_back(Action::type(text));
  for (Direction d : {Direction::Up, Direction::Down, Direction::Left, Direction::Right}) {
    out.push_back(Action::scroll(d));
  }
  for (const auto& app : buffer_lines(state, "sys.apps")) out.push_back(Action::open_app(app));
  out.push_back(Action::press_home());
  out.push_back(Action::press_back());
  out.push_back(Action::wait());
  out.push_back(Action::finished());
  return out;
}

std::vector<std::string> buffer_lines(const GuiState& state, const std::string& key) {
  const auto it = state.text_buffers.find(key);
  if (it == state.text_buffers.end() || it->second.empty()) return {};
  return split(it->second, '\n', false);
}

std::string buffer_or(const GuiState& state, const std::string& key, std::string fallback) {
  const auto it = state.text_buffers.find(key);
  return it == state.text_buffers.end() ? fallback : it->second;
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

json to_json(const GuiState& s) {
  json widgets = json::array();
  for (const auto& w : s.widgets) {
    widgets.push_back({{"id", w.id},
                       {"kind", to_string(w.kind)},
                       {"label", w.label},
                       {"bounds", {w.bounds.x0, w.bounds.y0, w.bounds.x1, w.bounds.y1}},
                       {"enabled", w.enabled}});
  }
  json j{{"app", to_string(s.app)},
         {"screen", s.screen},
         {"widgets", std::move(widgets)},
         {"text_buffers", s.text_buffers},
         {"step_count", s.step_count}};
  j["obstacle"] = s.obstacle ? json(to_string(*s.obstacle)) : json(nullptr);
  return j;
}

GuiState gui_state_from_json(const json& j) {
  GuiState s;
  const auto app = parse_app(j.at("app").get<std::string>());
  if (!app) throw ValidationError("unknown app in state");
  s.app = *app;
  s.screen = j.at("screen").get<std::string>();
  for (const auto& w : j.at("widgets")) {
    Widget widget;
    widget.id = w.at("id").get<std::string>();
    const auto kind = parse_widget_kind(w.at("kind").get<std::string>());
    if (!kind) throw ValidationError("unknown widget kind in state");
    widget.kind = *kind;
    widget.label = w.at("label").get<std::string>();
    const auto& b = w.at("bounds");
    if (!b.is_array() || b.size() != 4) throw ValidationError("widget bounds must have 4 numbers");
    widget.bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    if (!widget.bounds.valid()) throw ValidationError("widget bounds outside the unit square or degenerate");
    widget.enabled = w.at("enabled").get<bool>();
    s.widgets.push_back(std::move(widget));
  }
  s.text_buffers = j.at("text_buffers").get<std::map<std::string, std::string>>();
  s.step_count = j.at("step_count").get<int>();
  if (s.step_count < 0) throw ValidationError("negative step_count in state");
  if (j.contains("obstacle") && !j.at("obstacle").is_null()) {
    const auto ob = parse_obstacle_kind(j.at("obstacle").get<std::string>());
    if (!ob) throw ValidationError("unknown obstacle kind in state");
    s.obstacle = *ob;
  }
  return s;
}

std::string serialize(const GuiState& state) { return to_json(state).dump(); }

json to_json(const Action& a) {
  json j{{"kind", to_string(a.kind)}};
  if (a.point) j["point"] = {a.point->x, a.point->y};
  if (a.content) j["content"] = *a.content;
  if (a.direction) j["direction"] = to_string(*a.direction);
  if (a.app_name) j["app_name"] = *a.app_name;
  return j;
}

Action action_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("action must be an object");
  Action a;
  try {
    const auto kind = parse_action_kind(j.at("kind").get<std::string>());
    if (!kind) throw FormatError("unknown action kind");
    a.kind = *kind;
    if (j.contains("point")) {
      const auto& p = j.at("point");
      if (!p.is_array() || p.size() != 2) throw FormatError("point must be [x, y]");
      a.point = Point{p[0].get<double>(), p[1].get<double>()};
    }
    if (j.contains("content")) a.content = j.at("content").get<std::string>();
    if (j.contains("direction")) {
      const auto d = parse_direction(j.at("direction").get<std::string>());
      if (!d) throw FormatError("unknown scroll direction");
      a.direction = *d;
    }
    if (j.contains("app_name")) a.app_name = j.at("app_name").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed action: ") + e.what());
  }
  return a;
}

json to_json(const TaskSpec& t) {
  return {{"task_id", t.task_id},
          {"instruction", t.instruction},
          {"template", to_string(t.tmpl)},
          {"params", t.params},
          {"max_steps", t.max_steps}};
}

TaskSpec task_from_json(const json& j) {
  TaskSpec t;
  try {
    t.task_id = j.at("task_id").get<std::string>();
    t.instruction = j.value("instruction", std::string{});
    const auto tmpl = parse_template(j.at("template").get<std::string>());
    if (!tmpl) throw ValidationError("unknown template");
    t.tmpl = *tmpl;
    t.params = j.at("params").get<std::map<std::string, std::string>>();
    t.max_steps = j.value("max_steps", kDefaultMaxSteps);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed task: ") + e.what());
  }
  validate_task(t);
  return t;
}

}  // namespace prmgui::world
