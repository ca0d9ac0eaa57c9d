#include "prmgui/prm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include "prmgui/error.hpp"

namespace prmgui::prm {

using nlohmann::json;
using world::Action;
using world::ActionKind;
using world::GuiState;
using world::TaskSpec;
using world::Widget;

namespace {

constexpr std::array<std::string_view, 12> kScreens{
    "home",         "contacts.list", "contacts.editor", "contacts.detail",  "contacts.confirm", "clock.main",
    "clock.alarms", "clock.editor",  "settings.main",   "settings.detail", "notes.list",       "notes.editor"};

constexpr std::array<std::string_view, 20> kLabels{
    "Add contact", "Save",  "Call",  "Delete", "Confirm",  "Cancel", "Name",     "Phone", "Clock", "Alarm",
    "Timer",       "Add alarm", "Time", "New note", "Title", "Body", "Allow", "Deny", "Later", "Update"};

// Editor fields of a screen, in on-screen order; names match the task
// placeholders they are meant to hold.
std::array<std::string_view, 2> editor_fields(std::string_view screen) {
  if (screen == "contacts.editor") return {"name", "phone"};
  if (screen == "clock.editor") return {"time", ""};
  if (screen == "notes.editor") return {"title", "body"};
  return {"", ""};
}

std::string param_or_empty(const TaskSpec& task, std::string_view key) {
  if (key.empty()) return {};
  auto it = task.params.find(std::string(key));
  return it == task.params.end() ? std::string{} : it->second;
}

bool is_param_value(const TaskSpec& task, const std::string& text) {
  if (text.empty()) return false;
  for (const auto& [k, v] : task.params) {
    if (k != "state" && v == text) return true;
  }
  return false;
}

bool goal_met(const TaskSpec& task, const GuiState& s) {
  auto has_line = [&](const char* key, const std::string& value) {
    const auto lines = world::buffer_lines(s, key);
    return std::find(lines.begin(), lines.end(), value) != lines.end();
  };
  switch (task.tmpl) {
    case world::Template::AddContact:
      return has_line("db.contacts", param_or_empty(task, "name"));
    case world::Template::DeleteContact:
      return !has_line("db.contacts", param_or_empty(task, "name"));
    case world::Template::SetAlarm:
      return has_line("db.alarms", param_or_empty(task, "time"));
    case world::Template::ToggleSetting:
      return world::buffer_or(s, "set." + param_or_empty(task, "setting")) == param_or_empty(task, "state");
    case world::Template::WriteNote:
      return has_line("db.notes", param_or_empty(task, "title") + "\t" + param_or_empty(task, "body"));
  }
  return false;
}

const Widget* hit(const GuiState& s, world::Point p) {
  for (const auto& w : s.widgets) {
    if (w.enabled && w.bounds.contains(p)) return &w;
  }
  return nullptr;
}

class Writer {
 public:
  explicit Writer(Eigen::Ref<Eigen::VectorXd> v) : v_(v) {}
  void flag(bool b) { v_(i_++) = b ? 1.0 : 0.0; }
  void value(double x) { v_(i_++) = std::clamp(x, 0.0, 1.0); }
  void one_hot(int idx, int n) {
    for (int k = 0; k < n; ++k) v_(i_ + k) = k == idx ? 1.0 : 0.0;
    i_ += n;
  }
  int pos() const { return static_cast<int>(i_); }

 private:
  Eigen::Ref<Eigen::VectorXd> v_;
  Eigen::Index i_ = 0;
};

void write_state(Writer& w, const TaskSpec& task, const GuiState& s) {
  w.one_hot(static_cast<int>(task.tmpl), world::kNumTemplates);
  w.one_hot(static_cast<int>(s.app), world::kNumApps);
  const auto screen_it = std::find(kScreens.begin(), kScreens.end(), s.screen);
  w.one_hot(screen_it == kScreens.end() ? -1 : static_cast<int>(screen_it - kScreens.begin()),
            static_cast<int>(kScreens.size()));
  w.flag(s.obstacle.has_value());
  w.flag(s.obstacle == world::ObstacleKind::PermissionDialog);
  w.flag(s.obstacle == world::ObstacleKind::UpdatePrompt);
  w.value(static_cast<double>(s.step_count) / static_cast<double>(std::max(1, task.max_steps)));
  w.flag(s.app == world::task_app(task.tmpl));
  w.flag(goal_met(task, s));

  const auto fields = editor_fields(s.screen);
  std::array<std::string, 2> content;
  std::array<std::string, 2> expected;
  for (int i = 0; i < 2; ++i) {
    if (fields[i].empty()) continue;
    content[i] = world::buffer_or(s, "field." + std::string(fields[i]));
    expected[i] = param_or_empty(task, fields[i]);
  }
  for (int i = 0; i < 2; ++i) w.flag(!expected[i].empty() && content[i] == expected[i]);
  for (int i = 0; i < 2; ++i) w.flag(!content[i].empty());
  const std::string focus = world::buffer_or(s, "ui.focus");
  for (int i = 0; i < 2; ++i) w.flag(!fields[i].empty() && focus == fields[i]);

  bool visible_match = false;
  for (const auto& wd : s.widgets) {
    if (wd.enabled && is_param_value(task, wd.label)) visible_match = true;
  }
  w.flag(visible_match);
  w.flag(world::buffer_or(s, "ui.scroll", "0") != "0");
  w.flag(is_param_value(task, world::buffer_or(s, "ui.selected")));
  w.flag(!content[0].empty() && content[0] != expected[0]);
}

void write_action(Writer& w, const TaskSpec& task, const GuiState& s, const Action& a) {
  w.one_hot(static_cast<int>(a.kind), world::kNumActionKinds);

  const Widget* target = nullptr;
  if ((a.kind == ActionKind::Click || a.kind == ActionKind::LongPress) && a.point) target = hit(s, *a.point);
  w.flag(target != nullptr);
  w.one_hot(target ? static_cast<int>(target->kind) : -1, 4);
  int label_idx = -1;
  if (target) {
    const auto it = std::find(kLabels.begin(), kLabels.end(), target->label);
    if (it != kLabels.end()) label_idx = static_cast<int>(it - kLabels.begin());
  }
  w.one_hot(label_idx, static_cast<int>(kLabels.size()));
  w.flag(target && is_param_value(task, target->label));

  std::optional<world::App> app;
  if (a.kind == ActionKind::OpenApp && a.app_name) app = world::parse_app(*a.app_name);
  if (target && target->id.starts_with("icon.")) app = world::parse_app(target->label);
  w.flag(app && *app == world::task_app(task.tmpl));
  w.one_hot(app && *app != world::App::Home ? static_cast<int>(*app) - 1 : -1, world::kNumApps - 1);
  const world::Point c = target ? target->bounds.center() : world::Point{0.0, 0.0};
  w.value(c.x);
  w.value(c.y);

  const bool typing = a.kind == ActionKind::Type && a.content;
  const auto values = world::task_text_values(task);
  const bool v0 = typing && !values.empty() && *a.content == values[0];
  const bool v1 = typing && values.size() > 1 && *a.content == values[1];
  w.flag(v0);
  w.flag(v1);
  w.flag(typing && !v0 && !v1);
  const std::string focus = world::buffer_or(s, "ui.focus");
  const std::string want = param_or_empty(task, focus);
  w.flag(typing && !want.empty() && *a.content == want);
  w.flag(typing && !focus.empty());

  w.one_hot(a.kind == ActionKind::Scroll && a.direction ? static_cast<int>(*a.direction) : -1, 4);
}

}  // namespace

std::string featurizer_version(const world::Fixture& fixture) {
  return std::string(kFeatureSchema) + "/" + fixture.version;
}

void check_version(const std::string& model_version, const std::string& expected) {
  if (model_version != expected) {
    throw VersionMismatch("featurizer version '" + model_version + "' does not match '" + expected + "'");
  }
}

Eigen::VectorXd featurize(const TaskSpec& task, const GuiState& state, const Action& action) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kFeatureDim);
  Writer w(v);
  write_state(w, task, state);
  if (w.pos() != kStateDim) throw std::logic_error("state feature block has wrong size");
  write_action(w, task, state, action);
  if (w.pos() != kFeatureDim) throw std::logic_error("action feature block has wrong size");
  return v;
}

Eigen::VectorXd featurize_state(const TaskSpec& task, const GuiState& state) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kFeatureDim);
  Writer w(v);
  write_state(w, task, state);
  return v;
}

Eigen::MatrixXd featurize_all(const TaskSpec& task, const GuiState& state, std::span<const Action> actions) {
  Eigen::MatrixXd m(kFeatureDim, static_cast<Eigen::Index>(actions.size()));
  if (actions.empty()) return m;
  const Eigen::VectorXd base = featurize_state(task, state);
  for (std::size_t j = 0; j < actions.size(); ++j) {
    auto col = m.col(static_cast<Eigen::Index>(j));
    col = base;
    Eigen::VectorXd tail = Eigen::VectorXd::Zero(kActionDim);
    Writer w(tail);
    write_action(w, task, state, actions[j]);
    col.tail(kActionDim) = tail;
  }
  return m;
}

PrmModel make_prm(std::uint64_t seed, const std::vector<int>& hidden, const world::Fixture& fixture) {
  std::vector<int> sizes{kFeatureDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2);
  return {featurizer_version(fixture), nn::init_mlp(sizes, seed, nn::Activation::Tanh)};
}

PrmScore score_from_logits(double logit_pos, double logit_neg) {
  PrmScore s;
  s.logit_pos = logit_pos;
  s.logit_neg = logit_neg;
  s.p_pos = 1.0 / (1.0 + std::exp(logit_neg - logit_pos));
  s.label = logit_pos > logit_neg ? Label::Positive : Label::Negative;
  return s;
}

namespace {

void check_model(const PrmModel& model) {
  if (!model.featurizer_version.starts_with(std::string(kFeatureSchema) + "/")) {
    throw VersionMismatch("model featurizer '" + model.featurizer_version + "' is not " + std::string(kFeatureSchema));
  }
  if (model.params.input_dim() != kFeatureDim || model.params.output_dim() != 2) {
    throw VersionMismatch("PRM parameters do not match the feature schema");
  }
}

}  // namespace

std::vector<PrmScore> prm_score_batch(const PrmModel& model, const TaskSpec& task, const GuiState& state,
                                      std::span<const Action> actions) {
  check_model(model);
  std::vector<PrmScore> out;
  if (actions.empty()) return out;
  const Eigen::MatrixXd logits = nn::forward_batch(model.params, featurize_all(task, state, actions));
  out.reserve(actions.size());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) out.push_back(score_from_logits(logits(0, j), logits(1, j)));
  return out;
}

PrmScore prm_score(const PrmModel& model, const TaskSpec& task, const GuiState& state, const Action& action) {
  return prm_score_batch(model, task, state, std::span<const Action>(&action, 1)).front();
}

double prm_scalar(const PrmScore& s, bool hard) {
  if (hard) return s.label == Label::Positive ? 1.0 : -1.0;
  return 2.0 * s.p_pos - 1.0;
}

PrmTrainResult train_prm(const datagen::LabeledDataset& dataset, const PrmTrainConfig& cfg, std::uint64_t seed) {
  if (dataset.records.empty()) throw ValidationError("train_prm: empty dataset");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.lr > 0.0)) throw ValidationError("train_prm: bad hyperparameters");
  PrmTrainResult res;
  res.model = make_prm(derive_seed(seed, 1), cfg.hidden);
  std::vector<nn::Example> examples;
  examples.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    examples.push_back({featurize(r.task, r.state, r.action), r.label == Label::Positive ? 0 : 1});
  }
  nn::AdamWConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;
  auto opt = nn::make_optimizer(res.model.params, ac);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<nn::Example> batch;
  for (int e = 0; e < cfg.epochs; ++e) {
    Rng rng(derive_seed(seed, 2, static_cast<std::uint64_t>(e)));
    shuffle(std::span<std::size_t>(order), rng);
    double sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
      auto lg = nn::cross_entropy_grad(res.model.params, batch);
      if (!std::isfinite(lg.loss)) throw NumericError("train_prm: non-finite loss");
      nn::optimizer_step(res.model.params, lg.grads, opt);
      res.step_loss.push_back(lg.loss);
      sum += lg.loss;
      ++steps;
    }
    res.epoch_loss.push_back(sum / static_cast<double>(std::max<std::size_t>(1, steps)));
  }
  return res;
}

double prm_accuracy(const PrmModel& model, const datagen::LabeledDataset& heldout) {
  if (heldout.records.empty()) throw ValidationError("prm_accuracy: empty heldout set");
  std::size_t correct = 0;
  for (const auto& r : heldout.records) {
    if (prm_score(model, r.task, r.state, r.action).label == r.oracle_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(heldout.records.size());
}

void save_prm(std::ostream& out, const PrmModel& model) {
  nn::save_mlp(out, model.params, {{"kind", "prm"}, {"featurizer", model.featurizer_version}});
}

PrmModel load_prm(std::istream& in) {
  std::map<std::string, std::string> meta;
  PrmModel m;
  m.params = nn::load_mlp(in, &meta);
  if (meta["kind"] != "prm") throw FormatError("checkpoint is not a PRM");
  m.featurizer_version = meta["featurizer"];
  check_model(m);
  return m;
}

void save_prm(const std::filesystem::path& path, const PrmModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  save_prm(out, model);
}

PrmModel load_prm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return load_prm(in);
}

std::vector<PrmScore> LocalScorer::score(const TaskSpec& task, const GuiState& state,
                                         std::span<const Action> actions) const {
  return prm_score_batch(*model_, task, state, actions);
}

json to_json(const PrmScore& s) {
  return {{"logit_pos", s.logit_pos}, {"logit_neg", s.logit_neg}, {"p_pos", s.p_pos},
          {"label", datagen::to_string(s.label)}};
}

PrmScore prm_score_from_json(const json& j) {
  PrmScore s;
  s.logit_pos = j.at("logit_pos").get<double>();
  s.logit_neg = j.at("logit_neg").get<double>();
  s.p_pos = j.at("p_pos").get<double>();
  s.label = j.at("label").get<std::string>() == "positive" ? Label::Positive : Label::Negative;
  return s;
}

RemoteScorer::RemoteScorer(net::Endpoint ep, net::ClientOptions opts) : ep_(std::move(ep)), opts_(opts) {}

std::vector<PrmScore> RemoteScorer::score(const TaskSpec& task, const GuiState& state,
                                          std::span<const Action> actions) const {
  json arr = json::array();
  for (const auto& a : actions) arr.push_back(world::to_json(a));
  const json payload{{"task", world::to_json(task)}, {"state", world::to_json(state)}, {"actions", arr}};
  std::lock_guard lock(mu_);
  for (int attempt = 0;; ++attempt) {
    try {
      if (!client_) client_ = std::make_unique<net::Client>(ep_, opts_);
      const auto r = client_->call("ScoreBatch", payload);
      std::vector<PrmScore> out;
      for (const auto& s : r.at("scores")) out.push_back(prm_score_from_json(s));
      return out;
    } catch (const net::ConnectionLost&) {
      client_.reset();
      if (attempt >= 1) throw;
    }
  }
}

namespace {

class PrmHandler final : public net::LineHandler {
 public:
  explicit PrmHandler(std::shared_ptr<const PrmModel> model) : model_(std::move(model)) {}

  std::optional<std::string> handle(const std::string& line) override {
    auto parsed = net::parse_request(line);
    if (auto* err = std::get_if<std::string>(&parsed)) return *err;
    const auto& req = std::get<net::Request>(parsed);
    const auto fail = [&](net::ErrorCode code, const std::string& msg) {
      return net::error_reply(req.seq, req.session, code, msg);
    };
    if (req.type == "Ping") return net::reply(req, "Pong");
    if (req.type != "Score" && req.type != "ScoreBatch") {
      return fail(net::ErrorCode::UnknownType, "unknown request type '" + req.type + "'");
    }
    TaskSpec task;
    GuiState state;
    std::vector<Action> actions;
    try {
      task = world::task_from_json(req.body.at("task"));
      world::validate_task(task);
    } catch (const std::exception& e) {
      return fail(net::ErrorCode::BadTask, e.what());
    }
    try {
      state = world::gui_state_from_json(req.body.at("state"));
    } catch (const std::exception& e) {
      return fail(net::ErrorCode::BadState, e.what());
    }
    try {
      if (req.type == "Score") {
        actions.push_back(world::action_from_json(req.body.at("action")));
      } else {
        for (const auto& a : req.body.at("actions")) actions.push_back(world::action_from_json(a));
      }
      for (const auto& a : actions) world::validate_action(a);
    } catch (const std::exception& e) {
      return fail(net::ErrorCode::BadAction, e.what());
    }
    try {
      const auto scores = prm_score_batch(*model_, task, state, actions);
      if (req.type == "Score") return net::reply(req, "ScoreOk", to_json(scores.front()));
      json arr = json::array();
      for (const auto& s : scores) arr.push_back(to_json(s));
      return net::reply(req, "ScoreBatchOk", {{"scores", std::move(arr)}});
    } catch (const std::exception& e) {
      return fail(net::ErrorCode::Internal, e.what());
    }
  }

 private:
  std::shared_ptr<const PrmModel> model_;
};

}  // namespace

PrmServer::PrmServer(std::shared_ptr<const PrmModel> model, const net::Endpoint& bind) : model_(std::move(model)) {
  check_model(*model_);
  auto m = model_;
  server_ = std::make_unique<net::LineServer>(bind, [m] { return std::make_unique<PrmHandler>(m); });
}

std::unique_ptr<PrmServer> serve_prm(std::shared_ptr<const PrmModel> model, const net::Endpoint& bind) {
  return std::make_unique<PrmServer>(std::move(model), bind);
}

}  // namespace prmgui::prm
