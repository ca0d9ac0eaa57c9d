#include "prmgui/netenv.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <set>
#include <thread>

#include "prmgui/error.hpp"

namespace prmgui::net {

using nlohmann::json;
using world::Action;
using world::GuiState;

struct EnvServer::Shared {
  std::shared_ptr<const world::Fixture> fixture;
  int crash_on_step = -1;
  std::atomic<int> steps{0};
  LineServer* server = nullptr;
};

namespace {

class EnvHandler final : public LineHandler {
 public:
  explicit EnvHandler(std::shared_ptr<EnvServer::Shared> shared) : shared_(std::move(shared)) {}

  std::optional<std::string> handle(const std::string& line) override {
    auto parsed = parse_request(line);
    if (auto* err = std::get_if<std::string>(&parsed)) return *err;
    const Request& req = std::get<Request>(parsed);
    try {
      return dispatch(req);
    } catch (const std::exception& e) {
      return error_reply(req.seq, req.session, ErrorCode::Internal, e.what());
    }
  }

 private:
  std::optional<std::string> dispatch(const Request& req) {
    const json& body = req.body;
    if (req.type == "Ping") return reply(req, "Pong");

    if (req.type == "Reset") {
      if (!body.contains("protocol_version") || body["protocol_version"] != kProtocolVersion) {
        return error_reply(req.seq, req.session, ErrorCode::VersionMismatch,
                           "server speaks protocol_version " + std::to_string(kProtocolVersion));
      }
      if (!body.contains("seed") || !body["seed"].is_number_integer() || !body.contains("obstacle_prob") ||
          !body["obstacle_prob"].is_number()) {
        return error_reply(req.seq, req.session, ErrorCode::BadFrame, "Reset needs integer seed and obstacle_prob");
      }
      const double p = body["obstacle_prob"].get<double>();
      if (!(p >= 0.0 && p <= 1.0)) {
        return error_reply(req.seq, req.session, ErrorCode::BadFrame, "obstacle_prob must be in [0,1]");
      }
      world::TaskSpec task;
      try {
        task = world::task_from_json(body.at("task"));
        world::validate_task(task);
      } catch (const std::exception& e) {
        return error_reply(req.seq, req.session, ErrorCode::BadTask, e.what());
      }
      world_ = world::create_world(task, body["seed"].get<std::uint64_t>(), p, shared_->fixture);
      session_ = req.session;
      return reply(req, "ResetOk", {{"state", world::to_json(world_->state())}});
    }

    if (req.type == "Step" || req.type == "CheckSuccess" || req.type == "EnumerateActions") {
      if (!world_ || req.session != session_) {
        return error_reply(req.seq, req.session, ErrorCode::NoSession, "no world; send Reset first");
      }
    }

    if (req.type == "Step") {
      const int k = shared_->steps.fetch_add(1);
      if (shared_->crash_on_step >= 0 && k >= shared_->crash_on_step) {
        shared_->server->crash();
        return std::nullopt;
      }
      if (world_->done()) return error_reply(req.seq, req.session, ErrorCode::SessionDone, "episode has terminated");
      Action action;
      try {
        action = world::action_from_json(body.at("action"));
        world::validate_action(action);
      } catch (const std::exception& e) {
        return error_reply(req.seq, req.session, ErrorCode::BadAction, e.what());
      }
      const auto result = world::step(*world_, action);
      return reply(req, "StepOk", {{"state", world::to_json(result.state)}, {"terminated", result.terminated}});
    }
    if (req.type == "CheckSuccess") return reply(req, "SuccessOk", {{"success", world::check_success(*world_)}});
    if (req.type == "EnumerateActions") {
      json arr = json::array();
      for (const auto& a : world::enumerate_actions(world_->state(), world_->task())) arr.push_back(world::to_json(a));
      return reply(req, "ActionsOk", {{"actions", std::move(arr)}});
    }
    return error_reply(req.seq, req.session, ErrorCode::UnknownType, "unknown request type '" + req.type + "'");
  }

  std::shared_ptr<EnvServer::Shared> shared_;
  std::optional<world::WorldInstance> world_;
  std::string session_;
};

[[noreturn]] void rethrow_remote(const RemoteError& e) {
  switch (e.code()) {
    case ErrorCode::SessionDone:
    case ErrorCode::NoSession:
      throw SessionError(e.what());
    case ErrorCode::BadAction:
      throw FormatError(e.what());
    case ErrorCode::BadTask:
      throw ValidationError(e.what());
    case ErrorCode::VersionMismatch:
      throw VersionMismatch(e.what());
    default:
      throw e;
  }
}

std::vector<Endpoint> parse_endpoint_list(const std::string& text) {
  std::vector<Endpoint> out;
  for (const auto& part : split(text, ',', true)) {
    if (!part.empty()) out.push_back(parse_endpoint(part));
  }
  return out;
}

}  // namespace

EnvServer::EnvServer(const Endpoint& bind, EnvServerOptions opts) : shared_(std::make_shared<Shared>()) {
  shared_->fixture = opts.fixture ? opts.fixture : world::default_fixture();
  shared_->crash_on_step = opts.crash_on_step;
  auto shared = shared_;
  server_ = std::make_unique<LineServer>(bind, [shared] { return std::make_unique<EnvHandler>(shared); });
  shared_->server = server_.get();
}

EnvServer::~EnvServer() { server_->stop(); }

int EnvServer::steps_served() const { return shared_->steps.load(); }

std::unique_ptr<EnvServer> serve_env(const Endpoint& bind, const std::string& fixture_config) {
  EnvServerOptions opts;
  if (!fixture_config.empty()) {
    opts.fixture = std::make_shared<const world::Fixture>(world::load_fixture(Config::load(fixture_config)));
  }
  return std::make_unique<EnvServer>(bind, std::move(opts));
}

RemoteEnv::RemoteEnv(const Endpoint& ep, const ClientOptions& opts) : client_(ep, opts) {}

GuiState RemoteEnv::reset(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob) {
  try {
    const auto r = client_.call("Reset", {{"protocol_version", kProtocolVersion},
                                          {"task", world::to_json(task)},
                                          {"seed", seed},
                                          {"obstacle_prob", obstacle_prob}});
    return world::gui_state_from_json(r.at("state"));
  } catch (const RemoteError& e) {
    rethrow_remote(e);
  }
}

world::StepResult RemoteEnv::step(const Action& action) {
  try {
    const auto r = client_.call("Step", {{"action", world::to_json(action)}});
    return {world::gui_state_from_json(r.at("state")), r.at("terminated").get<bool>()};
  } catch (const RemoteError& e) {
    rethrow_remote(e);
  }
}

bool RemoteEnv::check_success() {
  try {
    return client_.call("CheckSuccess").at("success").get<bool>();
  } catch (const RemoteError& e) {
    rethrow_remote(e);
  }
}

std::vector<Action> RemoteEnv::enumerate_actions() {
  try {
    const auto r = client_.call("EnumerateActions");
    std::vector<Action> out;
    for (const auto& a : r.at("actions")) out.push_back(world::action_from_json(a));
    return out;
  } catch (const RemoteError& e) {
    rethrow_remote(e);
  }
}

void RemoteEnv::ping() { client_.call("Ping"); }

PoolConfig load_pool_config(const Config& cfg) {
  PoolConfig pc;
  pc.active = parse_endpoint_list(cfg.get("pool.active"));
  pc.backups = parse_endpoint_list(cfg.get_or("pool.backups", ""));
  pc.options.retry_budget = static_cast<int>(cfg.get_int("pool.retry_budget", 8));
  pc.options.client.connect_timeout = std::chrono::milliseconds(cfg.get_int("pool.connect_timeout_ms", 2000));
  pc.options.client.io_timeout = std::chrono::milliseconds(cfg.get_int("pool.io_timeout_ms", 30000));
  return pc;
}

SessionPool::SessionPool(std::vector<Endpoint> active, std::vector<Endpoint> backups, PoolOptions opts)
    : opts_(std::move(opts)) {
  if (active.empty()) throw ValidationError("session pool needs at least one active endpoint");
  if (opts_.retry_budget < 0) throw ValidationError("retry_budget must be non-negative");
  std::set<Endpoint> seen;
  for (const auto* list : {&active, &backups}) {
    for (const auto& ep : *list) {
      validate_endpoint(ep);
      if (!seen.insert(ep).second) throw ValidationError("duplicate pool endpoint " + ep.str());
      health_[ep] = Health::Up;
    }
  }
  for (auto& ep : active) slots_.push_back({std::move(ep), false});
  spares_.assign(backups.begin(), backups.end());
}

PooledSession SessionPool::acquire() {
  for (;;) {
    std::size_t slot = 0;
    Endpoint ep;
    {
      std::unique_lock lock(mu_);
      for (;;) {
        bool any_alive = false;
        std::optional<std::size_t> free;
        for (std::size_t i = 0; i < slots_.size(); ++i) {
          if (!slots_[i].ep) continue;
          any_alive = true;
          if (!slots_[i].busy && !free) free = i;
        }
        if (!any_alive) throw PoolExhausted("every pool endpoint is down");
        if (free) {
          slot = *free;
          slots_[slot].busy = true;
          ep = *slots_[slot].ep;
          break;
        }
        cv_.wait(lock);
      }
    }
    PooledSession session(this, slot, ep);
    try {
      session.ping();
      return session;
    } catch (const PoolExhausted&) {
      // This slot ran out of backups; another slot may still be alive.
    } catch (const ConnectionLost&) {
      // Retry budget spent on this slot.
    }
  }
}

std::size_t SessionPool::slot_count() const {
  std::lock_guard lock(mu_);
  return slots_.size();
}

std::size_t SessionPool::active_count() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(), [](const Slot& s) { return s.ep.has_value(); }));
}

std::vector<Endpoint> SessionPool::active_endpoints() const {
  std::lock_guard lock(mu_);
  std::vector<Endpoint> out;
  for (const auto& s : slots_) {
    if (s.ep) out.push_back(*s.ep);
  }
  return out;
}

std::size_t SessionPool::backups_remaining() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(spares_.begin(), spares_.end(), [&](const Endpoint& e) { return health_.at(e) == Health::Up; }));
}

std::size_t SessionPool::failovers() const {
  std::lock_guard lock(mu_);
  return failovers_;
}

Health SessionPool::health(const Endpoint& ep) const {
  std::lock_guard lock(mu_);
  auto it = health_.find(ep);
  if (it == health_.end()) throw ValidationError("endpoint not in pool: " + ep.str());
  return it->second;
}

std::optional<Endpoint> SessionPool::fail_over(std::size_t slot, const Endpoint& failed) {
  std::lock_guard lock(mu_);
  health_[failed] = Health::Down;
  ++failovers_;
  while (!spares_.empty()) {
    Endpoint next = spares_.front();
    spares_.pop_front();
    if (health_[next] == Health::Up) {
      slots_[slot].ep = next;
      return next;
    }
  }
  slots_[slot].ep.reset();
  return std::nullopt;
}

void SessionPool::release(std::size_t slot) {
  {
    std::lock_guard lock(mu_);
    slots_[slot].busy = false;
  }
  cv_.notify_all();
}

PooledSession::PooledSession(SessionPool* pool, std::size_t slot, Endpoint ep)
    : pool_(pool), slot_(slot), ep_(std::move(ep)) {}

PooledSession::PooledSession(PooledSession&& o) noexcept
    : pool_(o.pool_),
      slot_(o.slot_),
      ep_(std::move(o.ep_)),
      conn_(std::move(o.conn_)),
      reset_(std::move(o.reset_)),
      actions_(std::move(o.actions_)),
      failovers_(o.failovers_) {
  o.pool_ = nullptr;
}

PooledSession::~PooledSession() {
  if (pool_) pool_->release(slot_);
}

void PooledSession::ensure_connected() {
  if (conn_) return;
  auto c = std::make_unique<RemoteEnv>(ep_, pool_->opts_.client);
  if (reset_) {
    c->reset(reset_->task, reset_->seed, reset_->obstacle_prob);
    for (const auto& a : actions_) c->step(a);
  }
  conn_ = std::move(c);
}

template <typename F>
auto PooledSession::run(F&& op) {
  int attempts = 0;
  for (;;) {
    try {
      ensure_connected();
      return op(*conn_);
    } catch (const ConnectionLost& e) {
      conn_.reset();
      if (attempts++ >= pool_->opts_.retry_budget) throw;
      auto next = pool_->fail_over(slot_, ep_);
      if (!next) throw PoolExhausted("no backup left after losing " + ep_.str() + " (" + e.what() + ")");
      ep_ = *next;
      ++failovers_;
    }
  }
}

GuiState PooledSession::reset(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob) {
  reset_ = ResetArgs{task, seed, obstacle_prob};
  actions_.clear();
  // A fresh reset needs no replay: drop the recorded prefix first.
  return run([&](RemoteEnv& r) { return r.reset(task, seed, obstacle_prob); });
}

world::StepResult PooledSession::step(const Action& action) {
  auto result = run([&](RemoteEnv& r) { return r.step(action); });
  actions_.push_back(action);
  return result;
}

bool PooledSession::check_success() {
  return run([](RemoteEnv& r) { return r.check_success(); });
}

std::vector<Action> PooledSession::enumerate_actions() {
  return run([](RemoteEnv& r) { return r.enumerate_actions(); });
}

void PooledSession::ping() {
  run([](RemoteEnv& r) {
    r.ping();
    return 0;
  });
}

namespace {

void check_batch_args(const std::vector<world::TaskSpec>& tasks, const std::vector<std::uint64_t>& seeds) {
  if (tasks.size() != seeds.size()) throw ValidationError("tasks and seeds differ in length");
}

}  // namespace

std::vector<Trajectory> parallel_rollouts(SessionPool& pool, const Agent& agent,
                                          const std::vector<world::TaskSpec>& tasks,
                                          const std::vector<std::uint64_t>& seeds, double obstacle_prob,
                                          std::uint64_t policy_seed,
                                          std::vector<std::vector<CandidateAudit>>* audits) {
  check_batch_args(tasks, seeds);
  const std::size_t n = tasks.size();
  std::vector<Trajectory> out(n);
  if (n == 0) return out;
  if (audits) audits->assign(n, {});
  std::vector<char> done(n, 0);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr hard_error;
  std::string last_loss;

  auto worker = [&] {
    std::optional<PooledSession> session;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      for (;;) {
        try {
          if (!session) session.emplace(pool.acquire());
          std::vector<CandidateAudit> audit;
          out[i] = run_episode(*session, agent, tasks[i], seeds[i], obstacle_prob, derive_seed(policy_seed, i),
                               audits ? &audit : nullptr);
          if (audits) (*audits)[i] = std::move(audit);
          done[i] = 1;
          break;
        } catch (const PoolExhausted& e) {
          session.reset();
          std::lock_guard lock(err_mu);
          last_loss = e.what();
          if (pool.active_count() == 0) return;
        } catch (const ConnectionLost& e) {
          session.reset();
          std::lock_guard lock(err_mu);
          last_loss = e.what();
          if (pool.active_count() == 0) return;
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!hard_error) hard_error = std::current_exception();
          return;
        }
      }
    }
  };

  const std::size_t workers = std::min(pool.slot_count(), n);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  if (hard_error) std::rethrow_exception(hard_error);
  std::vector<std::size_t> completed;
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i]) completed.push_back(i);
  }
  if (completed.size() != n) {
    throw PartialBatchError("rollout batch incomplete (" + std::to_string(completed.size()) + "/" +
                                std::to_string(n) + " done): " + last_loss,
                            std::move(completed));
  }
  return out;
}

std::vector<Trajectory> local_rollouts(const Agent& agent, const std::vector<world::TaskSpec>& tasks,
                                       const std::vector<std::uint64_t>& seeds, double obstacle_prob,
                                       std::uint64_t policy_seed, std::size_t workers,
                                       std::vector<std::vector<CandidateAudit>>* audits,
                                       std::shared_ptr<const world::Fixture> fixture) {
  check_batch_args(tasks, seeds);
  const std::size_t n = tasks.size();
  std::vector<Trajectory> out(n);
  if (audits) audits->assign(n, {});
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex err_mu;
  auto worker = [&] {
    LocalSession env(fixture);
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = run_episode(env, agent, tasks[i], seeds[i], obstacle_prob, derive_seed(policy_seed, i),
                             audits ? &(*audits)[i] : nullptr);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace prmgui::net
