#pragma once

// Worlds behind the wire protocol, and the client-side pool that keeps N
// sessions alive by promoting backups and replaying lost episodes.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "prmgui/config.hpp"
#include "prmgui/protocol.hpp"
#include "prmgui/rollout.hpp"
#include "prmgui/socket.hpp"
#include "prmgui/world.hpp"

namespace prmgui::net {

struct EnvServerOptions {
  std::shared_ptr<const world::Fixture> fixture = world::default_fixture();
  // Fault injection: the server crashes (drops every connection and stops
  // accepting) on receiving its (k+1)-th Step request. Negative disables.
  int crash_on_step = -1;
};

class EnvServer {
 public:
  EnvServer(const Endpoint& bind, EnvServerOptions opts = {});
  ~EnvServer();

  Endpoint endpoint() const { return server_->endpoint(); }
  void crash() { server_->crash(); }
  bool crashed() const { return server_->crashed(); }
  void stop() { server_->stop(); }
  int steps_served() const;

  struct Shared;

 private:
  std::shared_ptr<Shared> shared_;
  std::unique_ptr<LineServer> server_;
};

// Loads the fixture from a config file (empty path = built-in fixture).
std::unique_ptr<EnvServer> serve_env(const Endpoint& bind, const std::string& fixture_config = {});

// One remote world over one connection.
class RemoteEnv final : public EnvSession {
 public:
  explicit RemoteEnv(const Endpoint& ep, const ClientOptions& opts = {});

  world::GuiState reset(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob) override;
  world::StepResult step(const world::Action& action) override;
  bool check_success() override;
  std::vector<world::Action> enumerate_actions() override;
  void ping();

  const Endpoint& endpoint() const { return client_.endpoint(); }

 private:
  Client client_;
};

enum class Health : std::uint8_t { Up, Down };

struct PoolOptions {
  int retry_budget = 8;  // failovers allowed per operation
  ClientOptions client;
};

struct PoolConfig {
  std::vector<Endpoint> active;
  std::vector<Endpoint> backups;
  PoolOptions options;
};

// Reads `pool.active`, `pool.backups` (comma-separated HOST:PORT lists),
// `pool.retry_budget`, `pool.connect_timeout_ms`, `pool.io_timeout_ms`.
PoolConfig load_pool_config(const Config& cfg);

class PoolExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PooledSession;

class SessionPool {
 public:
  SessionPool(std::vector<Endpoint> active, std::vector<Endpoint> backups, PoolOptions opts = {});
  explicit SessionPool(const PoolConfig& cfg) : SessionPool(cfg.active, cfg.backups, cfg.options) {}

  // Blocks while every live slot is in use. Returns a connected session;
  // throws PoolExhausted when no endpoint can be reached.
  PooledSession acquire();

  std::size_t slot_count() const;
  std::size_t active_count() const;  // slots still bound to an endpoint
  std::vector<Endpoint> active_endpoints() const;
  std::size_t backups_remaining() const;
  std::size_t failovers() const;
  Health health(const Endpoint& ep) const;
  const PoolOptions& options() const { return opts_; }

 private:
  friend class PooledSession;
  struct Slot {
    std::optional<Endpoint> ep;
    bool busy = false;
  };

  // Marks `failed` Down and rebinds the slot to the next Up backup.
  std::optional<Endpoint> fail_over(std::size_t slot, const Endpoint& failed);
  void release(std::size_t slot);

  PoolOptions opts_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Slot> slots_;
  std::deque<Endpoint> spares_;
  std::map<Endpoint, Health> health_;
  std::size_t failovers_ = 0;
};

// A session bound to one pool slot. Records the reset arguments and every
// accepted action; after a connection loss it moves to the slot's new
// endpoint and replays them, so the episode continues exactly.
class PooledSession final : public EnvSession {
 public:
  PooledSession(PooledSession&& o) noexcept;
  PooledSession& operator=(PooledSession&&) = delete;
  ~PooledSession() override;

  world::GuiState reset(const world::TaskSpec& task, std::uint64_t seed, double obstacle_prob) override;
  world::StepResult step(const world::Action& action) override;
  bool check_success() override;
  std::vector<world::Action> enumerate_actions() override;
  void ping();

  const Endpoint& endpoint() const { return ep_; }
  int failovers() const { return failovers_; }

 private:
  friend class SessionPool;
  PooledSession(SessionPool* pool, std::size_t slot, Endpoint ep);

  template <typename F>
  auto run(F&& op);
  void ensure_connected();

  SessionPool* pool_ = nullptr;
  std::size_t slot_ = 0;
  Endpoint ep_;
  std::unique_ptr<RemoteEnv> conn_;
  struct ResetArgs {
    world::TaskSpec task;
    std::uint64_t seed = 0;
    double obstacle_prob = 0.0;
  };
  std::optional<ResetArgs> reset_;
  std::vector<world::Action> actions_;
  int failovers_ = 0;
};

class PartialBatchError : public std::runtime_error {
 public:
  PartialBatchError(const std::string& msg, std::vector<std::size_t> completed)
      : std::runtime_error(msg), completed_(std::move(completed)) {}
  const std::vector<std::size_t>& completed() const { return completed_; }

 private:
  std::vector<std::size_t> completed_;
};

// Episode i uses world seed seeds[i] and agent stream
// derive_seed(policy_seed, i). Results follow input order.
std::vector<Trajectory> parallel_rollouts(SessionPool& pool, const Agent& agent,
                                          const std::vector<world::TaskSpec>& tasks,
                                          const std::vector<std::uint64_t>& seeds, double obstacle_prob,
                                          std::uint64_t policy_seed,
                                          std::vector<std::vector<CandidateAudit>>* audits = nullptr);

// Same contract, run in-process on `workers` threads (no network).
std::vector<Trajectory> local_rollouts(const Agent& agent, const std::vector<world::TaskSpec>& tasks,
                                       const std::vector<std::uint64_t>& seeds, double obstacle_prob,
                                       std::uint64_t policy_seed, std::size_t workers = 1,
                                       std::vector<std::vector<CandidateAudit>>* audits = nullptr,
                                       std::shared_ptr<const world::Fixture> fixture = world::default_fixture());

}  // namespace prmgui::net
