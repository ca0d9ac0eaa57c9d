#include <doctest.h>

#include <thread>

#include "prmgui/datagen.hpp"
#include "prmgui/error.hpp"
#include "prmgui/netenv.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/protocol.hpp"

using namespace prmgui;
using namespace prmgui::net;
using nlohmann::json;

namespace {

Endpoint any_port() { return parse_endpoint("127.0.0.1:0", true); }

json raw_call(Socket& s, const std::string& line) {
  s.send_line(line);
  const auto reply = s.read_line();
  REQUIRE(reply.has_value());
  return json::parse(*reply);
}

// An endpoint nothing listens on: bind, note the port, stop.
Endpoint dead_endpoint() {
  EnvServer s(any_port());
  const auto ep = s.endpoint();
  s.stop();
  return ep;
}

std::string dump(const Trajectory& t) { return to_json(t).dump(); }

world::TaskSpec long_task() {
  return world::make_task("n", world::Template::WriteNote, {{"title", "Trip"}, {"body", "Pack bags"}});
}

}  // namespace

TEST_CASE("endpoints parse and validate") {
  const auto ep = parse_endpoint("10.0.0.2:7001");
  CHECK(ep.host == "10.0.0.2");
  CHECK(ep.port == 7001);
  CHECK_THROWS(parse_endpoint("localhost"));
  CHECK_THROWS(parse_endpoint("h:0"));
  CHECK_THROWS(parse_endpoint("h:70000"));
  CHECK_NOTHROW(parse_endpoint("h:0", true));
}

TEST_CASE("Ping answers Pong with the sequence number and session echoed") {
  EnvServer server(any_port());
  auto s = Socket::connect(server.endpoint(), std::chrono::milliseconds(2000));
  const auto r = raw_call(s, R"({"type":"Ping","seq":41,"session":"abc"})");
  CHECK(r["type"] == "Pong");
  CHECK(r["seq"] == 41);
  CHECK(r["session"] == "abc");
}

TEST_CASE("malformed frames get error replies and the connection survives") {
  EnvServer server(any_port());
  auto s = Socket::connect(server.endpoint(), std::chrono::milliseconds(2000));
  CHECK(raw_call(s, "not json")["code"] == "BAD_FRAME");
  CHECK(raw_call(s, R"({"seq":1,"session":"x"})")["code"] == "BAD_FRAME");
  CHECK(raw_call(s, R"({"type":"Ping","session":"x"})")["code"] == "BAD_FRAME");
  const auto u = raw_call(s, R"({"type":"Dance","seq":5,"session":"x"})");
  CHECK(u["code"] == "UNKNOWN_TYPE");
  CHECK(u["seq"] == 5);
  CHECK(raw_call(s, R"({"type":"Ping","seq":6,"session":"x"})")["type"] == "Pong");
}

TEST_CASE("stepping before a reset is NO_SESSION and a wrong version is refused") {
  EnvServer server(any_port());
  Client c(server.endpoint());
  try {
    c.call("Step", {{"action", world::to_json(world::Action::wait())}});
    FAIL("expected an error reply");
  } catch (const RemoteError& e) {
    CHECK(e.code() == ErrorCode::NoSession);
  }
  const auto task = world::to_json(long_task());
  try {
    c.call("Reset", {{"protocol_version", 99}, {"task", task}, {"seed", 1}, {"obstacle_prob", 0.0}});
    FAIL("expected an error reply");
  } catch (const RemoteError& e) {
    CHECK(e.code() == ErrorCode::VersionMismatch);
  }
}

TEST_CASE("a remote world answers exactly like a local one") {
  EnvServer server(any_port());
  RemoteEnv remote(server.endpoint());
  LocalSession local;
  const auto task = long_task();
  CHECK(remote.reset(task, 5, 0.3) == local.reset(task, 5, 0.3));
  Rng rng(5);
  for (int i = 0; i < 15; ++i) {
    const auto acts = local.enumerate_actions();
    REQUIRE(remote.enumerate_actions() == acts);
    const auto& a = acts[uniform_index(rng, acts.size())];
    const auto l = local.step(a);
    const auto r = remote.step(a);
    CHECK(world::serialize(l.state) == world::serialize(r.state));
    CHECK(l.terminated == r.terminated);
    CHECK(local.check_success() == remote.check_success());
    if (l.terminated) break;
  }
  // Remote errors surface as the same exception types a local world throws.
  CHECK_THROWS_AS(remote.step(world::Action::wait()), SessionError);
  CHECK_THROWS_AS(local.step(world::Action::wait()), SessionError);
}

TEST_CASE("two connections stepping concurrently evolve independently") {
  EnvServer server(any_port());
  const auto tasks = datagen::default_task_bank();
  auto drive = [&](std::size_t k, std::string* out) {
    RemoteEnv env(server.endpoint());
    LocalSession local;
    env.reset(tasks[k], 100 + k, 0.2);
    local.reset(tasks[k], 100 + k, 0.2);
    Rng rng(k);
    std::string mismatch;
    for (int i = 0; i < 15; ++i) {
      const auto acts = local.enumerate_actions();
      const auto& a = acts[uniform_index(rng, acts.size())];
      const auto l = local.step(a);
      const auto r = env.step(a);
      if (world::serialize(l.state) != world::serialize(r.state)) mismatch = "step " + std::to_string(i);
      if (l.terminated) break;
    }
    *out = mismatch;
  };
  std::string a, b;
  std::thread t1(drive, 0, &a), t2(drive, 12, &b);
  t1.join();
  t2.join();
  CHECK(a.empty());
  CHECK(b.empty());
}

TEST_CASE("pool config loads from key-value text") {
  const auto pc = load_pool_config(Config::parse(
      "pool.active = 127.0.0.1:7001, 127.0.0.1:7002\npool.backups = 127.0.0.1:7003\npool.retry_budget = 3\n"));
  CHECK(pc.active.size() == 2);
  CHECK(pc.backups.size() == 1);
  CHECK(pc.options.retry_budget == 3);
  CHECK_THROWS(SessionPool({parse_endpoint("127.0.0.1:7001")}, {parse_endpoint("127.0.0.1:7001")}));
}

TEST_CASE("a healthy pool hands out sessions bound to an Up endpoint") {
  EnvServer a(any_port()), b(any_port());
  SessionPool pool({a.endpoint(), b.endpoint()}, {});
  auto s = pool.acquire();
  CHECK(pool.health(s.endpoint()) == Health::Up);
  CHECK(s.failovers() == 0);
}

TEST_CASE("a pool with every endpoint down is exhausted") {
  PoolOptions opts;
  opts.client.connect_timeout = std::chrono::milliseconds(200);
  SessionPool pool({dead_endpoint()}, {dead_endpoint()}, opts);
  CHECK_THROWS_AS(pool.acquire(), PoolExhausted);
  CHECK(pool.active_count() == 0);
}

TEST_CASE("losing a server at any step replays onto a backup and the trajectory is unchanged") {
  const auto task = long_task();
  UniformAgent agent;
  LocalSession local;
  // A seed whose uniform rollout runs the full fifteen steps.
  std::uint64_t pseed = 0;
  Trajectory clean;
  for (;; ++pseed) {
    clean = run_episode(local, agent, task, 3, 0.0, pseed);
    if (clean.steps.size() >= 10) break;
  }
  for (int k = 0; k < 10; ++k) {
    CAPTURE(k);
    EnvServerOptions crashy;
    crashy.crash_on_step = k;
    EnvServer primary(any_port(), crashy), backup(any_port());
    SessionPool pool({primary.endpoint()}, {backup.endpoint()});
    auto session = pool.acquire();
    const auto t = run_episode(session, agent, task, 3, 0.0, pseed);
    CHECK(dump(t) == dump(clean));
    CHECK(primary.crashed());
    CHECK(session.failovers() == 1);
    CHECK(pool.health(primary.endpoint()) == Health::Down);
    CHECK(session.endpoint() == backup.endpoint());
  }
}

TEST_CASE("parallel rollouts keep input order and match in-process rollouts") {
  EnvServer a(any_port()), b(any_port());
  SessionPool pool({a.endpoint(), b.endpoint()}, {});
  auto bank = datagen::default_task_bank();
  bank.resize(8);
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
  auto pol = std::make_shared<const policy::PolicyModel>(policy::make_policy(3));
  policy::PolicyAgent agent(pol);
  const auto remote = parallel_rollouts(pool, agent, bank, seeds, 0.15, 77);
  const auto local = local_rollouts(agent, bank, seeds, 0.15, 77);
  REQUIRE(remote.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(remote[i].task.task_id == bank[i].task_id);
    CHECK(dump(remote[i]) == dump(local[i]));
  }
  CHECK(parallel_rollouts(pool, agent, {}, {}, 0.15, 77).empty());
  CHECK_THROWS_AS(parallel_rollouts(pool, agent, bank, {1}, 0.15, 77), ValidationError);
}

TEST_CASE("greedy rollouts are identical remote and local") {
  EnvServer server(any_port());
  SessionPool pool({server.endpoint()}, {});
  const auto bank = datagen::default_task_bank();
  policy::PolicyAgent greedy(std::make_shared<const policy::PolicyModel>(policy::make_policy(4)), true);
  const auto r = parallel_rollouts(pool, greedy, {bank[9]}, {42}, 0.15, 1);
  const auto l = local_rollouts(greedy, {bank[9]}, {42}, 0.15, 1);
  CHECK(dump(r[0]) == dump(l[0]));
}

TEST_CASE("k failures with at least k backups still complete the batch") {
  for (int k : {1, 2, 3}) {
    CAPTURE(k);
    std::vector<std::unique_ptr<EnvServer>> servers;
    std::vector<Endpoint> active, backups;
    for (int i = 0; i < 3; ++i) {
      EnvServerOptions o;
      if (i < k) o.crash_on_step = 4 + 3 * i;
      servers.push_back(std::make_unique<EnvServer>(any_port(), o));
      active.push_back(servers.back()->endpoint());
    }
    for (int i = 0; i < k; ++i) {
      servers.push_back(std::make_unique<EnvServer>(any_port()));
      backups.push_back(servers.back()->endpoint());
    }
    SessionPool pool(active, backups);
    const auto bank = datagen::default_task_bank();
    std::vector<std::uint64_t> seeds(bank.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = 500 + i;
    UniformAgent agent;
    const auto r = parallel_rollouts(pool, agent, bank, seeds, 0.0, 9);
    const auto l = local_rollouts(agent, bank, seeds, 0.0, 9);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(dump(r[i]) == dump(l[i]));
    CHECK(pool.failovers() == static_cast<std::size_t>(k));
  }
}

TEST_CASE("more failures than backups ends in a partial-batch error") {
  EnvServerOptions o;
  o.crash_on_step = 20;
  EnvServer only(any_port(), o);
  SessionPool pool({only.endpoint()}, {});
  const auto bank = datagen::default_task_bank();
  std::vector<std::uint64_t> seeds(bank.size(), 1);
  UniformAgent agent;
  try {
    parallel_rollouts(pool, agent, bank, seeds, 0.0, 9);
    FAIL("expected a partial batch");
  } catch (const PartialBatchError& e) {
    CHECK(e.completed().size() < bank.size());
    for (std::size_t i = 0; i < e.completed().size(); ++i) CHECK(e.completed()[i] == i);
  }
}
