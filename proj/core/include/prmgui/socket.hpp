#pragma once

// Blocking TCP sockets with newline framing, plus a small threaded server
// that both the environment and the scoring service build on.

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace prmgui::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
  bool operator==(const Endpoint&) const = default;
  auto operator<=>(const Endpoint&) const = default;
};

// Parses HOST:PORT; port must be in [1, 65535] unless allow_zero (servers
// may ask the OS for an ephemeral port).
Endpoint parse_endpoint(std::string_view text, bool allow_zero = false);
void validate_endpoint(const Endpoint& ep, bool allow_zero = false);

// Transport failure on an established or attempted connection.
class ConnectionLost : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept;
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  static Socket connect(const Endpoint& ep, std::chrono::milliseconds timeout);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void set_io_timeout(std::chrono::milliseconds timeout);
  // Throws ConnectionLost on failure.
  void send_line(std::string_view line);
  // nullopt on orderly EOF; throws ConnectionLost on errors and timeouts.
  std::optional<std::string> read_line(std::size_t max_len = 1 << 24);
  void shutdown();
  void close();

 private:
  int fd_ = -1;
  std::string buf_;
};

class Listener {
 public:
  Listener() = default;
  Listener(Listener&&) noexcept;
  Listener& operator=(Listener&&) noexcept;
  ~Listener();

  // Throws IoError when the address cannot be bound.
  static Listener bind(const Endpoint& ep, int backlog = 64);
  std::optional<Socket> accept();
  int port() const { return port_; }
  void shutdown();

 private:
  int fd_ = -1;
  int port_ = 0;
};

// Per-connection request handler. Returning nullopt drops the connection
// without a reply (used only for fault injection).
class LineHandler {
 public:
  virtual ~LineHandler() = default;
  virtual std::optional<std::string> handle(const std::string& line) = 0;
};

// Accepts connections on a background thread and serves each on its own
// thread with a fresh handler from `factory`.
class LineServer {
 public:
  using Factory = std::function<std::unique_ptr<LineHandler>()>;

  LineServer(const Endpoint& bind, Factory factory);
  ~LineServer();
  LineServer(const LineServer&) = delete;
  LineServer& operator=(const LineServer&) = delete;

  Endpoint endpoint() const { return endpoint_; }

  // Abruptly closes the listener and every open connection. Safe to call
  // from handler threads; does not join.
  void crash();
  bool crashed() const { return crashed_.load(); }

  // Closes everything and joins all threads. Idempotent.
  void stop();

 private:
  void accept_loop();
  void serve(std::shared_ptr<Socket> sock);

  Endpoint endpoint_;
  Factory factory_;
  Listener listener_;
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<std::shared_ptr<Socket>> conns_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> crashed_{false};
  bool joined_ = false;
};

}  // namespace prmgui::net
