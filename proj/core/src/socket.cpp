#include "prmgui/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "prmgui/error.hpp"

namespace prmgui::net {

namespace {

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(ep.port));
  const std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw ConnectionLost("cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

void validate_endpoint(const Endpoint& ep, bool allow_zero) {
  if (ep.host.empty()) throw ValidationError("endpoint host is empty");
  const int lo = allow_zero ? 0 : 1;
  if (ep.port < lo || ep.port > 65535) {
    throw ValidationError("endpoint port out of range: " + std::to_string(ep.port));
  }
}

Endpoint parse_endpoint(std::string_view text, bool allow_zero) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw ValidationError("expected HOST:PORT, got '" + std::string(text) + "'");
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  const auto port_text = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), ep.port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size()) {
    throw ValidationError("bad port in '" + std::string(text) + "'");
  }
  validate_endpoint(ep, allow_zero);
  return ep;
}

Socket::Socket(Socket&& o) noexcept : fd_(o.fd_), buf_(std::move(o.buf_)) { o.fd_ = -1; }

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    buf_ = std::move(o.buf_);
    o.fd_ = -1;
  }
  return *this;
}

Socket::~Socket() { close(); }

Socket Socket::connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(ep);
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw ConnectionLost(errno_text("socket"));
  Socket sock(fd);
  const int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  if (rc < 0 && errno != EINPROGRESS) throw ConnectionLost("connect " + ep.str() + ": " + std::strerror(errno));
  if (rc < 0) {
    pollfd pfd{fd, POLLOUT, 0};
    rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc <= 0) throw ConnectionLost("connect " + ep.str() + ": timed out");
    int err = 0;
    socklen_t len = sizeof err;
    getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw ConnectionLost("connect " + ep.str() + ": " + std::strerror(err));
  }
  fcntl(fd, F_SETFL, flags);
  const int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return sock;
}

void Socket::set_io_timeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

void Socket::send_line(std::string_view line) {
  if (fd_ < 0) throw ConnectionLost("send on closed socket");
  std::string data(line);
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ConnectionLost(errno_text("send"));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> Socket::read_line(std::size_t max_len) {
  if (fd_ < 0) throw ConnectionLost("read on closed socket");
  for (;;) {
    const auto nl = buf_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (buf_.size() > max_len) throw ConnectionLost("line exceeds maximum length");
    char chunk[8192];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n == 0) {
      if (buf_.empty()) return std::nullopt;
      throw ConnectionLost("connection closed mid-line");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ConnectionLost(errno_text("recv"));
    }
    buf_.append(chunk, static_cast<std::size_t>(n));
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Listener::Listener(Listener&& o) noexcept : fd_(o.fd_), port_(o.port_) { o.fd_ = -1; }

Listener& Listener::operator=(Listener&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    port_ = o.port_;
    o.fd_ = -1;
  }
  return *this;
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

Listener Listener::bind(const Endpoint& ep, int backlog) {
  validate_endpoint(ep, /*allow_zero=*/true);
  sockaddr_in addr{};
  try {
    addr = resolve(ep);
  } catch (const ConnectionLost& e) {
    throw IoError(e.what());
  }
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw IoError(errno_text("socket"));
  const int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd, backlog) < 0) {
    const std::string msg = "cannot bind " + ep.str() + ": " + std::strerror(errno);
    ::close(fd);
    throw IoError(msg);
  }
  socklen_t len = sizeof addr;
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  Listener l;
  l.fd_ = fd;
  l.port_ = ntohs(addr.sin_port);
  return l;
}

std::optional<Socket> Listener::accept() {
  for (;;) {
    const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      const int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return std::nullopt;
  }
}

void Listener::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

LineServer::LineServer(const Endpoint& bind, Factory factory) : factory_(std::move(factory)) {
  listener_ = Listener::bind(bind);
  endpoint_ = {bind.host, listener_.port()};
  acceptor_ = std::thread([this] { accept_loop(); });
}

LineServer::~LineServer() { stop(); }

void LineServer::accept_loop() {
  while (!stopping_.load() && !crashed_.load()) {
    auto sock = listener_.accept();
    if (!sock) break;
    std::lock_guard lock(mu_);
    if (stopping_.load() || crashed_.load()) break;
    auto shared = std::make_shared<Socket>(std::move(*sock));
    conns_.push_back(shared);
    workers_.emplace_back([this, shared] { serve(shared); });
  }
}

void LineServer::serve(std::shared_ptr<Socket> sock) {
  auto handler = factory_();
  try {
    while (auto line = sock->read_line()) {
      auto reply = handler->handle(*line);
      if (!reply) {
        sock->shutdown();
        break;
      }
      sock->send_line(*reply);
    }
  } catch (const ConnectionLost&) {
    // Peer went away or the server is shutting down.
  }
  sock->shutdown();
}

void LineServer::crash() {
  crashed_.store(true);
  listener_.shutdown();
  std::lock_guard lock(mu_);
  for (auto& c : conns_) c->shutdown();
}

void LineServer::stop() {
  if (joined_) return;
  stopping_.store(true);
  listener_.shutdown();
  {
    std::lock_guard lock(mu_);
    for (auto& c : conns_) c->shutdown();
  }
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  joined_ = true;
}

}  // namespace prmgui::net
