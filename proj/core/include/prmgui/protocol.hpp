#pragma once

// Newline-delimited JSON records. Every request carries `type`, `seq` and
// `session`; every response echoes `seq` and `session`. Error responses have
// type "Error" with `code` and `message`.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "prmgui/socket.hpp"

namespace prmgui::net {

inline constexpr int kProtocolVersion = 1;

enum class ErrorCode : std::uint8_t {
  BadFrame,
  UnknownType,
  NoSession,
  SessionDone,
  BadAction,
  BadTask,
  BadState,
  VersionMismatch,
  Internal,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view s);

struct Request {
  std::string type;
  std::int64_t seq = 0;
  std::string session;
  nlohmann::json body;  // the full record
};

// Either a well-formed request or the error line to send back.
std::variant<Request, std::string> parse_request(const std::string& line);

std::string reply(const Request& req, std::string_view type, nlohmann::json payload = nlohmann::json::object());
std::string error_reply(std::int64_t seq, std::string_view session, ErrorCode code, std::string_view message);

// The server answered with an Error record.
class RemoteError : public std::runtime_error {
 public:
  RemoteError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct ClientOptions {
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds io_timeout{30000};
};

// Synchronous request/response client over one connection. Not thread-safe.
class Client {
 public:
  Client(const Endpoint& ep, const ClientOptions& opts = {}, std::string session = {});

  // Sends one request and waits for its reply. Throws ConnectionLost on
  // transport failure or a reply with a mismatched sequence number, and
  // RemoteError for Error replies.
  nlohmann::json call(std::string_view type, nlohmann::json payload = nlohmann::json::object());

  const Endpoint& endpoint() const { return ep_; }
  const std::string& session() const { return session_; }
  std::int64_t next_seq() const { return seq_; }

 private:
  Endpoint ep_;
  Socket sock_;
  std::string session_;
  std::int64_t seq_ = 1;
};

std::string new_session_token();

}  // namespace prmgui::net
