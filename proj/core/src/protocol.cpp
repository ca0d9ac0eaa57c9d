#include "prmgui/protocol.hpp"

#include <array>
#include <atomic>
#include <cstdio>

namespace prmgui::net {

namespace {

constexpr std::array<std::string_view, 9> kCodeNames{
    "BAD_FRAME", "UNKNOWN_TYPE", "NO_SESSION", "SESSION_DONE", "BAD_ACTION",
    "BAD_TASK",  "BAD_STATE",    "VERSION_MISMATCH", "INTERNAL",
};

}  // namespace

std::string_view to_string(ErrorCode code) { return kCodeNames[static_cast<std::size_t>(code)]; }

std::optional<ErrorCode> parse_error_code(std::string_view s) {
  for (std::size_t i = 0; i < kCodeNames.size(); ++i) {
    if (kCodeNames[i] == s) return static_cast<ErrorCode>(i);
  }
  return std::nullopt;
}

std::variant<Request, std::string> parse_request(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return error_reply(0, "", ErrorCode::BadFrame, "record is not a JSON object");
  }
  std::int64_t seq = 0;
  std::string session;
  if (auto it = j.find("seq"); it != j.end() && it->is_number_integer()) seq = it->get<std::int64_t>();
  if (auto it = j.find("session"); it != j.end() && it->is_string()) session = it->get<std::string>();
  auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) {
    return error_reply(seq, session, ErrorCode::BadFrame, "missing string field 'type'");
  }
  if (!j.contains("seq") || !j["seq"].is_number_integer()) {
    return error_reply(seq, session, ErrorCode::BadFrame, "missing integer field 'seq'");
  }
  if (!j.contains("session") || !j["session"].is_string()) {
    return error_reply(seq, session, ErrorCode::BadFrame, "missing string field 'session'");
  }
  Request req;
  req.type = type_it->get<std::string>();
  req.seq = seq;
  req.session = std::move(session);
  req.body = std::move(j);
  return req;
}

std::string reply(const Request& req, std::string_view type, nlohmann::json payload) {
  payload["type"] = type;
  payload["seq"] = req.seq;
  payload["session"] = req.session;
  return payload.dump();
}

std::string error_reply(std::int64_t seq, std::string_view session, ErrorCode code, std::string_view message) {
  nlohmann::json j{{"type", "Error"}, {"seq", seq}, {"session", session}, {"code", to_string(code)},
                   {"message", message}};
  return j.dump();
}

Client::Client(const Endpoint& ep, const ClientOptions& opts, std::string session)
    : ep_(ep), session_(session.empty() ? new_session_token() : std::move(session)) {
  sock_ = Socket::connect(ep, opts.connect_timeout);
  sock_.set_io_timeout(opts.io_timeout);
}

nlohmann::json Client::call(std::string_view type, nlohmann::json payload) {
  const std::int64_t seq = seq_++;
  payload["type"] = type;
  payload["seq"] = seq;
  payload["session"] = session_;
  sock_.send_line(payload.dump());
  auto line = sock_.read_line();
  if (!line) throw ConnectionLost("server closed the connection");
  nlohmann::json resp = nlohmann::json::parse(*line, nullptr, false);
  if (resp.is_discarded() || !resp.is_object()) throw ConnectionLost("unparsable reply from " + ep_.str());
  if (resp.value("seq", std::int64_t{-1}) != seq) throw ConnectionLost("reply sequence mismatch from " + ep_.str());
  if (resp.value("type", std::string()) == "Error") {
    const auto code = parse_error_code(resp.value("code", std::string())).value_or(ErrorCode::Internal);
    throw RemoteError(code, resp.value("message", std::string()));
  }
  return resp;
}

std::string new_session_token() {
  static std::atomic<std::uint64_t> counter{0};
  const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  char buf[40];
  std::snprintf(buf, sizeof buf, "s%llx-%llx", static_cast<unsigned long long>(now),
                static_cast<unsigned long long>(counter.fetch_add(1)));
  return buf;
}

}  // namespace prmgui::net
