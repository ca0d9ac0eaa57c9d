#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prmgui {

// Flat `key = value` text configuration. Lines starting with '#' are
// comments; keys are unique; later duplicates are rejected.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, std::string fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  // All entries whose key starts with `prefix`, with the prefix stripped.
  std::vector<std::pair<std::string, std::string>> with_prefix(std::string_view prefix) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Canonical text (sorted keys); hashing it gives a config id.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep, bool trim_parts = true);

// 64-bit FNV-1a, printed as 16 hex digits by `hex_digest`.
std::uint64_t fnv1a(std::string_view data);
std::string hex_digest(std::string_view data);

}  // namespace prmgui
