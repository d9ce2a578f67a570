#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace selfvio {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text configuration. Lines starting with '#' are comments.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  /// Applies `key=value` overrides (e.g. from the command line).
  void apply_overrides(const std::vector<std::string>& assignments);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  [[nodiscard]] bool contains(const std::string& key) const { return values_.count(key) != 0; }
  [[nodiscard]] std::optional<std::string> find(const std::string& key) const;

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] long long get_int(const std::string& key, long long fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
  [[nodiscard]] std::vector<std::string> get_list(const std::string& key) const;  // comma separated
  [[nodiscard]] std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }
  [[nodiscard]] std::string to_text() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
};

[[nodiscard]] std::string trim(std::string_view s);
[[nodiscard]] std::vector<std::string> split(std::string_view s, char sep);

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace selfvio
