#include "selfvio/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace selfvio {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto piece = trim(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start));
    if (!piece.empty()) out.push_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
    const auto key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("config line with empty key: " + line);
    cfg.values_[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + a);
    values_[trim(std::string_view(a).substr(0, eq))] = trim(std::string_view(a).substr(eq + 1));
  }
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: " + *v);
  }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  long long out = 0;
  const auto* end = v->data() + v->size();
  const auto res = std::from_chars(v->data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("config key '" + key + "' is not an integer: " + *v);
  return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
  if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: " + *v);
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
  const auto v = find(key);
  if (!v) return {};
  return split(*v, ',');
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& piece : split(*v, ',')) {
    try {
      out.push_back(std::stod(piece));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' has a non-numeric entry: " + piece);
    }
  }
  return out;
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path.string());
  out << to_text();
}

}  // namespace selfvio
