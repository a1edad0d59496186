#include "evtap/kv_config.hpp"

#include <charconv>
#include <cmath>

#include "evtap/errors.hpp"
#include "evtap/io_util.hpp"

namespace evtap {

KvConfig KvConfig::parse(std::string_view text) {
  KvConfig cfg;
  auto rows = io::lines(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto line = io::trim(rows[i]);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(i + 1) + ": expected key=value");
    std::string key(io::trim(line.substr(0, eq)));
    std::string value(io::trim(line.substr(eq + 1)));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(i + 1) + ": empty key");
    if (cfg.values_.count(key))
      throw ConfigError("config line " + std::to_string(i + 1) + ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
    cfg.lines_[key] = i + 1;
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  return parse(io::read_file(path));
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KvConfig::require_string(const std::string& key) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    throw ConfigError("key '" + key + "': expected a finite number, got '" + s + "'");
  return v;
}

long long KvConfig::get_int(const std::string& key, long long fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
  return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + it->second + "'");
}

void KvConfig::check_all_consumed() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (consumed_.count(key)) continue;
    if (!unknown.empty()) unknown += ", ";
    unknown += key + " (line " + std::to_string(lines_.count(key) ? lines_.at(key) : 0) + ")";
  }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

}  // namespace evtap
