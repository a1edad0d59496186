#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace evtap {

/// Flat `key=value` configuration. Blank lines and lines starting with '#'
/// are ignored; duplicate keys are an error. Every key must be consumed by a
/// getter before check_all_consumed(), which rejects leftovers.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  long long get_int(const std::string& key, long long fallback);
  bool get_bool(const std::string& key, bool fallback);

  /// Throws ConfigError listing every key no getter asked for.
  void check_all_consumed() const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
  std::set<std::string> consumed_;
};

}  // namespace evtap
