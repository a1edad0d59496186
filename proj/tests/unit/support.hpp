#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evtap/event_core.hpp"
#include "evtap/io_util.hpp"

namespace evtap::test {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("evtap_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  io::write_file_atomic(p, s);
}

/// Uniform random events, unsorted.
inline std::vector<Event> random_events(std::mt19937_64& rng, std::size_t n, int w, int h,
                                        Micros t_max) {
  std::uniform_int_distribution<Micros> t(0, t_max);
  std::uniform_int_distribution<int> x(0, w - 1), y(0, h - 1), p(0, 1);
  std::vector<Event> out(n);
  for (auto& e : out)
    e = Event{t(rng), static_cast<std::uint16_t>(x(rng)), static_cast<std::uint16_t>(y(rng)),
              static_cast<std::int8_t>(p(rng) ? 1 : -1)};
  return out;
}

}  // namespace evtap::test
