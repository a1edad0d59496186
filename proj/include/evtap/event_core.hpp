#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace evtap {

/// Microseconds since the stream epoch.
using Micros = std::int64_t;

struct Event {
  Micros t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;  // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

/// Half-open interval [start, end) in stream microseconds.
class TimeWindow {
 public:
  TimeWindow(Micros start, Micros end);

  Micros start() const noexcept { return start_; }
  Micros end() const noexcept { return end_; }
  Micros span() const noexcept { return end_ - start_; }
  bool contains(Micros t) const noexcept { return t >= start_ && t < end_; }

  /// Bin `k` of `n` equal bins; boundaries are floor(start + k*span/n).
  TimeWindow bin(int k, int n) const;
  /// Upper boundary of bin `k` of `n`.
  Micros bin_end(int k, int n) const;

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;

 private:
  Micros start_;
  Micros end_;
};

/// Sorted, bounds-checked collection of events. Immutable once built.
class EventStream {
 public:
  EventStream() = default;

  /// Validates polarity and sensor bounds (throws ValidationError with the
  /// record index), then stable-sorts by timestamp. The number of records
  /// that were out of order on input is available from reorder_count().
  EventStream(std::vector<Event> events, int width, int height, Micros epoch = 0);

  std::span<const Event> events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Micros epoch() const noexcept { return epoch_; }
  std::size_t reorder_count() const noexcept { return reordered_; }

  /// Equality on geometry, epoch and events; the repair counter is ignored.
  friend bool operator==(const EventStream& a, const EventStream& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ &&
           a.epoch_ == b.epoch_ && a.events_ == b.events_;
  }

 private:
  std::vector<Event> events_;
  int width_ = 0;
  int height_ = 0;
  Micros epoch_ = 0;
  std::size_t reordered_ = 0;
};

enum class EventFormat { text, binary };

EventFormat parse_event_format(std::string_view name);

EventStream load_events(const std::filesystem::path& path, EventFormat format);
void save_events(const EventStream& stream, const std::filesystem::path& path,
                 EventFormat format);

/// Events with window.start() <= t < window.end(), order and epoch preserved.
EventStream slice_window(const EventStream& stream, const TimeWindow& window);

}  // namespace evtap
