#include "evtap/event_core.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <string>

#include "evtap/errors.hpp"
#include "evtap/io_util.hpp"

namespace evtap {

TimeWindow::TimeWindow(Micros start, Micros end) : start_(start), end_(end) {
  if (end <= start)
    throw ConfigError("time window must satisfy end > start (got [" +
                      std::to_string(start) + ", " + std::to_string(end) + "))");
}

Micros TimeWindow::bin_end(int k, int n) const {
  return start_ + static_cast<Micros>((static_cast<__int128>(k + 1) * span()) / n);
}

TimeWindow TimeWindow::bin(int k, int n) const {
  Micros lo = start_ + static_cast<Micros>((static_cast<__int128>(k) * span()) / n);
  return TimeWindow(lo, bin_end(k, n));
}

EventStream::EventStream(std::vector<Event> events, int width, int height, Micros epoch)
    : events_(std::move(events)), width_(width), height_(height), epoch_(epoch) {
  if (width <= 0 || height <= 0 || width > 65536 || height > 65536)
    throw ValidationError("sensor geometry must be within 1..65536 pixels", 0);
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    if (e.p != 1 && e.p != -1)
      throw ValidationError("record " + std::to_string(i) + ": polarity must be +1 or -1", i);
    if (e.t < 0)
      throw ValidationError("record " + std::to_string(i) + ": negative timestamp", i);
    if (e.x >= width || e.y >= height)
      throw ValidationError("record " + std::to_string(i) + ": (" + std::to_string(e.x) +
                                "," + std::to_string(e.y) + ") outside " +
                                std::to_string(width) + "x" + std::to_string(height),
                            i);
    if (i > 0 && e.t < events_[i - 1].t) ++reordered_;
  }
  if (reordered_ > 0)
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
}

EventFormat parse_event_format(std::string_view name) {
  if (name == "text") return EventFormat::text;
  if (name == "binary") return EventFormat::binary;
  throw ConfigError("unknown event format '" + std::string(name) + "' (text|binary)");
}

namespace {

constexpr std::array<char, 4> kMagic{'E', 'V', 'T', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8 + 8;
constexpr std::size_t kRecordBytes = 16;

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view in, std::size_t at) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return static_cast<T>(u);
}

std::string encode_binary(const EventStream& s) {
  std::string out;
  out.reserve(kHeaderBytes + kRecordBytes * s.size());
  out.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.width()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.height()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(s.epoch()));
  put_le<std::uint64_t>(out, s.size());
  for (const Event& e : s.events()) {
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(e.t));
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    put_le<std::int8_t>(out, e.p);
    out.append(3, '\0');
  }
  return out;
}

EventStream decode_binary(std::string_view in) {
  if (in.size() < kHeaderBytes)
    throw ParseError("binary event file truncated in header (" + std::to_string(in.size()) +
                         " bytes)",
                     in.size());
  if (std::memcmp(in.data(), kMagic.data(), kMagic.size()) != 0)
    throw ParseError("bad magic at byte 0, expected 'EVT1'", 0);
  auto width = get_le<std::uint32_t>(in, 4);
  auto height = get_le<std::uint32_t>(in, 8);
  auto epoch = get_le<std::uint64_t>(in, 12);
  auto count = get_le<std::uint64_t>(in, 20);
  if (width == 0 || height == 0 || width > 65536 || height > 65536)
    throw ParseError("invalid sensor geometry in header", 4);
  const std::size_t payload = in.size() - kHeaderBytes;
  if (count > payload / kRecordBytes || payload != count * kRecordBytes) {
    std::size_t at = kHeaderBytes + std::min<std::size_t>(payload / kRecordBytes, count) * kRecordBytes;
    throw ParseError("record payload of " + std::to_string(payload) + " bytes does not match count " +
                         std::to_string(count) + " (byte " + std::to_string(at) + ")",
                     at);
  }
  std::vector<Event> events;
  events.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = kHeaderBytes + i * kRecordBytes;
    auto t = get_le<std::uint64_t>(in, at);
    if (t > static_cast<std::uint64_t>(INT64_MAX))
      throw ParseError("timestamp overflow at byte " + std::to_string(at), at);
    Event e;
    e.t = static_cast<Micros>(t);
    e.x = get_le<std::uint16_t>(in, at + 8);
    e.y = get_le<std::uint16_t>(in, at + 10);
    e.p = get_le<std::int8_t>(in, at + 12);
    if (in[at + 13] != 0 || in[at + 14] != 0 || in[at + 15] != 0)
      throw ParseError("nonzero pad bytes at byte " + std::to_string(at + 13), at + 13);
    events.push_back(e);
  }
  return EventStream(std::move(events), static_cast<int>(width), static_cast<int>(height),
                     static_cast<Micros>(epoch));
}

std::string encode_text(const EventStream& s) {
  std::string out = "# evtap v1 width=" + std::to_string(s.width()) +
                    " height=" + std::to_string(s.height()) +
                    " epoch=" + std::to_string(s.epoch()) + "\n";
  out.reserve(out.size() + 24 * s.size());
  for (const Event& e : s.events()) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += e.p > 0 ? ",1\n" : ",-1\n";
  }
  return out;
}

long long header_field(std::string_view header, std::string_view key) {
  for (auto tok : io::split(header, ' ')) {
    if (tok.size() > key.size() && tok.substr(0, key.size()) == key &&
        tok[key.size()] == '=')
      return io::parse_int(tok.substr(key.size() + 1), 1);
  }
  throw ParseError("line 1: header missing '" + std::string(key) + "='", 1);
}

EventStream decode_text(std::string_view in) {
  auto rows = io::lines(in);
  if (rows.empty() || rows[0].substr(0, 11) != "# evtap v1 ")
    throw ParseError("line 1: expected header '# evtap v1 width=<W> height=<H> epoch=<E>'", 1);
  const long long width = header_field(rows[0], "width");
  const long long height = header_field(rows[0], "height");
  const long long epoch = header_field(rows[0], "epoch");
  if (width <= 0 || height <= 0 || width > 65536 || height > 65536)
    throw ParseError("line 1: invalid sensor geometry", 1);
  if (epoch < 0) throw ParseError("line 1: negative epoch", 1);

  std::vector<Event> events;
  events.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t line = i + 1;
    auto fields = io::split(rows[i]);
    if (fields.size() != 4)
      throw ParseError("line " + std::to_string(line) + ": expected 't,x,y,p'", line);
    const long long t = io::parse_int(fields[0], line);
    const long long x = io::parse_int(fields[1], line);
    const long long y = io::parse_int(fields[2], line);
    const long long p = io::parse_int(fields[3], line);
    const std::size_t index = events.size();
    if (p != 1 && p != -1)
      throw ValidationError("record " + std::to_string(index) + " (line " +
                                std::to_string(line) + "): polarity must be 1 or -1",
                            index);
    if (t < 0)
      throw ValidationError("record " + std::to_string(index) + ": negative timestamp", index);
    if (x < 0 || y < 0 || x >= width || y >= height)
      throw ValidationError("record " + std::to_string(index) + " (line " +
                                std::to_string(line) + "): (" + std::to_string(x) + "," +
                                std::to_string(y) + ") outside " + std::to_string(width) +
                                "x" + std::to_string(height),
                            index);
    events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                           static_cast<std::int8_t>(p)});
  }
  return EventStream(std::move(events), static_cast<int>(width), static_cast<int>(height), epoch);
}

}  // namespace

EventStream load_events(const std::filesystem::path& path, EventFormat format) {
  const std::string bytes = io::read_file(path);
  return format == EventFormat::binary ? decode_binary(bytes) : decode_text(bytes);
}

void save_events(const EventStream& stream, const std::filesystem::path& path,
                 EventFormat format) {
  io::write_file_atomic(path, format == EventFormat::binary ? encode_binary(stream)
                                                            : encode_text(stream));
}

EventStream slice_window(const EventStream& stream, const TimeWindow& window) {
  auto evs = stream.events();
  auto lo = std::lower_bound(evs.begin(), evs.end(), window.start(),
                             [](const Event& e, Micros t) { return e.t < t; });
  auto hi = std::lower_bound(lo, evs.end(), window.end(),
                             [](const Event& e, Micros t) { return e.t < t; });
  return EventStream(std::vector<Event>(lo, hi), stream.width(), stream.height(),
                     stream.epoch());
}

}  // namespace evtap
