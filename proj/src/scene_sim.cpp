#include "evtap/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "evtap/errors.hpp"
#include "evtap/io_util.hpp"
#include "evtap/kv_config.hpp"

namespace evtap {

namespace {

constexpr double kPi = std::numbers::pi;
// Relative slack on the threshold comparison so that a deviation that is an
// exact multiple of C (0.6 vs 3 * 0.2) fires the last event despite rounding.
constexpr double kThresholdSlack = 1e-9;

// C1 step from 0 (u <= -0.5) to 1 (u >= 0.5).
double smoothstep(double u) {
  double s = std::clamp(u + 0.5, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

Point2 unit(double deg) {
  const double r = deg * kPi / 180.0;
  return {std::cos(r), std::sin(r)};
}

Point2 edge_normal(const Scene& s) {
  if (s.normal_from_velocity && s.velocity.norm() > 0.0)
    return (1.0 / s.velocity.norm()) * s.velocity;
  return unit(s.normal_deg);
}

Point2 blob_center(const Scene& s, double t) {
  if (s.kind == SceneKind::sinusoidal_blob)
    return s.origin + (s.amplitude * std::sin(2.0 * kPi * s.frequency * t)) * unit(s.direction_deg);
  return s.origin + t * s.velocity;
}

double stick_angle(const Scene& s, double t) { return s.phase + s.omega * t; }

double distance_to_segment(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double u = len2 > 0.0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return distance(p, a + u * ab);
}

struct Box {
  int x0, y0, x1, y1;  // inclusive
  bool empty() const { return x1 < x0 || y1 < y0; }
};

Box object_box(const Scene& s, double t, int width, int height) {
  double cx = 0, cy = 0, half = 0;
  switch (s.kind) {
    case SceneKind::translating_edge:
      return {0, 0, width - 1, height - 1};
    case SceneKind::translating_blob:
    case SceneKind::sinusoidal_blob: {
      const Point2 c = blob_center(s, t);
      cx = c.x;
      cy = c.y;
      half = s.radius + 0.5 * s.rim + 1.0;
      break;
    }
    case SceneKind::rotating_stick:
      cx = s.origin.x;
      cy = s.origin.y;
      half = s.length + 0.5 * s.stick_width + 0.5 * s.rim + 1.0;
      break;
  }
  Box b{static_cast<int>(std::floor(cx - half)), static_cast<int>(std::floor(cy - half)),
        static_cast<int>(std::ceil(cx + half)), static_cast<int>(std::ceil(cy + half))};
  b.x0 = std::max(b.x0, 0);
  b.y0 = std::max(b.y0, 0);
  b.x1 = std::min(b.x1, width - 1);
  b.y1 = std::min(b.y1, height - 1);
  return b;
}

Box merge(Box a, Box b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

const char* to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::translating_edge: return "translating_edge";
    case SceneKind::translating_blob: return "translating_blob";
    case SceneKind::rotating_stick: return "rotating_stick";
    case SceneKind::sinusoidal_blob: return "sinusoidal_blob";
  }
  return "?";
}

SceneKind parse_scene_kind(std::string_view name) {
  for (auto k : {SceneKind::translating_edge, SceneKind::translating_blob,
                 SceneKind::rotating_stick, SceneKind::sinusoidal_blob})
    if (name == to_string(k)) return k;
  throw ConfigError("unknown scene kind '" + std::string(name) + "'");
}

double Scene::log_deviation(double x, double y, double t) const {
  const Point2 p{x, y};
  switch (kind) {
    case SceneKind::translating_edge: {
      const Point2 n = edge_normal(*this);
      const Point2 d = p - (origin + t * velocity);
      return contrast * (1.0 - smoothstep((d.x * n.x + d.y * n.y) / rim));
    }
    case SceneKind::translating_blob:
    case SceneKind::sinusoidal_blob:
      return contrast * (1.0 - smoothstep((distance(p, blob_center(*this, t)) - radius) / rim));
    case SceneKind::rotating_stick: {
      const double a = stick_angle(*this, t);
      const Point2 tip = origin + length * Point2{std::cos(a), std::sin(a)};
      const double d = distance_to_segment(p, origin, tip);
      return contrast * (1.0 - smoothstep((d - 0.5 * stick_width) / rim));
    }
  }
  return 0.0;
}

Point2 Scene::surface_point(int i, double t) const {
  const int n = std::max(query_count, 1);
  switch (kind) {
    case SceneKind::translating_edge: {
      const Point2 nrm = edge_normal(*this);
      const Point2 tangent{-nrm.y, nrm.x};
      const double s = (i - 0.5 * (n - 1)) * 8.0;
      return origin + s * tangent + t * velocity;
    }
    case SceneKind::translating_blob:
    case SceneKind::sinusoidal_blob: {
      Point2 offset{0.0, 0.0};
      if (i > 0) {
        const double phi = 2.0 * kPi * (i - 1) / std::max(n - 1, 1);
        offset = (0.6 * radius) * Point2{std::cos(phi), std::sin(phi)};
      }
      return blob_center(*this, t) + offset;
    }
    case SceneKind::rotating_stick: {
      const double r = length * (i + 1) / (n + 1);
      const double a = stick_angle(*this, t);
      return origin + r * Point2{std::cos(a), std::sin(a)};
    }
  }
  return origin;
}

void Scene::validate() const {
  require(std::isfinite(background) && background > 0.0,
          "scene intensity must be positive everywhere (background = " +
              std::to_string(background) + ")");
  require(std::isfinite(contrast), "contrast must be finite");
  require(std::isfinite(rim) && rim > 0.0, "rim must be > 0");
  require(origin.finite() && velocity.finite(), "origin and velocity must be finite");
  require(std::isfinite(normal_deg) && std::isfinite(omega) && std::isfinite(phase) &&
              std::isfinite(amplitude) && std::isfinite(frequency) &&
              std::isfinite(direction_deg),
          "motion parameters must be finite");
  require(std::isfinite(radius) && radius >= 1.0, "blob radius must be >= 1 px");
  require(std::isfinite(length) && length > 0.0, "stick length must be > 0");
  require(std::isfinite(stick_width) && stick_width > 0.0, "stick width must be > 0");
  require(query_count >= 1, "query count must be >= 1");
}

void SimConfig::validate() const {
  require(std::isfinite(contrast_threshold) && contrast_threshold > 0.0,
          "contrast threshold must be > 0");
  require(dt_us >= 1, "integration step must be >= 1 us");
  require(duration_us >= 1, "duration must be >= 1 us");
  require(width >= 1 && height >= 1 && width <= 65536 && height <= 65536,
          "sensor geometry must be within 1..65536");
  require(refractory_us >= 0, "refractory period must be >= 0");
  require(std::isfinite(noise_rate) && noise_rate >= 0.0, "noise rate must be >= 0");
  require(steps >= 2, "ground truth needs at least 2 steps");
  require(duration_us >= steps, "duration must cover at least one microsecond per step");
}

std::pair<EventStream, GroundTruth> simulate(const Scene& scene, const SimConfig& cfg) {
  scene.validate();
  cfg.validate();

  const int W = cfg.width;
  const int H = cfg.height;
  const double C = cfg.contrast_threshold;
  const double fire_at = C * (1.0 - kThresholdSlack);

  std::vector<double> level(static_cast<std::size_t>(W) * H);
  std::vector<double> reference(level.size());
  std::vector<Micros> last_emit(level.size(), -1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      level[i] = scene.log_deviation(x, y, 0.0);
      reference[i] = level[i];
    }

  std::vector<Event> events;
  Box prev_box = object_box(scene, 0.0, W, H);
  for (Micros t0 = 0; t0 < cfg.duration_us; t0 += cfg.dt_us) {
    const Micros t1 = std::min(t0 + cfg.dt_us, cfg.duration_us);
    const double t1_s = static_cast<double>(t1) * 1e-6;
    const Box next_box = object_box(scene, t1_s, W, H);
    const Box box = merge(prev_box, next_box);
    prev_box = next_box;
    if (box.empty()) continue;
    for (int y = box.y0; y <= box.y1; ++y) {
      for (int x = box.x0; x <= box.x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * W + x;
        const double d0 = level[i];
        const double d1 = scene.log_deviation(x, y, t1_s);
        double& ref = reference[i];
        while (std::abs(d1 - ref) >= fire_at) {
          const int p = d1 > ref ? 1 : -1;
          const double crossing = ref + p * C;
          double alpha = d1 != d0 ? (crossing - d0) / (d1 - d0) : 1.0;
          alpha = std::clamp(alpha, 0.0, 1.0);
          const Micros te = t0 + std::llround(alpha * static_cast<double>(t1 - t0));
          ref = crossing;
          if (last_emit[i] >= 0 && te - last_emit[i] < cfg.refractory_us) continue;
          last_emit[i] = te;
          events.push_back(Event{te, static_cast<std::uint16_t>(x),
                                 static_cast<std::uint16_t>(y), static_cast<std::int8_t>(p)});
        }
        level[i] = d1;
      }
    }
  }

  if (cfg.noise_rate > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::exponential_distribution<double> gap(cfg.noise_rate);
    std::bernoulli_distribution positive(0.5);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double t = 0.0;
        while (true) {
          t += gap(rng) * 1e6;
          if (t >= static_cast<double>(cfg.duration_us)) break;
          events.push_back(Event{static_cast<Micros>(t), static_cast<std::uint16_t>(x),
                                 static_cast<std::uint16_t>(y),
                                 static_cast<std::int8_t>(positive(rng) ? 1 : -1)});
        }
      }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });

  GroundTruth gt;
  const TimeWindow window = cfg.window();
  for (int k = 0; k < cfg.steps; ++k) gt.timestep_times.push_back(window.bin_end(k, cfg.steps));
  for (int q = 0; q < scene.query_count; ++q) {
    std::vector<Point2> traj;
    traj.reserve(cfg.steps);
    for (Micros t : gt.timestep_times)
      traj.push_back(scene.surface_point(q, static_cast<double>(t) * 1e-6));
    gt.query_points.push_back(traj.front());
    gt.trajectories.push_back(std::move(traj));
  }
  return {EventStream(std::move(events), W, H, 0), std::move(gt)};
}

std::vector<RateBin> event_rate_profile(const EventStream& stream, Point2 pivot, int n_bins,
                                        const RateProfileOptions& opts) {
  if (n_bins < 2) throw ConfigError("rate profile needs at least 2 bins");
  auto evs = stream.events();
  double r_max = opts.r_max;
  if (r_max <= opts.r_min) {
    r_max = opts.r_min;
    for (const Event& e : evs) r_max = std::max(r_max, distance({double(e.x), double(e.y)}, pivot));
  }
  std::vector<RateBin> bins(static_cast<std::size_t>(n_bins));
  const double width = (r_max - opts.r_min) / n_bins;
  for (int b = 0; b < n_bins; ++b) bins[b].radius = opts.r_min + (b + 0.5) * width;
  if (evs.empty() || width <= 0.0) return bins;

  Micros duration = opts.duration_us;
  if (duration <= 0) duration = evs.back().t - evs.front().t + 1;
  std::vector<std::size_t> counts(bins.size(), 0);
  for (const Event& e : evs) {
    const double r = distance({double(e.x), double(e.y)}, pivot);
    if (r < opts.r_min || r > r_max) continue;
    auto b = static_cast<std::size_t>((r - opts.r_min) / width);
    counts[std::min(b, counts.size() - 1)]++;
  }
  const double seconds = static_cast<double>(duration) * 1e-6;
  for (std::size_t b = 0; b < bins.size(); ++b)
    bins[b].rate = static_cast<double>(counts[b]) / (width * seconds);
  return bins;
}

std::pair<Scene, SimConfig> scenario_from_config(KvConfig& kv) {
  Scene s;
  s.kind = parse_scene_kind(kv.require_string("kind"));
  s.background = kv.get_double("background", s.background);
  s.contrast = kv.get_double("contrast", s.contrast);
  s.rim = kv.get_double("rim", s.rim);
  s.origin.x = kv.get_double("x0", s.origin.x);
  s.origin.y = kv.get_double("y0", s.origin.y);
  s.velocity.x = kv.get_double("vx", s.velocity.x);
  s.velocity.y = kv.get_double("vy", s.velocity.y);
  if (kv.has("normal_deg")) {
    s.normal_deg = kv.get_double("normal_deg", 0.0);
    s.normal_from_velocity = false;
  }
  s.radius = kv.get_double("radius", s.radius);
  s.length = kv.get_double("length", s.length);
  s.stick_width = kv.get_double("stick_width", s.stick_width);
  s.omega = kv.get_double("omega", s.omega);
  s.phase = kv.get_double("phase", s.phase);
  s.amplitude = kv.get_double("amplitude", s.amplitude);
  s.frequency = kv.get_double("frequency", s.frequency);
  s.direction_deg = kv.get_double("direction_deg", s.direction_deg);
  s.query_count = static_cast<int>(kv.get_int("queries", s.query_count));

  SimConfig c;
  c.width = static_cast<int>(kv.get_int("width", c.width));
  c.height = static_cast<int>(kv.get_int("height", c.height));
  c.duration_us = kv.get_int("duration_us", c.duration_us);
  c.dt_us = kv.get_int("dt_us", c.dt_us);
  c.contrast_threshold = kv.get_double("contrast_threshold", c.contrast_threshold);
  c.refractory_us = kv.get_int("refractory_us", c.refractory_us);
  c.noise_rate = kv.get_double("noise_rate", c.noise_rate);
  const long long seed = kv.get_int("seed", static_cast<long long>(c.seed));
  if (seed < 0) throw ConfigError("seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.steps = static_cast<int>(kv.get_int("steps", c.steps));
  kv.check_all_consumed();

  s.validate();
  c.validate();
  return {s, c};
}

std::pair<Scene, SimConfig> load_scenario(const std::filesystem::path& path) {
  KvConfig kv = KvConfig::load(path);
  return scenario_from_config(kv);
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  std::string out = "point_id,step,t_us,x,y\n";
  for (std::size_t q = 0; q < gt.trajectories.size(); ++q)
    for (std::size_t k = 0; k < gt.trajectories[q].size(); ++k) {
      const Point2 p = gt.trajectories[q][k];
      out += std::to_string(q) + ',' + std::to_string(k) + ',' +
             std::to_string(gt.timestep_times[k]) + ',' + io::fixed(p.x) + ',' +
             io::fixed(p.y) + '\n';
    }
  io::write_file_atomic(path, out);
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  auto rows = io::lines(text);
  if (rows.empty() || io::trim(rows[0]) != "point_id,step,t_us,x,y")
    throw ParseError("line 1: expected header 'point_id,step,t_us,x,y'", 1);
  GroundTruth gt;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t line = i + 1;
    if (io::trim(rows[i]).empty()) continue;
    auto f = io::split(rows[i]);
    if (f.size() != 5) throw ParseError("line " + std::to_string(line) + ": expected 5 fields", line);
    const long long id = io::parse_int(f[0], line);
    const long long step = io::parse_int(f[1], line);
    const long long t = io::parse_int(f[2], line);
    const Point2 p{io::parse_double(f[3], line), io::parse_double(f[4], line)};
    if (id != static_cast<long long>(gt.trajectories.size()) - 1) {
      if (id != static_cast<long long>(gt.trajectories.size()) || step != 0)
        throw ParseError("line " + std::to_string(line) + ": points must be listed in id order starting at step 0", line);
      gt.trajectories.emplace_back();
    }
    auto& traj = gt.trajectories.back();
    if (step != static_cast<long long>(traj.size()))
      throw ParseError("line " + std::to_string(line) + ": steps must be consecutive", line);
    if (id == 0) {
      gt.timestep_times.push_back(t);
    } else if (step >= static_cast<long long>(gt.timestep_times.size()) ||
               gt.timestep_times[step] != t) {
      throw ParseError("line " + std::to_string(line) + ": step times differ between points", line);
    }
    traj.push_back(p);
  }
  for (const auto& traj : gt.trajectories) {
    if (traj.size() != gt.timestep_times.size())
      throw ParseError("ground truth points have differing step counts", rows.size());
    gt.query_points.push_back(traj.front());
  }
  return gt;
}

}  // namespace evtap
