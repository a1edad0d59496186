#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <utility>
#include <vector>

#include "evtap/event_core.hpp"
#include "evtap/geometry.hpp"

namespace evtap {

class KvConfig;

enum class SceneKind { translating_edge, translating_blob, rotating_stick, sinusoidal_blob };

const char* to_string(SceneKind kind);
SceneKind parse_scene_kind(std::string_view name);

/// Analytic intensity scene. Intensity is background * exp(D(x, y, t)) where
/// D is the object's log-intensity deviation: `contrast` on the object,
/// 0 off it, with a C1 smoothstep transition `rim` pixels wide.
struct Scene {
  SceneKind kind = SceneKind::translating_blob;

  double background = 1.0;  // linear intensity, must be > 0
  double contrast = 1.0;    // log-intensity step of the object over background
  double rim = 2.0;         // transition width, px

  // Blob center, a point on the edge line, or the stick pivot.
  Point2 origin{80.0, 60.0};

  // translating_edge / translating_blob, px/s.
  Point2 velocity{0.0, 0.0};
  // translating_edge: edge normal; defaults to the velocity direction.
  double normal_deg = 0.0;
  bool normal_from_velocity = true;

  // translating_blob / sinusoidal_blob.
  double radius = 5.0;

  // rotating_stick.
  double length = 40.0;
  double stick_width = 3.0;
  double omega = 2.0 * std::numbers::pi;  // rad/s
  double phase = 0.0;                     // rad

  // sinusoidal_blob: origin + amplitude * sin(2 pi f t) * direction.
  double amplitude = 30.0;
  double frequency = 0.5;
  double direction_deg = 0.0;

  int query_count = 5;

  /// Log-intensity deviation from background at (x, y), time in seconds.
  double log_deviation(double x, double y, double t) const;
  /// Position of ground-truth surface point `i` at time `t` (seconds).
  Point2 surface_point(int i, double t) const;

  /// Throws ConfigError if the scene is invalid (non-positive intensity,
  /// non-finite parameters, blob radius < 1, ...).
  void validate() const;
};

struct SimConfig {
  double contrast_threshold = 0.2;
  Micros dt_us = 500;
  Micros duration_us = 1'000'000;
  int width = 160;
  int height = 120;
  Micros refractory_us = 0;
  double noise_rate = 0.0;  // events per pixel per second
  std::uint64_t seed = 1;
  int steps = 48;  // ground-truth timesteps

  void validate() const;
  TimeWindow window() const { return TimeWindow(0, duration_us); }
};

struct GroundTruth {
  std::vector<Point2> query_points;
  std::vector<std::vector<Point2>> trajectories;  // [point][step]
  std::vector<Micros> timestep_times;

  int steps() const { return static_cast<int>(timestep_times.size()); }
};

/// Idealized DVS simulation. Per pixel a reference log level is kept; while
/// the current level differs from it by at least C an event is emitted with
/// the timestamp linearly interpolated to the crossing inside the substep, and
/// the reference advances by exactly p*C. Ground truth is sampled at the upper
/// boundary of each of `cfg.steps` equal bins over [0, duration).
std::pair<EventStream, GroundTruth> simulate(const Scene& scene, const SimConfig& cfg);

struct RateBin {
  double radius = 0.0;  // annulus mid-radius, px
  double rate = 0.0;    // events per second per px of radius
};

struct RateProfileOptions {
  double r_min = 0.0;
  double r_max = 0.0;       // <= r_min: use the farthest event
  Micros duration_us = 0;   // <= 0: use the stream's time extent
};

/// Bins events into equal-width annuli around `pivot`. Rates are normalized
/// per second and per unit radius, i.e. per unit length along a radial line.
std::vector<RateBin> event_rate_profile(const EventStream& stream, Point2 pivot, int n_bins,
                                        const RateProfileOptions& opts = {});

/// Reads scene and simulation keys from a flat key=value config. Unknown
/// keys are rejected.
std::pair<Scene, SimConfig> scenario_from_config(KvConfig& cfg);
std::pair<Scene, SimConfig> load_scenario(const std::filesystem::path& path);

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace evtap
