#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evtap/event_core.hpp"
#include "evtap/feature_match.hpp"
#include "evtap/geometry.hpp"
#include "evtap/motion_guidance.hpp"
#include "evtap/time_surface.hpp"

namespace evtap {

class KvConfig;

enum class OutOfFramePolicy { clamp, freeze };

struct TrackConfig {
  int iterations = 6;  // K
  int steps = 48;      // T
  int search_radius = 4;
  /// Coarse-to-fine search passes per step, at strides 2^(n-1) .. 1.
  int search_scales = 1;
  /// Extra stride-1 passes, each centered on the previous estimate.
  int refine_passes = 1;
  double temperature = 0.05;
  OutOfFramePolicy policy = OutOfFramePolicy::freeze;
  /// When false every kinematic weight is forced to 0 (appearance only).
  bool use_guidance = true;
  GuidanceParams guidance;  // v_max defaults to 4 * search_radius
  MatchParams match;

  void validate() const;
};

/// Largest correction an iteration applies on top of the guided center:
/// R * 2^(levels - 1) level-0 pixels.
double max_update(const TrackConfig& cfg);

/// Applies `key=value` overrides (iterations, steps, search_radius, ...).
/// Unknown keys are rejected.
void apply_track_overrides(TrackConfig& cfg, KvConfig& kv);

struct TrackState {
  Point2 query;
  std::vector<Point2> coords;
  std::vector<KinematicVector> kinematics;
  std::vector<double> peak_scores;
  std::vector<bool> in_frame;
  std::vector<bool> frozen;
  int iteration = 0;
  int width = 0;
  int height = 0;
};

/// All steps start at the query; kinematics are zero with weight 0. Throws
/// ConfigError if the query is outside the frame or T < 2.
TrackState init_state(Point2 query, int steps, int width, int height);

/// Per-step time surfaces for a window split into T equal bins, plus their
/// pooled pyramids.
struct SequenceSurfaces {
  std::vector<TimeSurface> surfaces;
  std::vector<SurfacePyramid> pyramids;
  std::vector<Micros> step_times;  // upper bin boundaries
  int empty_bins = 0;

  int steps() const { return static_cast<int>(surfaces.size()); }
};

SequenceSurfaces prepare_surfaces(const EventStream& stream, const TimeWindow& window,
                                  const TrackConfig& cfg);
SequenceSurfaces prepare_surfaces(std::vector<TimeSurface> surfaces, const TrackConfig& cfg);

/// One refinement pass. Kinematics are estimated at the current coordinates
/// and smoothed over time; then, for t = 1 .. T-1 in order, the search window
/// is placed at the freshly updated coords[t-1] advanced by the weighted
/// kinematic vector, correlated against the {0, t-4, t-2} reference and
/// shifted by the soft-argmax displacement. coords[0] stays at the query.
TrackState iterate(const TrackState& state, const SequenceSurfaces& seq, const TrackConfig& cfg);
TrackState iterate(const TrackState& state, std::span<const TimeSurface> surfaces,
                   const TrackConfig& cfg);

enum class StepStatus { ok, frozen, warned };
const char* to_string(StepStatus s);

struct Trajectory {
  int point_id = 0;
  std::vector<Point2> coords;
  std::vector<double> confidence;
  std::vector<Micros> times;
  std::vector<StepStatus> status;
  bool warned = false;  // at least half of the bins held no events

  int steps() const { return static_cast<int>(coords.size()); }
};

Trajectory make_trajectory(const TrackState& state, const SequenceSurfaces& seq, int point_id);

Trajectory track(Point2 query, const EventStream& stream, const TimeWindow& window,
                 const TrackConfig& cfg, int point_id = 0);
Trajectory track(Point2 query, const SequenceSurfaces& seq, const TrackConfig& cfg,
                 int point_id = 0);

struct TrackResult {
  int point_id = 0;
  std::optional<Trajectory> trajectory;
  std::string error;  // set when trajectory is empty
};

struct Query {
  int point_id = 0;
  Point2 position;
};

/// Independent per-point tracking. `threads` <= 1 runs sequentially; results
/// do not depend on the thread count.
std::vector<TrackResult> track_batch(std::span<const Query> queries, const EventStream& stream,
                                     const TimeWindow& window, const TrackConfig& cfg,
                                     int threads = 1);

/// `point_id,step,t_us,x,y,confidence,status`. A zero-byte file loads as empty.
void save_trajectories(std::span<const Trajectory> trajectories, const std::filesystem::path& path);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

/// `point_id,x,y`.
std::vector<Query> load_queries(const std::filesystem::path& path);
void save_queries(std::span<const Query> queries, const std::filesystem::path& path);

}  // namespace evtap
