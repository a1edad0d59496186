#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "evtap/geometry.hpp"
#include "evtap/motion_guidance.hpp"
#include "evtap/time_surface.hpp"

namespace evtap {

struct MatchParams {
  int patch_radius = 3;
  int levels = 3;  // pyramid scales 0 .. levels-1
  /// Weights of the step-0, t-4 and t-2 pyramids in the reference descriptor.
  std::array<double, 3> offset_weights{0.5, 0.25, 0.25};
  /// Describe each cell by its fresher polarity instead of both channels.
  bool merge_polarities = true;
};

/// One patch per scale, all with the same (2r+1)^2 grid.
struct PatchPyramid {
  std::vector<Patch> levels;
  Point2 anchor;

  bool any_valid() const;
};

PatchPyramid build_pyramid(const SurfacePyramid& surfaces, Point2 anchor,
                           const MatchParams& params = {});
PatchPyramid build_pyramid(const TimeSurface& ts, Point2 anchor, const MatchParams& params = {});

/// Flattened, masked feature vector. A reference descriptor holds
/// `blocks` consecutive sub-vectors of equal length; a candidate holds one.
struct Descriptor {
  std::vector<double> values;
  std::vector<bool> mask;
  int blocks = 1;

  std::size_t block_size() const { return values.size() / static_cast<std::size_t>(blocks); }
};

/// Flattens a pyramid (level, channel, cell order) and mean-variance
/// normalizes it over valid cells. Invalid cells hold 0.
Descriptor pyramid_descriptor(const PatchPyramid& pyramid, const MatchParams& params = {});

/// Steps {0, t-4, t-2}, each clamped at 0.
std::array<int, 3> offset_steps(int t);

/// Concatenates the normalized step-0, t-4 and t-2 descriptors scaled by
/// the offset weights.
Descriptor reference_descriptor(const PatchPyramid& step0, const PatchPyramid& back4,
                                const PatchPyramid& back2, const MatchParams& params = {});

/// Same, looking the offsets up in `by_step` for step t with the clamp rule.
Descriptor reference_descriptor(std::span<const PatchPyramid> by_step, int t,
                                const MatchParams& params = {});

/// Masked cosine similarity between a reference (any block count) and a
/// single-block candidate tiled to match. Cells invalid on either side are
/// excluded; an empty overlap or a zero vector scores 0.
double masked_cosine(const Descriptor& reference, const Descriptor& candidate);

struct CorrelationMap {
  int radius = 0;
  int stride = 1;  // level-0 pixels per grid unit
  Point2 guided_center;
  std::vector<double> scores;  // row-major over dy, then dx, both in [-R, R]

  int side() const { return 2 * radius + 1; }
  double at(int dx, int dy) const {
    return scores[static_cast<std::size_t>(dy + radius) * side() + dx + radius];
  }
  double peak() const;
};

/// Scores candidates at guided_center + stride * d for d in [-R, R]^2, where
/// guided_center = prior + guide.weight * guide.v * dt.
CorrelationMap correlate(const Descriptor& reference, const SurfacePyramid& surface,
                         Point2 prior, const KinematicVector& guide, double dt, int radius,
                         const MatchParams& params = {}, int stride = 1);
CorrelationMap correlate(const Descriptor& reference, const TimeSurface& surface, Point2 prior,
                         const KinematicVector& guide, double dt, int radius,
                         const MatchParams& params = {});

/// Softmax(score / temperature)-weighted mean displacement, in level-0
/// pixels. Symmetric cells are accumulated in pairs so that a centrally
/// symmetric map returns exactly (0, 0).
Point2 soft_argmax(const CorrelationMap& map, double temperature);

void save_correlation_csv(const CorrelationMap& map, const std::filesystem::path& path);

}  // namespace evtap
