#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "evtap/event_core.hpp"
#include "evtap/geometry.hpp"

namespace evtap {

enum class Polarity { positive = 0, negative = 1 };

/// Two-channel map of the most recent event time per pixel, normalized to
/// [0, 1] over the encoding window. 0 means "no event of that polarity".
class TimeSurface {
 public:
  TimeSurface(int width, int height, TimeWindow window);

  /// Builds a surface from row-major grids; throws ConfigError on size
  /// mismatch or values outside [0, 1].
  static TimeSurface from_grids(int width, int height, TimeWindow window,
                                std::vector<double> pos, std::vector<double> neg);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const TimeWindow& window() const noexcept { return window_; }

  double at(Polarity c, int x, int y) const {
    return grid(c)[static_cast<std::size_t>(y) * width_ + x];
  }
  double pos(int x, int y) const { return at(Polarity::positive, x, y); }
  double neg(int x, int y) const { return at(Polarity::negative, x, y); }
  /// The fresher of the two channels.
  double latest(int x, int y) const { return std::max(pos(x, y), neg(x, y)); }

  const std::vector<double>& grid(Polarity c) const {
    return c == Polarity::positive ? pos_ : neg_;
  }

  friend bool operator==(const TimeSurface&, const TimeSurface&) = default;

 private:
  friend TimeSurface encode_time_surface(const EventStream&, const TimeWindow&);

  int width_;
  int height_;
  TimeWindow window_;
  std::vector<double> pos_;
  std::vector<double> neg_;
};

/// Stores (t_last - start) / span of the most recent event of each polarity
/// in the window. Events outside the window are ignored.
TimeSurface encode_time_surface(const EventStream& stream, const TimeWindow& window);

enum class RepresentationKind { event_image, voxel_grid, time_surface };

struct Representation {
  RepresentationKind kind = RepresentationKind::event_image;
  int width = 0;
  int height = 0;
  /// event_image / time_surface: 2 channels (positive, negative);
  /// voxel_grid: one channel per temporal bin. Each row-major.
  std::vector<std::vector<double>> channels;
};

/// Alternate encodings used for comparing input representations.
/// event_image: per-polarity event counts. voxel_grid: unsigned counts spread
/// linearly over the two nearest temporal bin centers (`bins` >= 1).
Representation encode_alternate(const EventStream& stream, const TimeWindow& window,
                                RepresentationKind kind, int bins = 1);

/// A (2r+1) x (2r+1) x 2 sample grid plus validity mask.
struct Patch {
  int radius = 0;
  std::array<std::vector<double>, 2> values;  // [channel][row-major cell]
  std::vector<bool> mask;                      // per cell, shared by channels

  int side() const { return 2 * radius + 1; }
  std::size_t cells() const { return static_cast<std::size_t>(side()) * side(); }
  double value(Polarity c, int dx, int dy) const {
    return values[static_cast<int>(c)][static_cast<std::size_t>(dy + radius) * side() + dx + radius];
  }
  bool valid(int dx, int dy) const {
    return mask[static_cast<std::size_t>(dy + radius) * side() + dx + radius];
  }
};

/// 2x average-pooled copies of a surface. Level 0 is the surface itself.
class SurfacePyramid {
 public:
  SurfacePyramid(const TimeSurface& ts, int max_level);

  int levels() const { return static_cast<int>(levels_.size()); }
  int level_width(int level) const { return levels_[level].width; }
  int level_height(int level) const { return levels_[level].height; }
  double at(int level, Polarity c, int x, int y) const {
    const auto& l = levels_[level];
    return l.data[static_cast<int>(c)][static_cast<std::size_t>(y) * l.width + x];
  }

  /// Bilinear samples on a unit grid of the given level, centered on
  /// `center` expressed in level-0 pixels. Samples outside the level's
  /// pixel-center hull are 0 and masked invalid.
  Patch sample(Point2 center, int radius, int level) const;

 private:
  struct Level {
    int width;
    int height;
    std::array<std::vector<double>, 2> data;
  };
  std::vector<Level> levels_;
};

/// Samples a patch from `ts` downscaled by 2^scale. Throws ConfigError for a
/// non-finite center, radius < 1, or scale < 0.
Patch sample_patch(const TimeSurface& ts, Point2 center, int radius, int scale);

/// Writes `<prefix>_pos.pgm` and `<prefix>_neg.pgm`, 16-bit binary PGM with
/// value round(65535 * v).
void dump_time_surface(const TimeSurface& ts, const std::filesystem::path& prefix);

}  // namespace evtap
