#include "evtap/time_surface.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evtap/errors.hpp"
#include "evtap/io_util.hpp"

namespace evtap {

TimeSurface::TimeSurface(int width, int height, TimeWindow window)
    : width_(width),
      height_(height),
      window_(window),
      pos_(static_cast<std::size_t>(width) * height, 0.0),
      neg_(pos_.size(), 0.0) {
  if (width <= 0 || height <= 0) throw ConfigError("time surface needs positive geometry");
}

TimeSurface TimeSurface::from_grids(int width, int height, TimeWindow window,
                                    std::vector<double> pos, std::vector<double> neg) {
  TimeSurface ts(width, height, window);
  if (pos.size() != ts.pos_.size() || neg.size() != ts.neg_.size())
    throw ConfigError("time surface grid size does not match geometry");
  auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!std::all_of(pos.begin(), pos.end(), in_range) ||
      !std::all_of(neg.begin(), neg.end(), in_range))
    throw ConfigError("time surface values must lie in [0, 1]");
  ts.pos_ = std::move(pos);
  ts.neg_ = std::move(neg);
  return ts;
}

TimeSurface encode_time_surface(const EventStream& stream, const TimeWindow& window) {
  TimeSurface ts(stream.width(), stream.height(), window);
  const double span = static_cast<double>(window.span());
  auto evs = stream.events();
  auto it = std::lower_bound(evs.begin(), evs.end(), window.start(),
                             [](const Event& e, Micros t) { return e.t < t; });
  for (; it != evs.end() && it->t < window.end(); ++it) {
    const double v = static_cast<double>(it->t - window.start()) / span;
    auto& grid = it->p > 0 ? ts.pos_ : ts.neg_;
    grid[static_cast<std::size_t>(it->y) * ts.width_ + it->x] = v;
  }
  return ts;
}

Representation encode_alternate(const EventStream& stream, const TimeWindow& window,
                                RepresentationKind kind, int bins) {
  Representation rep;
  rep.kind = kind;
  rep.width = stream.width();
  rep.height = stream.height();
  const std::size_t cells = static_cast<std::size_t>(rep.width) * rep.height;
  auto evs = stream.events();
  auto first = std::lower_bound(evs.begin(), evs.end(), window.start(),
                                [](const Event& e, Micros t) { return e.t < t; });
  auto last = std::lower_bound(first, evs.end(), window.end(),
                               [](const Event& e, Micros t) { return e.t < t; });

  switch (kind) {
    case RepresentationKind::event_image: {
      rep.channels.assign(2, std::vector<double>(cells, 0.0));
      for (auto it = first; it != last; ++it)
        rep.channels[it->p > 0 ? 0 : 1][static_cast<std::size_t>(it->y) * rep.width + it->x] += 1.0;
      return rep;
    }
    case RepresentationKind::voxel_grid: {
      if (bins < 1) throw ConfigError("voxel grid needs at least one bin");
      rep.channels.assign(static_cast<std::size_t>(bins), std::vector<double>(cells, 0.0));
      const double span = static_cast<double>(window.span());
      for (auto it = first; it != last; ++it) {
        const std::size_t cell = static_cast<std::size_t>(it->y) * rep.width + it->x;
        // Bin b is centered at (b + 0.5) / bins of the window.
        const double u = static_cast<double>(it->t - window.start()) / span * bins - 0.5;
        if (u <= 0.0) {
          rep.channels.front()[cell] += 1.0;
        } else if (u >= bins - 1) {
          rep.channels.back()[cell] += 1.0;
        } else {
          const int lo = static_cast<int>(std::floor(u));
          const double frac = u - lo;
          rep.channels[lo][cell] += 1.0 - frac;
          rep.channels[lo + 1][cell] += frac;
        }
      }
      return rep;
    }
    case RepresentationKind::time_surface: {
      TimeSurface ts = encode_time_surface(stream, window);
      rep.channels = {ts.grid(Polarity::positive), ts.grid(Polarity::negative)};
      return rep;
    }
  }
  throw ConfigError("unsupported representation kind");
}

SurfacePyramid::SurfacePyramid(const TimeSurface& ts, int max_level) {
  if (max_level < 0) throw ConfigError("pyramid level must be >= 0");
  levels_.push_back(Level{ts.width(), ts.height(),
                          {ts.grid(Polarity::positive), ts.grid(Polarity::negative)}});
  for (int l = 1; l <= max_level; ++l) {
    const Level& fine = levels_.back();
    Level coarse{(fine.width + 1) / 2, (fine.height + 1) / 2, {}};
    for (int c = 0; c < 2; ++c) {
      auto& out = coarse.data[c];
      out.assign(static_cast<std::size_t>(coarse.width) * coarse.height, 0.0);
      for (int y = 0; y < coarse.height; ++y)
        for (int x = 0; x < coarse.width; ++x) {
          double sum = 0.0;
          int n = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int fx = 2 * x + dx;
              const int fy = 2 * y + dy;
              if (fx >= fine.width || fy >= fine.height) continue;
              sum += fine.data[c][static_cast<std::size_t>(fy) * fine.width + fx];
              ++n;
            }
          out[static_cast<std::size_t>(y) * coarse.width + x] = sum / n;
        }
    }
    levels_.push_back(std::move(coarse));
  }
}

Patch SurfacePyramid::sample(Point2 center, int radius, int level) const {
  const Level& l = levels_.at(static_cast<std::size_t>(level));
  Patch patch;
  patch.radius = radius;
  const std::size_t cells = patch.cells();
  patch.values[0].assign(cells, 0.0);
  patch.values[1].assign(cells, 0.0);
  patch.mask.assign(cells, false);

  const double scale = std::ldexp(1.0, -level);
  const double cx = (center.x + 0.5) * scale - 0.5;
  const double cy = (center.y + 0.5) * scale - 0.5;
  const int side = patch.side();
  for (int j = 0; j < side; ++j) {
    const double v = cy + (j - radius);
    if (v < 0.0 || v > l.height - 1) continue;
    const int y0 = static_cast<int>(std::floor(v));
    const int y1 = std::min(y0 + 1, l.height - 1);
    const double fy = v - y0;
    for (int i = 0; i < side; ++i) {
      const double u = cx + (i - radius);
      if (u < 0.0 || u > l.width - 1) continue;
      const int x0 = static_cast<int>(std::floor(u));
      const int x1 = std::min(x0 + 1, l.width - 1);
      const double fx = u - x0;
      const std::size_t cell = static_cast<std::size_t>(j) * side + i;
      patch.mask[cell] = true;
      for (int c = 0; c < 2; ++c) {
        const auto& d = l.data[c];
        const double top = d[static_cast<std::size_t>(y0) * l.width + x0] * (1.0 - fx) +
                           (fx > 0.0 ? d[static_cast<std::size_t>(y0) * l.width + x1] * fx : 0.0);
        if (fy == 0.0) {
          patch.values[c][cell] = top;
          continue;
        }
        const double bottom = d[static_cast<std::size_t>(y1) * l.width + x0] * (1.0 - fx) +
                              (fx > 0.0 ? d[static_cast<std::size_t>(y1) * l.width + x1] * fx : 0.0);
        patch.values[c][cell] = top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return patch;
}

Patch sample_patch(const TimeSurface& ts, Point2 center, int radius, int scale) {
  if (!center.finite()) throw ConfigError("patch center must be finite");
  if (radius < 1) throw ConfigError("patch radius must be >= 1");
  if (scale < 0) throw ConfigError("patch scale must be >= 0");
  return SurfacePyramid(ts, scale).sample(center, radius, scale);
}

namespace {

void write_pgm16(const std::filesystem::path& path, int width, int height,
                 const std::vector<double>& grid) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  out.reserve(out.size() + grid.size() * 2);
  for (double v : grid) {
    const auto q = static_cast<unsigned>(std::lround(65535.0 * std::clamp(v, 0.0, 1.0)));
    out.push_back(static_cast<char>((q >> 8) & 0xFF));
    out.push_back(static_cast<char>(q & 0xFF));
  }
  io::write_file_atomic(path, out);
}

}  // namespace

void dump_time_surface(const TimeSurface& ts, const std::filesystem::path& prefix) {
  auto with_suffix = [&](const char* suffix) {
    auto p = prefix;
    p += suffix;
    return p;
  };
  write_pgm16(with_suffix("_pos.pgm"), ts.width(), ts.height(), ts.grid(Polarity::positive));
  write_pgm16(with_suffix("_neg.pgm"), ts.width(), ts.height(), ts.grid(Polarity::negative));
}

}  // namespace evtap
