#include "evtap/feature_match.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evtap/errors.hpp"
#include "evtap/io_util.hpp"

namespace evtap {

bool PatchPyramid::any_valid() const {
  return std::any_of(levels.begin(), levels.end(), [](const Patch& p) {
    return std::find(p.mask.begin(), p.mask.end(), true) != p.mask.end();
  });
}

PatchPyramid build_pyramid(const SurfacePyramid& surfaces, Point2 anchor,
                           const MatchParams& params) {
  if (!anchor.finite()) throw ConfigError("pyramid anchor must be finite");
  if (params.levels > surfaces.levels())
    throw ConfigError("surface pyramid has fewer levels than requested");
  PatchPyramid pyr;
  pyr.anchor = anchor;
  pyr.levels.reserve(static_cast<std::size_t>(params.levels));
  for (int l = 0; l < params.levels; ++l)
    pyr.levels.push_back(surfaces.sample(anchor, params.patch_radius, l));
  return pyr;
}

PatchPyramid build_pyramid(const TimeSurface& ts, Point2 anchor, const MatchParams& params) {
  return build_pyramid(SurfacePyramid(ts, params.levels - 1), anchor, params);
}

Descriptor pyramid_descriptor(const PatchPyramid& pyramid, const MatchParams& params) {
  Descriptor d;
  for (const Patch& p : pyramid.levels) {
    if (params.merge_polarities) {
      for (std::size_t i = 0; i < p.cells(); ++i) {
        d.values.push_back(p.mask[i] ? std::max(p.values[0][i], p.values[1][i]) : 0.0);
        d.mask.push_back(p.mask[i]);
      }
      continue;
    }
    for (int c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < p.cells(); ++i) {
        d.values.push_back(p.mask[i] ? p.values[c][i] : 0.0);
        d.mask.push_back(p.mask[i]);
      }
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < d.values.size(); ++i)
    if (d.mask[i]) {
      sum += d.values[i];
      ++n;
    }
  if (n == 0) return d;
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i)
    if (d.mask[i]) var += (d.values[i] - mean) * (d.values[i] - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (std::size_t i = 0; i < d.values.size(); ++i)
    d.values[i] = (d.mask[i] && sd > 1e-12) ? (d.values[i] - mean) / sd : 0.0;
  return d;
}

std::array<int, 3> offset_steps(int t) { return {0, std::max(t - 4, 0), std::max(t - 2, 0)}; }

Descriptor reference_descriptor(const PatchPyramid& step0, const PatchPyramid& back4,
                                const PatchPyramid& back2, const MatchParams& params) {
  Descriptor out;
  out.blocks = 3;
  const std::array<const PatchPyramid*, 3> parts{&step0, &back4, &back2};
  std::size_t block = 0;
  for (int b = 0; b < 3; ++b) {
    Descriptor d = pyramid_descriptor(*parts[b], params);
    if (b == 0) block = d.values.size();
    if (d.values.size() != block) throw ConfigError("reference pyramids differ in shape");
    for (double& v : d.values) v *= params.offset_weights[b];
    out.values.insert(out.values.end(), d.values.begin(), d.values.end());
    out.mask.insert(out.mask.end(), d.mask.begin(), d.mask.end());
  }
  return out;
}

Descriptor reference_descriptor(std::span<const PatchPyramid> by_step, int t,
                                const MatchParams& params) {
  const auto steps = offset_steps(t);
  return reference_descriptor(by_step[steps[0]], by_step[steps[1]], by_step[steps[2]], params);
}

double masked_cosine(const Descriptor& reference, const Descriptor& candidate) {
  const std::size_t n = candidate.values.size();
  if (n == 0 || reference.values.size() != n * static_cast<std::size_t>(reference.blocks))
    throw ConfigError("descriptor sizes do not match");
  double dot = 0.0, rr = 0.0, cc = 0.0;
  for (int b = 0; b < reference.blocks; ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!reference.mask[base + i] || !candidate.mask[i]) continue;
      const double r = reference.values[base + i];
      const double c = candidate.values[i];
      dot += r * c;
      rr += r * r;
      cc += c * c;
    }
  }
  if (rr <= 0.0 || cc <= 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(rr) * std::sqrt(cc)), -1.0, 1.0);
}

double CorrelationMap::peak() const {
  return scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
}

CorrelationMap correlate(const Descriptor& reference, const SurfacePyramid& surface,
                         Point2 prior, const KinematicVector& guide, double dt, int radius,
                         const MatchParams& params, int stride) {
  if (radius < 1) throw ConfigError("search radius must be >= 1");
  if (stride < 1) throw ConfigError("search stride must be >= 1");
  CorrelationMap map;
  map.radius = radius;
  map.stride = stride;
  map.guided_center = prior + (guide.weight * dt) * guide.v;
  map.scores.assign(static_cast<std::size_t>(map.side()) * map.side(), 0.0);
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const Point2 at = map.guided_center + Point2{double(dx * stride), double(dy * stride)};
      const PatchPyramid cand = build_pyramid(surface, at, params);
      map.scores[static_cast<std::size_t>(dy + radius) * map.side() + dx + radius] =
          masked_cosine(reference, pyramid_descriptor(cand, params));
    }
  return map;
}

CorrelationMap correlate(const Descriptor& reference, const TimeSurface& surface, Point2 prior,
                         const KinematicVector& guide, double dt, int radius,
                         const MatchParams& params) {
  return correlate(reference, SurfacePyramid(surface, params.levels - 1), prior, guide, dt,
                   radius, params, 1);
}

Point2 soft_argmax(const CorrelationMap& map, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("soft-argmax temperature must be > 0");
  const int R = map.radius;
  const int side = map.side();
  const double top = map.peak();
  std::vector<double> w(map.scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp((map.scores[i] - top) / temperature);
    z += w[i];
  }
  // Pair cell (dx, dy) with (-dx, -dy); the center cell contributes nothing.
  double sx = 0.0, sy = 0.0;
  const std::size_t half = w.size() / 2;
  for (std::size_t i = half + 1; i < w.size(); ++i) {
    const int dy = static_cast<int>(i) / side - R;
    const int dx = static_cast<int>(i) % side - R;
    const double diff = w[i] - w[w.size() - 1 - i];
    sx += diff * dx;
    sy += diff * dy;
  }
  return {map.stride * sx / z, map.stride * sy / z};
}

void save_correlation_csv(const CorrelationMap& map, const std::filesystem::path& path) {
  std::string out = "# guided_center=" + io::fixed(map.guided_center.x) + "," +
                    io::fixed(map.guided_center.y) + " radius=" + std::to_string(map.radius) +
                    " stride=" + std::to_string(map.stride) + "\n";
  for (int dy = -map.radius; dy <= map.radius; ++dy) {
    for (int dx = -map.radius; dx <= map.radius; ++dx) {
      if (dx > -map.radius) out += ',';
      out += io::fixed(map.at(dx, dy));
    }
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

}  // namespace evtap
