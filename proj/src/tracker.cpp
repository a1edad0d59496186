#include "evtap/tracker.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "evtap/errors.hpp"
#include "evtap/io_util.hpp"
#include "evtap/kv_config.hpp"

namespace evtap {

void TrackConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations (K) must be >= 1");
  if (steps < 2) throw ConfigError("steps (T) must be >= 2");
  if (search_radius < 1) throw ConfigError("search radius must be >= 1");
  if (search_scales < 1 || search_scales > match.levels)
    throw ConfigError("search scales must be within 1 .. pyramid levels");
  if (refine_passes < 0) throw ConfigError("refine passes must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (guidance.fit_radius < 2) throw ConfigError("fit radius must be >= 2");
  if (!(guidance.eps >= 0.0)) throw ConfigError("eps must be >= 0");
  if (!(guidance.v_max > 0.0)) throw ConfigError("v_max must be > 0");
  if (match.patch_radius < 1) throw ConfigError("patch radius must be >= 1");
  if (match.levels < 1) throw ConfigError("pyramid levels must be >= 1");
}

void apply_track_overrides(TrackConfig& cfg, KvConfig& kv) {
  const bool radius_given = kv.has("search_radius");
  cfg.iterations = static_cast<int>(kv.get_int("iterations", cfg.iterations));
  cfg.steps = static_cast<int>(kv.get_int("steps", cfg.steps));
  cfg.search_radius = static_cast<int>(kv.get_int("search_radius", cfg.search_radius));
  cfg.search_scales = static_cast<int>(kv.get_int("search_scales", cfg.search_scales));
  cfg.refine_passes = static_cast<int>(kv.get_int("refine_passes", cfg.refine_passes));
  cfg.temperature = kv.get_double("temperature", cfg.temperature);
  const std::string policy = kv.get_string("policy", cfg.policy == OutOfFramePolicy::freeze ? "freeze" : "clamp");
  if (policy == "freeze") cfg.policy = OutOfFramePolicy::freeze;
  else if (policy == "clamp") cfg.policy = OutOfFramePolicy::clamp;
  else throw ConfigError("policy must be 'freeze' or 'clamp'");
  cfg.use_guidance = kv.get_bool("guidance", cfg.use_guidance);
  cfg.guidance.fit_radius = static_cast<int>(kv.get_int("fit_radius", cfg.guidance.fit_radius));
  cfg.guidance.eps = kv.get_double("eps", cfg.guidance.eps);
  if (radius_given && !kv.has("v_max")) cfg.guidance.v_max = 4.0 * cfg.search_radius;
  cfg.guidance.v_max = kv.get_double("v_max", cfg.guidance.v_max);
  cfg.guidance.residual_scale = kv.get_double("residual_scale", cfg.guidance.residual_scale);
  cfg.guidance.smoothing_half_width =
      static_cast<int>(kv.get_int("smoothing_half_width", cfg.guidance.smoothing_half_width));
  cfg.match.patch_radius = static_cast<int>(kv.get_int("patch_radius", cfg.match.patch_radius));
  cfg.match.levels = static_cast<int>(kv.get_int("levels", cfg.match.levels));
  cfg.match.merge_polarities = kv.get_bool("merge_polarities", cfg.match.merge_polarities);
  cfg.match.offset_weights[0] = kv.get_double("w0", cfg.match.offset_weights[0]);
  cfg.match.offset_weights[1] = kv.get_double("w4", cfg.match.offset_weights[1]);
  cfg.match.offset_weights[2] = kv.get_double("w2", cfg.match.offset_weights[2]);
  kv.check_all_consumed();
  cfg.validate();
}

double max_update(const TrackConfig& cfg) {
  return cfg.search_radius * static_cast<double>(1 << (cfg.match.levels - 1));
}

TrackState init_state(Point2 query, int steps, int width, int height) {
  if (steps < 2) throw ConfigError("steps (T) must be >= 2");
  if (!query.finite() || !in_frame(query, width, height))
    throw ConfigError("query (" + io::fixed(query.x, 3) + ", " + io::fixed(query.y, 3) +
                      ") is outside the " + std::to_string(width) + "x" +
                      std::to_string(height) + " frame");
  TrackState s;
  s.query = query;
  s.width = width;
  s.height = height;
  const auto T = static_cast<std::size_t>(steps);
  s.coords.assign(T, query);
  s.kinematics.assign(T, KinematicVector{});
  s.peak_scores.assign(T, 0.0);
  s.in_frame.assign(T, true);
  s.frozen.assign(T, false);
  return s;
}

SequenceSurfaces prepare_surfaces(std::vector<TimeSurface> surfaces, const TrackConfig& cfg) {
  SequenceSurfaces seq;
  seq.surfaces = std::move(surfaces);
  seq.pyramids.reserve(seq.surfaces.size());
  for (const auto& ts : seq.surfaces) {
    seq.pyramids.emplace_back(ts, cfg.match.levels - 1);
    seq.step_times.push_back(ts.window().end());
    const auto& p = ts.grid(Polarity::positive);
    const auto& n = ts.grid(Polarity::negative);
    const bool empty = std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0; }) &&
                       std::all_of(n.begin(), n.end(), [](double v) { return v == 0.0; });
    if (empty) ++seq.empty_bins;
  }
  return seq;
}

SequenceSurfaces prepare_surfaces(const EventStream& stream, const TimeWindow& window,
                                  const TrackConfig& cfg) {
  cfg.validate();
  if (window.span() < cfg.steps)
    throw ConfigError("window of " + std::to_string(window.span()) + " us cannot hold " +
                      std::to_string(cfg.steps) + " bins");
  std::vector<TimeSurface> surfaces;
  surfaces.reserve(static_cast<std::size_t>(cfg.steps));
  for (int k = 0; k < cfg.steps; ++k)
    surfaces.push_back(encode_time_surface(stream, window.bin(k, cfg.steps)));
  return prepare_surfaces(std::move(surfaces), cfg);
}

TrackState iterate(const TrackState& state, const SequenceSurfaces& seq, const TrackConfig& cfg) {
  const int T = static_cast<int>(state.coords.size());
  if (seq.steps() != T) throw ConfigError("surface count does not match trajectory length");
  if (state.iteration >= cfg.iterations)
    throw ConfigError("state already ran the configured number of iterations");

  std::vector<KinematicVector> raw(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    raw[t] = estimate_kinematics(seq.surfaces[t], state.coords[t], cfg.guidance);
  std::vector<KinematicVector> kin = correct_kinematics(raw, cfg.guidance.smoothing_half_width);
  if (!cfg.use_guidance)
    for (auto& k : kin) k.weight = 0.0;

  TrackState next = state;
  next.kinematics = kin;
  next.coords[0] = state.query;
  next.peak_scores[0] = 1.0;
  next.in_frame[0] = true;
  next.frozen[0] = false;

  // Reference pyramids come from the previous iteration's estimates.
  std::vector<PatchPyramid> pyramids(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    pyramids[t] = build_pyramid(seq.pyramids[t], t == 0 ? state.query : state.coords[t], cfg.match);

  for (int t = 1; t < T; ++t) {
    if (next.frozen[t - 1]) {
      next.coords[t] = next.coords[t - 1];
      next.frozen[t] = true;
      next.in_frame[t] = false;
      next.peak_scores[t] = 0.0;
      continue;
    }
    const Descriptor ref = reference_descriptor(pyramids, t, cfg.match);
    KinematicVector guide = kin[t];
    const Point2 guided = next.coords[t - 1] + (guide.weight * 1.0) * guide.v;
    Point2 center = next.coords[t - 1];
    double peak = 0.0;
    const int passes = cfg.search_scales + cfg.refine_passes;
    for (int pass = 0; pass < passes; ++pass) {
      const int stride = pass < cfg.search_scales ? 1 << (cfg.search_scales - 1 - pass) : 1;
      const CorrelationMap map = correlate(ref, seq.pyramids[t], center, guide, 1.0,
                                           cfg.search_radius, cfg.match, stride);
      center = map.guided_center + soft_argmax(map, cfg.temperature);
      peak = map.peak();
      guide = KinematicVector{};  // guidance places the first window only
    }
    const Point2 step = center - guided;
    const double bound = max_update(cfg);
    if (step.norm() > bound) center = guided + (bound / step.norm()) * step;

    next.in_frame[t] = in_frame(center, state.width, state.height);
    next.frozen[t] = false;
    if (!next.in_frame[t]) {
      if (cfg.policy == OutOfFramePolicy::freeze) {
        center = next.coords[t - 1];
        next.frozen[t] = true;
      } else {
        center.x = std::clamp(center.x, 0.0, state.width - 1.0);
        center.y = std::clamp(center.y, 0.0, state.height - 1.0);
      }
    }
    next.coords[t] = center;
    next.peak_scores[t] = peak;
  }
  next.iteration = state.iteration + 1;
  return next;
}

TrackState iterate(const TrackState& state, std::span<const TimeSurface> surfaces,
                   const TrackConfig& cfg) {
  return iterate(state, prepare_surfaces(std::vector<TimeSurface>(surfaces.begin(), surfaces.end()), cfg),
                 cfg);
}

const char* to_string(StepStatus s) {
  switch (s) {
    case StepStatus::ok: return "ok";
    case StepStatus::frozen: return "frozen";
    case StepStatus::warned: return "warned";
  }
  return "?";
}

Trajectory make_trajectory(const TrackState& state, const SequenceSurfaces& seq, int point_id) {
  Trajectory traj;
  traj.point_id = point_id;
  traj.coords = state.coords;
  traj.times = seq.step_times;
  traj.warned = 2 * seq.empty_bins >= seq.steps();
  for (std::size_t t = 0; t < state.coords.size(); ++t) {
    const double peak = std::clamp(state.peak_scores[t], 0.0, 1.0);
    traj.confidence.push_back(0.5 * (peak + state.kinematics[t].weight));
    if (state.frozen[t]) traj.status.push_back(StepStatus::frozen);
    else if (traj.warned) traj.status.push_back(StepStatus::warned);
    else traj.status.push_back(StepStatus::ok);
  }
  return traj;
}

Trajectory track(Point2 query, const SequenceSurfaces& seq, const TrackConfig& cfg, int point_id) {
  cfg.validate();
  if (seq.steps() != cfg.steps) throw ConfigError("surface count does not match T");
  const TimeSurface& first = seq.surfaces.front();
  TrackState state = init_state(query, cfg.steps, first.width(), first.height());
  while (state.iteration < cfg.iterations) state = iterate(state, seq, cfg);
  return make_trajectory(state, seq, point_id);
}

Trajectory track(Point2 query, const EventStream& stream, const TimeWindow& window,
                 const TrackConfig& cfg, int point_id) {
  return track(query, prepare_surfaces(stream, window, cfg), cfg, point_id);
}

std::vector<TrackResult> track_batch(std::span<const Query> queries, const EventStream& stream,
                                     const TimeWindow& window, const TrackConfig& cfg,
                                     int threads) {
  std::vector<TrackResult> results(queries.size());
  if (queries.empty()) return results;
  const SequenceSurfaces seq = prepare_surfaces(stream, window, cfg);

  auto run_one = [&](std::size_t i) {
    TrackResult& r = results[i];
    r.point_id = queries[i].point_id;
    try {
      r.trajectory = track(queries[i].position, seq, cfg, queries[i].point_id);
    } catch (const Error& e) {
      r.error = e.what();
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(threads, 1));
  if (workers == 1 || queries.size() == 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) run_one(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, queries.size()); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < queries.size(); i = next++) run_one(i);
    });
  pool.clear();
  return results;
}

void save_trajectories(std::span<const Trajectory> trajectories, const std::filesystem::path& path) {
  std::string out = "point_id,step,t_us,x,y,confidence,status\n";
  for (const Trajectory& tr : trajectories)
    for (int k = 0; k < tr.steps(); ++k)
      out += std::to_string(tr.point_id) + ',' + std::to_string(k) + ',' +
             std::to_string(tr.times[k]) + ',' + io::fixed(tr.coords[k].x) + ',' +
             io::fixed(tr.coords[k].y) + ',' + io::fixed(tr.confidence[k]) + ',' +
             to_string(tr.status[k]) + '\n';
  io::write_file_atomic(path, out);
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  auto rows = io::lines(text);
  if (rows.empty()) return {};
  if (io::trim(rows[0]) != "point_id,step,t_us,x,y,confidence,status")
    throw ParseError("line 1: expected header 'point_id,step,t_us,x,y,confidence,status'", 1);
  std::vector<Trajectory> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t line = i + 1;
    if (io::trim(rows[i]).empty()) continue;
    auto f = io::split(rows[i]);
    if (f.size() != 7) throw ParseError("line " + std::to_string(line) + ": expected 7 fields", line);
    const int id = static_cast<int>(io::parse_int(f[0], line));
    const long long step = io::parse_int(f[1], line);
    if (step == 0) {
      out.emplace_back();
      out.back().point_id = id;
    } else if (out.empty() || out.back().point_id != id ||
               step != static_cast<long long>(out.back().coords.size())) {
      throw ParseError("line " + std::to_string(line) + ": rows must be grouped by point with consecutive steps", line);
    }
    Trajectory& tr = out.back();
    tr.times.push_back(io::parse_int(f[2], line));
    tr.coords.push_back({io::parse_double(f[3], line), io::parse_double(f[4], line)});
    tr.confidence.push_back(io::parse_double(f[5], line));
    const auto status = io::trim(f[6]);
    if (status == "ok") tr.status.push_back(StepStatus::ok);
    else if (status == "frozen") tr.status.push_back(StepStatus::frozen);
    else if (status == "warned") {
      tr.status.push_back(StepStatus::warned);
      tr.warned = true;
    } else {
      throw ParseError("line " + std::to_string(line) + ": unknown status '" + std::string(status) + "'", line);
    }
  }
  return out;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  auto rows = io::lines(text);
  std::vector<Query> out;
  if (rows.empty()) return out;
  if (io::trim(rows[0]) != "point_id,x,y")
    throw ParseError("line 1: expected header 'point_id,x,y'", 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t line = i + 1;
    if (io::trim(rows[i]).empty()) continue;
    auto f = io::split(rows[i]);
    if (f.size() != 3) throw ParseError("line " + std::to_string(line) + ": expected 'point_id,x,y'", line);
    out.push_back({static_cast<int>(io::parse_int(f[0], line)),
                   {io::parse_double(f[1], line), io::parse_double(f[2], line)}});
  }
  return out;
}

void save_queries(std::span<const Query> queries, const std::filesystem::path& path) {
  std::string out = "point_id,x,y\n";
  for (const Query& q : queries)
    out += std::to_string(q.point_id) + ',' + io::fixed(q.position.x) + ',' + io::fixed(q.position.y) + '\n';
  io::write_file_atomic(path, out);
}

}  // namespace evtap
