#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include "evtap/errors.hpp"
#include "evtap/event_core.hpp"
#include "evtap/io_util.hpp"
#include "evtap/kv_config.hpp"
#include "evtap/metrics.hpp"
#include "evtap/plot.hpp"
#include "evtap/scene_sim.hpp"
#include "evtap/tracker.hpp"

namespace evtap::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<long long> seed;
  int threads = 1;
  std::string format = "text";
};

/// Output files of one command. Files written before a failure are removed
/// when the set is destroyed without commit().
class OutputSet {
 public:
  explicit OutputSet(bool no_overwrite) : no_overwrite_(no_overwrite) {}
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

  void reserve(const fs::path& p) {
    const fs::path key = fs::weakly_canonical(p);
    for (const auto& q : reserved_)
      if (q == key) throw ConfigError("output path given more than once: " + p.string());
    if (no_overwrite_ && fs::exists(p))
      throw ConfigError("output exists and --no-overwrite is set: " + p.string());
    reserved_.push_back(key);
  }
  void written(const fs::path& p) { written_.push_back(p); }
  void commit() { committed_ = true; }

 private:
  bool no_overwrite_;
  bool committed_ = false;
  std::vector<fs::path> reserved_;
  std::vector<fs::path> written_;
};

template <class F>
auto reading(const fs::path& path, F&& load) {
  try {
    return load(path);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), e.index());
  }
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (int id : ids) s += (s.empty() ? "" : " ") + std::to_string(id);
  return s;
}

struct SimulateArgs {
  std::string config, events, gt, queries;
  bool no_overwrite = false;
};

int cmd_simulate(const SimulateArgs& a, const Globals& g, std::ostream& out) {
  auto [scene, cfg] = reading(a.config, load_scenario);
  if (g.seed) {
    if (*g.seed < 0) throw ConfigError("seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(*g.seed);
  }
  const EventFormat fmt = parse_event_format(g.format);
  OutputSet outs(a.no_overwrite);
  outs.reserve(a.events);
  outs.reserve(a.gt);
  if (!a.queries.empty()) outs.reserve(a.queries);

  auto [stream, gt] = simulate(scene, cfg);
  save_events(stream, a.events, fmt);
  outs.written(a.events);
  save_ground_truth(gt, a.gt);
  outs.written(a.gt);
  if (!a.queries.empty()) {
    std::vector<Query> qs;
    for (std::size_t i = 0; i < gt.query_points.size(); ++i)
      qs.push_back({static_cast<int>(i), gt.query_points[i]});
    save_queries(qs, a.queries);
    outs.written(a.queries);
  }
  outs.commit();
  out << "events: " << stream.size() << "  duration_us: " << cfg.duration_us
      << "  steps: " << gt.steps() << '\n';
  return 0;
}

struct TrackArgs {
  std::string events, queries, out, config;
  std::vector<std::string> overrides;
  std::optional<Micros> t_start, t_end;
  bool no_overwrite = false;
};

TrackConfig track_config(const TrackArgs& a) {
  KvConfig kv = a.config.empty() ? KvConfig::parse("") : reading(a.config, KvConfig::load);
  for (const auto& s : a.overrides) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(std::string(io::trim(std::string_view(s).substr(0, eq))),
           std::string(io::trim(std::string_view(s).substr(eq + 1))));
  }
  TrackConfig cfg;
  apply_track_overrides(cfg, kv);
  return cfg;
}

int cmd_track(const TrackArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const TrackConfig cfg = track_config(a);
  const EventFormat fmt = parse_event_format(g.format);
  OutputSet outs(a.no_overwrite);
  outs.reserve(a.out);

  const EventStream stream =
      reading(a.events, [fmt](const fs::path& p) { return load_events(p, fmt); });
  const std::vector<Query> queries = reading(a.queries, load_queries);
  std::map<int, int> seen;
  for (const Query& q : queries)
    if (seen[q.point_id]++ == 1)
      throw ConfigError("duplicate point_id " + std::to_string(q.point_id) + " in queries");

  std::vector<Trajectory> tracked;
  int ok = 0, warned = 0, failed = 0;
  if (!queries.empty()) {
    const Micros start = a.t_start.value_or(0);
    Micros end = 0;
    if (a.t_end) end = *a.t_end;
    else if (!stream.empty()) end = stream.events().back().t + 1;
    else throw ConfigError("event stream is empty; pass --t-end to set the window");
    const TimeWindow window(start, end);
    for (const TrackResult& r : track_batch(queries, stream, window, cfg, g.threads)) {
      if (!r.trajectory) {
        ++failed;
        err << "point " << r.point_id << " failed: " << r.error << '\n';
        continue;
      }
      (r.trajectory->warned ? warned : ok)++;
      tracked.push_back(*r.trajectory);
    }
  }
  save_trajectories(tracked, a.out);
  outs.written(a.out);
  outs.commit();
  out << "points: " << queries.size() << "  ok: " << ok << "  warned: " << warned
      << "  failed: " << failed << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string pred, gt, out;
  double theta = 50.0;
  double gamma = 0.8;
  int max_threshold = 31;
  bool no_overwrite = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  OutputSet outs(a.no_overwrite);
  if (!a.out.empty()) outs.reserve(a.out);
  const auto preds = reading(a.pred, load_trajectories);
  const auto gt = reading(a.gt, load_ground_truth);

  std::map<int, const Trajectory*> by_id;
  for (const Trajectory& tr : preds)
    if (!by_id.emplace(tr.point_id, &tr).second)
      throw ConfigError("duplicate point_id " + std::to_string(tr.point_id) + " in predictions");
  std::vector<int> missing, unexpected, short_or_long;
  for (std::size_t i = 0; i < gt.trajectories.size(); ++i) {
    auto it = by_id.find(static_cast<int>(i));
    if (it == by_id.end()) missing.push_back(static_cast<int>(i));
    else if (it->second->steps() != static_cast<int>(gt.trajectories[i].size()))
      short_or_long.push_back(static_cast<int>(i));
  }
  for (const auto& [id, tr] : by_id)
    if (id < 0 || id >= static_cast<int>(gt.trajectories.size())) unexpected.push_back(id);
  if (!missing.empty() || !unexpected.empty()) {
    err << "error: point ids differ between prediction and ground truth";
    if (!missing.empty()) err << "; missing: " << join_ids(missing);
    if (!unexpected.empty()) err << "; unexpected: " << join_ids(unexpected);
    err << '\n';
    return 1;
  }
  if (!short_or_long.empty()) {
    err << "error: step count differs from ground truth for points: " << join_ids(short_or_long)
        << '\n';
    return 1;
  }

  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < gt.trajectories.size(); ++i)
    pairs.push_back({by_id.at(static_cast<int>(i))->coords, gt.trajectories[i], {}});
  MetricParams params;
  params.survival_theta = a.theta;
  params.gamma = a.gamma;
  params.efa.max_threshold = a.max_threshold;
  const MetricsReport report = evaluate(pairs, params);

  out << format_report_table(report);
  if (a.out.empty()) {
    out << '\n' << format_report_csv(report);
  } else {
    io::write_file_atomic(a.out, format_report_csv(report));
    outs.written(a.out);
  }
  outs.commit();
  return 0;
}

struct PlotArgs {
  std::string traj, events, out;
  int cell = 4;
  bool no_overwrite = false;
};

int cmd_plot(const PlotArgs& a, const Globals& g) {
  const EventFormat fmt = parse_event_format(g.format);
  OutputSet outs(a.no_overwrite);
  outs.reserve(a.out);
  const auto trajectories = reading(a.traj, load_trajectories);
  const EventStream stream =
      reading(a.events, [fmt](const fs::path& p) { return load_events(p, fmt); });
  PlotOptions opts;
  opts.cell = a.cell;
  io::write_file_atomic(a.out, render_trajectory_svg(trajectories, stream, opts));
  outs.written(a.out);
  outs.commit();
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-camera point tracking toolkit", "evtap"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "simulator RNG seed (overrides the scene config)");
  app.add_option("--threads", g.threads, "worker threads for tracking")
      ->check(CLI::Range(1, 1024));
  app.add_option("--format", g.format, "event file format")
      ->check(CLI::IsMember({"text", "binary"}));

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Render a synthetic scene to events and ground truth");
  sim->add_option("-c,--config", sa.config, "scene config (key=value)")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--events", sa.events, "event output file")->required();
  sim->add_option("--gt", sa.gt, "ground-truth CSV output")->required();
  sim->add_option("--queries", sa.queries, "query CSV output (step-0 ground truth)");
  sim->add_flag("--no-overwrite", sa.no_overwrite, "fail if an output already exists");

  TrackArgs ta;
  auto* trk = app.add_subcommand("track", "Track query points through an event stream");
  trk->add_option("--events", ta.events, "event file")->required()->check(CLI::ExistingFile);
  trk->add_option("--queries", ta.queries, "query CSV (point_id,x,y)")
      ->required()
      ->check(CLI::ExistingFile);
  trk->add_option("-o,--out", ta.out, "trajectory CSV output")->required();
  trk->add_option("-c,--config", ta.config, "tracker config (key=value)")
      ->check(CLI::ExistingFile);
  trk->add_option("--set", ta.overrides, "tracker override key=value (repeatable)");
  trk->add_option("--t-start", ta.t_start, "window start, us (default 0)");
  trk->add_option("--t-end", ta.t_end, "window end, us (default last event + 1)");
  trk->add_flag("--no-overwrite", ta.no_overwrite, "fail if the output already exists");

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Score trajectories against ground truth");
  ev->add_option("--pred", ea.pred, "trajectory CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", ea.gt, "ground-truth CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--theta", ea.theta, "survival threshold, px")->check(CLI::PositiveNumber);
  ev->add_option("--gamma", ea.gamma, "weighted MAE decay")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--max-threshold", ea.max_threshold, "feature-age thresholds 1..N")
      ->check(CLI::PositiveNumber);
  ev->add_option("-o,--out", ea.out, "metrics CSV output (default: print after the table)");
  ev->add_flag("--no-overwrite", ea.no_overwrite, "fail if the output already exists");

  PlotArgs pa;
  auto* plt = app.add_subcommand("plot", "Render trajectories over event density as SVG");
  plt->add_option("--traj", pa.traj, "trajectory CSV")->required()->check(CLI::ExistingFile);
  plt->add_option("--events", pa.events, "event file")->required()->check(CLI::ExistingFile);
  plt->add_option("-o,--out", pa.out, "SVG output")->required();
  plt->add_option("--cell", pa.cell, "density cell size, px")->check(CLI::PositiveNumber);
  plt->add_flag("--no-overwrite", pa.no_overwrite, "fail if the output already exists");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return 0;
    }
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.back()->help());
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sa, g, out);
    if (trk->parsed()) return cmd_track(ta, g, out, err);
    if (ev->parsed()) return cmd_evaluate(ea, out, err);
    return cmd_plot(pa, g);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace evtap::cli
