// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "evtap/event_core.hpp"
#include "evtap/io_util.hpp"
#include "evtap/metrics.hpp"
#include "evtap/motion_guidance.hpp"
#include "evtap/scene_sim.hpp"
#include "evtap/tracker.hpp"
#include "scenes.hpp"
#include "support.hpp"

using namespace evtap;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<Trajectory> track_all(const EventStream& stream, const GroundTruth& gt,
                                  const TimeWindow& window, const TrackConfig& cfg) {
  std::vector<Query> queries;
  for (std::size_t q = 0; q < gt.query_points.size(); ++q)
    queries.push_back({static_cast<int>(q), gt.query_points[q]});
  std::vector<Trajectory> out;
  for (auto& r : track_batch(queries, stream, window, cfg, 4)) {
    if (!r.trajectory) throw Error("point " + std::to_string(r.point_id) + ": " + r.error);
    out.push_back(std::move(*r.trajectory));
  }
  return out;
}

Verdict a1() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mag(0.01, 0.07), dir(-std::numbers::pi, std::numbers::pi),
      frac(-0.5, 0.5);
  GuidanceParams exact;
  exact.eps = 0.0;
  exact.v_max = 1e12;
  const int side = 21;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const double m = mag(rng), th = dir(rng);
    const Point2 g{m * std::cos(th), m * std::sin(th)};
    std::vector<double> grid(side * side), zero(side * side, 0.0);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double t = 0.5 + g.x * (x - 10) + g.y * (y - 10);
        // Only the 9x9 fit window has to hold the exact plane.
        if (std::abs(x - 10) <= 5 && std::abs(y - 10) <= 5 && !(t > 0.0 && t <= 1.0))
          return {false, "ramp leaves the unit range inside the fit window"};
        grid[y * side + x] = std::clamp(t, 1e-6, 1.0);
      }
    const auto ts = TimeSurface::from_grids(side, side, TimeWindow(0, 1000), grid, zero);
    const Point2 c{10.0 + frac(rng), 10.0 + frac(rng)};
    const auto kv = plane_to_velocity(fit_plane(ts, c, 3), exact);
    const Point2 expect = (1.0 / (m * m)) * g;
    worst = std::max(worst, distance(kv.v, expect) / expect.norm());
  }
  return {worst < 1e-6, fmt("max relative error %.3g over 500 ramps (< 1e-6)", worst)};
}

Verdict a2() {
  Scene s;
  s.kind = SceneKind::rotating_stick;
  SimConfig c;
  c.duration_us = 1'000'000;
  c.contrast_threshold = 0.2;
  c.noise_rate = 0.0;
  auto [ev, gt] = simulate(s, c);
  RateProfileOptions o;
  o.r_min = 4.0;
  o.r_max = 36.0;
  o.duration_us = c.duration_us;
  const auto bins = event_rate_profile(ev, s.origin, 16, o);
  const double n = static_cast<double>(bins.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const auto& b : bins) {
    sx += b.radius;
    sy += b.rate;
    sxx += b.radius * b.radius;
    syy += b.rate * b.rate;
    sxy += b.radius * b.rate;
  }
  const double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  const double pearson = cov / std::sqrt(vx * vy);
  const double slope = cov / vx;
  const double intercept = (sy - slope * sx) / n;
  const double scale = sy / n;
  const double ratio = std::abs(intercept) / scale;
  return {pearson > 0.95 && ratio < 0.1,
          fmt("pearson %.4f (> 0.95), |intercept| / mean rate %.4f (< 0.1)", pearson, ratio)};
}

Verdict a3() {
  const auto sc = test::linear_blob();
  auto [ev, gt] = simulate(sc.scene, sc.sim);
  TrackConfig cfg;
  const auto trs = track_all(ev, gt, sc.sim.window(), cfg);
  const auto pairs = test::eval_pairs(trs, gt);
  const double m = mte(pairs), d = delta_avg(pairs);
  return {m < 2.0 && d > 0.8, fmt("MTE %.3f px (< 2.0), delta_avg %.3f (> 0.8)", m, d)};
}

Verdict a4() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto sc = test::sinusoid(seed);
    auto [ev, gt] = simulate(sc.scene, sc.sim);
    const auto trs = track_all(ev, gt, sc.sim.window(), TrackConfig{});
    double s50 = 0.0, s16 = 0.0;
    for (const auto& p : test::eval_pairs(trs, gt)) {
      s50 += survival(p, 50.0) / trs.size();
      s16 += survival(p, 16.0) / trs.size();
    }
    pass = pass && s50 == 1.0 && s16 >= 0.9;
    detail += fmt("%sseed %d: S50 %.3f S16 %.3f", seed > 1 ? "; " : "", static_cast<int>(seed), s50, s16);
  }
  return {pass, detail + " (S50 = 1, S16 >= 0.9)"};
}

Verdict a5() {
  bool pass = true;
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto sc = test::sinusoid(seed);
    auto [ev, gt] = simulate(sc.scene, sc.sim);
    TrackConfig guided, plain;
    plain.use_guidance = false;
    const double mg = mte(test::eval_pairs(track_all(ev, gt, sc.sim.window(), guided), gt));
    const double mp = mte(test::eval_pairs(track_all(ev, gt, sc.sim.window(), plain), gt));
    pass = pass && mg <= mp;
    wins += mg <= mp;
    detail += fmt("%sseed %d: %.3f vs %.3f", seed > 1 ? "; " : "", static_cast<int>(seed), mg, mp);
  }
  return {pass, fmt("guided <= unguided MTE on %d/5 seeds: ", wins) + detail};
}

Verdict a6() {
  bool pass = true;
  std::string detail;
  for (double v : {5.0, 20.0, 80.0}) {
    Scene s;
    s.kind = SceneKind::translating_edge;
    s.origin = {60.0, 60.0};
    s.velocity = {v, 0.0};
    SimConfig c;
    c.duration_us = static_cast<Micros>(12.0 / v * 1e6);
    auto [ev, gt] = simulate(s, c);
    const auto ts = encode_time_surface(ev, c.window());
    const double span_s = c.window().span() * 1e-6;
    std::vector<double> speeds;
    for (int x = 63; x <= 69; ++x)
      for (int y = 20; y <= 100; y += 5) {
        const auto kv = estimate_kinematics(ts, {double(x), double(y)});
        if (kv.weight > 0.0) speeds.push_back(kv.v.norm() / span_s);
      }
    if (speeds.empty()) return {false, fmt("no reliable fits at v = %g", v)};
    std::nth_element(speeds.begin(), speeds.begin() + speeds.size() / 2, speeds.end());
    const double rel = speeds[speeds.size() / 2] / v - 1.0;
    pass = pass && std::abs(rel) < 0.1;
    detail += fmt("%sv=%g: %+.4f", v > 5.0 ? ", " : "", v, rel);
  }
  return {pass, "median relative speed error " + detail + " (|e| < 0.1)"};
}

Verdict a7() {
  auto along_x = [](std::vector<double> errs) {
    EvalPair p;
    for (double e : errs) {
      p.pred.push_back({e, 0.0});
      p.gt.push_back({0.0, 0.0});
    }
    return p;
  };
  std::vector<std::pair<std::string, double>> fails;
  auto expect = [&](const std::string& name, double got, double want) {
    if (!(std::abs(got - want) <= 1e-12)) fails.emplace_back(name, got);
  };
  const std::vector<EvalPair> three{along_x({3, 3, 3})};
  expect("delta_avg 3px", delta_avg(three), 0.6);
  const std::vector<EvalPair> odd{along_x({1, 2, 100})}, even{along_x({1, 2, 3, 100})};
  expect("mte odd", mte(odd), 2.0);
  expect("mte even", mte(even), 2.5);
  std::vector<double> half(48, 0.0);
  for (int t = 24; t < 48; ++t) half[t] = 60.0;
  expect("survival half", survival(along_x(half), 50.0), 0.5);
  expect("survival never", survival(along_x({1, 1}), 50.0), 1.0);
  expect("survival step0", survival(along_x({51, 0}), 50.0), 0.0);
  expect("fa perfect", feature_age(along_x({0, 0})), 1.0);
  expect("fa 100px", feature_age(along_x({100, 100})), 0.0);
  expect("fa 16.5px", feature_age(along_x({16.5, 16.5})), 15.0 / 31.0);
  const std::vector<EvalPair> efa_half{along_x({0}), along_x({100})};
  expect("efa half", expected_feature_age(efa_half), 0.5);
  EvalPair l1;
  l1.gt = {{0, 0}, {0, 0}, {0, 0}};
  l1.pred = {{1, 0}, {0, 1}, {0.5, -0.5}};
  expect("weighted mae", weighted_mae(l1, 0.8), 2.44);
  expect("weighted mae gamma 1", weighted_mae(l1, 1.0), 3.0);
  std::string detail = fmt("%d/12 metric fixtures exact to 1e-12", 12 - static_cast<int>(fails.size()));
  for (const auto& [name, got] : fails) detail += fmt("; %s got %.15g", name.c_str(), got);
  return {fails.empty(), detail};
}

Verdict a8() {
  Scene s;
  s.kind = SceneKind::rotating_stick;
  SimConfig c;
  c.duration_us = 300'000;
  c.steps = 24;
  auto [ev, gt] = simulate(s, c);
  std::vector<Event> first(ev.events().begin(), ev.events().begin() + std::min<std::size_t>(ev.size(), 10'000));
  const EventStream tenk(first, ev.width(), ev.height(), 17);
  test::TempDir dir("accept");
  bool pass = tenk.size() == 10'000;
  for (auto f : {EventFormat::text, EventFormat::binary}) {
    save_events(tenk, dir / "ev", f);
    pass = pass && load_events(dir / "ev", f) == tenk;
  }

  save_ground_truth(gt, dir / "gt.csv");
  const auto gt2 = load_ground_truth(dir / "gt.csv");
  double worst = 0.0;
  pass = pass && gt2.timestep_times == gt.timestep_times && gt2.trajectories.size() == gt.trajectories.size();
  for (std::size_t q = 0; pass && q < gt.trajectories.size(); ++q)
    for (std::size_t t = 0; t < gt.trajectories[q].size(); ++t)
      worst = std::max(worst, distance(gt.trajectories[q][t], gt2.trajectories[q][t]));

  TrackConfig cfg;
  cfg.steps = 24;
  cfg.iterations = 1;
  std::vector<Trajectory> trs;
  for (std::size_t q = 0; q < gt.query_points.size(); ++q)
    trs.push_back(track(gt.query_points[q], ev, c.window(), cfg, static_cast<int>(q)));
  save_trajectories(trs, dir / "traj.csv");
  const auto trs2 = load_trajectories(dir / "traj.csv");
  pass = pass && trs2.size() == trs.size();
  for (std::size_t i = 0; pass && i < trs.size(); ++i) {
    pass = trs2[i].times == trs[i].times && trs2[i].status == trs[i].status &&
           trs2[i].point_id == trs[i].point_id;
    for (int t = 0; t < trs[i].steps(); ++t) {
      worst = std::max(worst, distance(trs[i].coords[t], trs2[i].coords[t]));
      worst = std::max(worst, std::abs(trs[i].confidence[t] - trs2[i].confidence[t]));
    }
  }
  pass = pass && worst <= 5e-7 * std::sqrt(2.0);
  return {pass, fmt("10000-event text and binary round trips exact, CSV max deviation %.2g", worst)};
}

Verdict a9() {
  auto pipeline = [](const test::TempDir& dir, const std::string& tag) {
    auto run = [](std::vector<std::string> args) {
      args.insert(args.begin(), "evtap");
      std::vector<const char*> argv;
      for (const auto& a : args) argv.push_back(a.c_str());
      std::ostringstream out, err;
      return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    };
    const auto p = [&](const std::string& n) { return (dir / (tag + n)).string(); };
    int rc = run({"--seed", "5", "simulate", "-c", (dir / "scene.cfg").string(), "--events", p("ev.bin"),
                  "--gt", p("gt.csv"), "--queries", p("q.csv"), "--format", "binary"});
    rc |= run({"--format", "binary", "--threads", "3", "track", "--events", p("ev.bin"), "--queries",
               p("q.csv"), "-o", p("traj.csv")});
    rc |= run({"evaluate", "--pred", p("traj.csv"), "--gt", p("gt.csv"), "-o", p("metrics.csv")});
    return rc;
  };
  test::TempDir dir("accept");
  test::write_text(dir / "scene.cfg",
                   "kind=sinusoidal_blob\nduration_us=2000000\nnoise_rate=0.1\nqueries=5\n");
  const int rc = pipeline(dir, "a_") | pipeline(dir, "b_");
  if (rc != 0) return {false, "pipeline command failed"};
  const bool traj = io::read_file(dir / "a_traj.csv") == io::read_file(dir / "b_traj.csv");
  const bool metrics = io::read_file(dir / "a_metrics.csv") == io::read_file(dir / "b_metrics.csv");
  return {traj && metrics, fmt("trajectory CSVs %s, metric CSVs %s", traj ? "identical" : "DIFFER",
                               metrics ? "identical" : "DIFFER")};
}

Verdict a10() {
  const auto sc = test::linear_blob();
  auto [ev, gt] = simulate(sc.scene, sc.sim);
  TrackConfig cfg;
  cfg.iterations = 8;
  const auto seq = prepare_surfaces(ev, sc.sim.window(), cfg);
  std::vector<TrackState> states;
  for (Point2 q : gt.query_points) states.push_back(init_state(q, cfg.steps, ev.width(), ev.height()));
  std::vector<double> err{0.0};  // index k = after k iterations
  for (int k = 1; k <= 8; ++k) {
    for (auto& s : states) s = iterate(s, seq, cfg);
    err.push_back(test::mean_error(states, gt));
  }
  bool monotone = true;
  for (int k = 1; k < 6; ++k) monotone = monotone && err[k + 1] <= err[k];
  const double gain_1_6 = err[1] - err[6];
  const double gain_6_8 = err[6] - err[8];
  const bool settled = gain_6_8 < 0.05 * gain_1_6;
  std::string trace;
  for (int k = 1; k <= 8; ++k) trace += fmt("%s%.3f", k > 1 ? " " : "", err[k]);
  return {monotone && settled,
          fmt("mean error by iteration [%s]; gain 6->8 / gain 1->6 = %.4f (< 0.05)", trace.c_str(),
              gain_6_8 / gain_1_6)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    double budget_s;  // 0: no runtime bound
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {"A1", 1.0, a1},  {"A2", 10.0, a2}, {"A3", 30.0, a3}, {"A4", 30.0, a4}, {"A5", 0.0, a5},
      {"A6", 20.0, a6}, {"A7", 0.0, a7},  {"A8", 0.0, a8},  {"A9", 0.0, a9},  {"A10", 0.0, a10},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      v.pass = false;
      v.detail += fmt("; runtime over %.0f s budget", c.budget_s);
    }
    failed += !v.pass;
    std::printf("%-4s %s  %s  [%.2f s]\n", c.id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
