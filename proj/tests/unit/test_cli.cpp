#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "evtap/metrics.hpp"
#include "evtap/scene_sim.hpp"
#include "evtap/tracker.hpp"
#include "support.hpp"

using namespace evtap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "evtap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* kStick =
    "kind=rotating_stick\nduration_us=250000\nsteps=12\nqueries=3\n";

struct Pipeline {
  test::TempDir dir{"cli"};
  std::string cfg = (dir / "scene.cfg").string();
  std::string events = (dir / "ev.txt").string();
  std::string gt = (dir / "gt.csv").string();
  std::string queries = (dir / "q.csv").string();
  std::string traj = (dir / "traj.csv").string();

  Pipeline() { test::write_text(cfg, kStick); }

  Outcome simulate() {
    return run({"simulate", "-c", cfg, "--events", events, "--gt", gt, "--queries", queries});
  }
  Outcome track(std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"track", "--events", events, "--queries", queries, "-o", traj,
                                  "--set", "steps=12", "--set", "iterations=2",
                                  "--t-end", "250000"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }
};

}  // namespace

TEST_CASE("simulate writes events and ground truth") {
  Pipeline p;
  const auto r = p.simulate();
  CHECK(r.code == 0);
  CHECK(fs::exists(p.events));
  CHECK(fs::exists(p.gt));
  CHECK(r.out.find("events: ") == 0);
  CHECK(r.out.find("steps: 12") != std::string::npos);
  const auto gt = load_ground_truth(p.gt);
  CHECK(gt.steps() == 12);
  CHECK(gt.query_points.size() == 3);
  CHECK(load_queries(p.queries).size() == 3);
}

TEST_CASE("simulate usage and output errors") {
  Pipeline p;
  const auto missing = run({"simulate", "-c", (p.dir / "nope.cfg").string(), "--events", p.events,
                            "--gt", p.gt});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("simulate") != std::string::npos);
  CHECK(run({"simulate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"--help"}).code == 0);

  const auto same = run({"simulate", "-c", p.cfg, "--events", p.events, "--gt", p.events});
  CHECK(same.code == 1);
  CHECK_FALSE(fs::exists(p.events));

  REQUIRE(p.simulate().code == 0);
  const auto again = run({"simulate", "-c", p.cfg, "--events", p.events, "--gt", p.gt, "--no-overwrite"});
  CHECK(again.code == 1);
  CHECK(again.err.find("--no-overwrite") != std::string::npos);

  test::write_text(p.cfg, "kind=rotating_stick\nlength=-3\n");
  const auto bad = run({"simulate", "-c", p.cfg, "--events", (p.dir / "e2.txt").string(), "--gt",
                        (p.dir / "g2.csv").string()});
  CHECK(bad.code == 1);
  CHECK_FALSE(fs::exists(p.dir / "e2.txt"));
  CHECK_FALSE(fs::exists(p.dir / "g2.csv"));

  test::write_text(p.cfg, "kind=rotating_stick\ncolour=red\n");
  CHECK(run({"simulate", "-c", p.cfg, "--events", (p.dir / "e3.txt").string(), "--gt",
             (p.dir / "g3.csv").string()}).code == 1);
}

TEST_CASE("simulate honors the global seed and format") {
  Pipeline p;
  test::write_text(p.cfg, std::string(kStick) + "noise_rate=2\n");
  const std::string bin = (p.dir / "ev.bin").string();
  REQUIRE(run({"--format", "binary", "--seed", "9", "simulate", "-c", p.cfg, "--events", bin, "--gt",
               p.gt}).code == 0);
  const auto ev = load_events(bin, EventFormat::binary);
  auto [scene, sim] = load_scenario(p.cfg);
  sim.seed = 9;
  CHECK(ev == simulate(scene, sim).first);
  CHECK(run({"--format", "jpeg", "simulate", "-c", p.cfg, "--events", bin, "--gt", p.gt}).code == 2);
}

TEST_CASE("track writes T rows per point") {
  Pipeline p;
  REQUIRE(p.simulate().code == 0);
  const auto r = p.track({"--threads", "1"});
  CHECK(r.code == 0);
  CHECK(r.out.find("points: 3  ok: 3  warned: 0  failed: 0") != std::string::npos);
  const std::string csv = io::read_file(p.traj);
  CHECK(lines(csv) == 1 + 3 * 12);
  const auto trs = load_trajectories(p.traj);
  REQUIRE(trs.size() == 3);
  for (const auto& tr : trs) CHECK(tr.steps() == 12);

  const auto threaded = run({"--threads", "4", "track", "--events", p.events, "--queries", p.queries, "-o",
                             (p.dir / "traj4.csv").string(), "--set", "steps=12", "--set",
                             "iterations=2", "--t-end", "250000"});
  CHECK(threaded.code == 0);
  CHECK(io::read_file(p.dir / "traj4.csv") == csv);
}

TEST_CASE("track reports bad queries per point") {
  Pipeline p;
  REQUIRE(p.simulate().code == 0);
  test::write_text(p.queries, "point_id,x,y\n0,80,60\n1,500,60\n");
  const auto r = p.track();
  CHECK(r.code == 0);
  CHECK(r.out.find("points: 2  ok: 1  warned: 0  failed: 1") != std::string::npos);
  CHECK(r.err.find("point 1 failed") != std::string::npos);
  CHECK(load_trajectories(p.traj).size() == 1);

  test::write_text(p.queries, "point_id,x,y\n0,80,60\n0,81,60\n");
  CHECK(p.track().code == 1);
}

TEST_CASE("empty query file gives an empty trajectory file") {
  Pipeline p;
  REQUIRE(p.simulate().code == 0);
  test::write_text(p.queries, "point_id,x,y\n");
  const auto r = p.track();
  CHECK(r.code == 0);
  CHECK(load_trajectories(p.traj).empty());
}

TEST_CASE("corrupt events fail with a location") {
  Pipeline p;
  test::write_text(p.events, "# evtap v1 width=160 height=120 epoch=0\n0,1,1,1\n5,2,oops,1\n");
  test::write_text(p.queries, "point_id,x,y\n0,80,60\n");
  const auto r = p.track();
  CHECK(r.code == 1);
  CHECK(r.err.find("ev.txt") != std::string::npos);
  CHECK(r.err.find('3') != std::string::npos);
  CHECK_FALSE(fs::exists(p.traj));

  const auto bad_set = p.track({"--set", "bogus=1"});
  CHECK(bad_set.code == 1);
  CHECK(run({"track", "--events", p.events, "--queries", p.queries, "-o", p.traj, "--set", "nokey"}).code != 0);
}

TEST_CASE("evaluate scores a perfect prediction") {
  Pipeline p;
  REQUIRE(p.simulate().code == 0);
  const auto gt = load_ground_truth(p.gt);
  std::vector<Trajectory> perfect;
  for (std::size_t q = 0; q < gt.query_points.size(); ++q) {
    Trajectory tr;
    tr.point_id = static_cast<int>(q);
    tr.coords = gt.trajectories[q];
    tr.times = gt.timestep_times;
    tr.confidence.assign(tr.coords.size(), 1.0);
    tr.status.assign(tr.coords.size(), StepStatus::ok);
    perfect.push_back(tr);
  }
  save_trajectories(perfect, p.traj);
  const auto r = run({"evaluate", "--pred", p.traj, "--gt", p.gt});
  CHECK(r.code == 0);
  CHECK(r.out.find("delta_avg,1.000000000,") != std::string::npos);
  CHECK(r.out.find("\nmte,0.000000000,") != std::string::npos);

  perfect[1].point_id = 7;
  save_trajectories(perfect, p.traj);
  const auto ids = run({"evaluate", "--pred", p.traj, "--gt", p.gt});
  CHECK(ids.code == 1);
  CHECK(ids.err.find("7") != std::string::npos);

  perfect[1].point_id = 1;
  for (auto& tr : perfect) {
    tr.coords.pop_back();
    tr.times.pop_back();
    tr.confidence.pop_back();
    tr.status.pop_back();
  }
  save_trajectories(perfect, p.traj);
  CHECK(run({"evaluate", "--pred", p.traj, "--gt", p.gt}).code == 1);
}

TEST_CASE("evaluate matches the metrics library on a full pipeline") {
  Pipeline p;
  REQUIRE(p.simulate().code == 0);
  REQUIRE(p.track().code == 0);
  const std::string metrics = (p.dir / "m.csv").string();
  const auto r = run({"evaluate", "--pred", p.traj, "--gt", p.gt, "--theta", "16", "--gamma", "0.9",
                      "-o", metrics});
  REQUIRE(r.code == 0);

  const auto trs = load_trajectories(p.traj);
  const auto gt = load_ground_truth(p.gt);
  std::vector<EvalPair> pairs;
  for (const auto& tr : trs) pairs.push_back({tr.coords, gt.trajectories[tr.point_id], {}});
  MetricParams params;
  params.survival_theta = 16.0;
  params.gamma = 0.9;
  const auto report = evaluate(pairs, params);
  CHECK(io::read_file(metrics) == format_report_csv(report));
  CHECK(r.out == format_report_table(report));
}

TEST_CASE("plot renders one polyline per point deterministically") {
  Pipeline p;
  REQUIRE(p.simulate().code == 0);
  test::write_text(p.queries, "point_id,x,y\n0,80,60\n");
  REQUIRE(p.track().code == 0);
  const std::string a = (p.dir / "a.svg").string(), b = (p.dir / "b.svg").string();
  CHECK(run({"plot", "--traj", p.traj, "--events", p.events, "-o", a}).code == 0);
  CHECK(run({"plot", "--traj", p.traj, "--events", p.events, "-o", b}).code == 0);
  const std::string svg = io::read_file(a);
  CHECK(svg == io::read_file(b));
  std::size_t polylines = 0;
  for (auto at = svg.find("<polyline"); at != std::string::npos; at = svg.find("<polyline", at + 1)) ++polylines;
  CHECK(polylines == 1);

  test::write_text(p.traj, "");
  CHECK(run({"plot", "--traj", p.traj, "--events", p.events, "-o", a}).code == 0);
  CHECK(io::read_file(a).find("<polyline") == std::string::npos);
  CHECK(run({"plot", "--traj", p.traj, "--events", p.events, "-o", a, "--no-overwrite"}).code == 1);
  CHECK(run({"plot", "--traj", p.traj, "--events", p.events, "-o", (p.dir / "missing" / "x.svg").string()}).code == 1);
}
