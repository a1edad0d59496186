#include <doctest.h>

#include "evtap/metrics.hpp"
#include "evtap/tracker.hpp"
#include "scenes.hpp"

using namespace evtap;

namespace {

std::vector<TrackState> init_all(const GroundTruth& gt, const TrackConfig& cfg, int w, int h) {
  std::vector<TrackState> out;
  for (Point2 q : gt.query_points) out.push_back(init_state(q, cfg.steps, w, h));
  return out;
}

}  // namespace

TEST_CASE("error does not grow across iterations on the oscillating blob") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    const auto sc = test::sinusoid(seed);
    auto [stream, gt] = simulate(sc.scene, sc.sim);
    TrackConfig cfg;
    const auto seq = prepare_surfaces(stream, sc.sim.window(), cfg);
    auto states = init_all(gt, cfg, stream.width(), stream.height());
    double prev = test::mean_error(states, gt);
    for (int k = 0; k < cfg.iterations; ++k) {
      CAPTURE(k);
      for (auto& s : states) s = iterate(s, seq, cfg);
      const double now = test::mean_error(states, gt);
      CHECK(now <= prev);
      prev = now;
    }
  }
}

TEST_CASE("guidance does not raise the median error on the oscillating blob") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    const auto sc = test::sinusoid(seed);
    auto [stream, gt] = simulate(sc.scene, sc.sim);
    std::vector<Query> queries;
    for (std::size_t q = 0; q < gt.query_points.size(); ++q)
      queries.push_back({static_cast<int>(q), gt.query_points[q]});
    auto run = [&](bool guidance) {
      TrackConfig cfg;
      cfg.use_guidance = guidance;
      std::vector<Trajectory> out;
      for (auto& r : track_batch(queries, stream, sc.sim.window(), cfg, 4)) out.push_back(*r.trajectory);
      return mte(test::eval_pairs(out, gt));
    };
    const double guided = run(true);
    const double plain = run(false);
    CAPTURE(guided);
    CAPTURE(plain);
    CHECK(guided <= plain);
  }
}
