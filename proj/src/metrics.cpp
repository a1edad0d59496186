#include "evtap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "evtap/errors.hpp"
#include "evtap/io_util.hpp"

namespace evtap {

namespace {

void check_shape(const EvalPair& p) {
  if (p.pred.size() != p.gt.size() || (!p.valid.empty() && p.valid.size() != p.gt.size()))
    throw ConfigError("prediction, ground truth and validity mask differ in length");
  if (p.gt.empty()) throw ConfigError("trajectory has no steps");
}

std::vector<double> valid_errors(std::span<const EvalPair> pairs) {
  std::vector<double> errs;
  for (const auto& p : pairs) {
    check_shape(p);
    for (int t = 0; t < p.steps(); ++t)
      if (p.is_valid(t)) errs.push_back(p.error(t));
  }
  if (errs.empty()) throw Error("no valid steps to evaluate");
  return errs;
}

}  // namespace

double delta_avg(std::span<const EvalPair> pairs, std::span<const double> thresholds) {
  const auto errs = valid_errors(pairs);
  if (thresholds.empty()) throw ConfigError("delta_avg needs at least one threshold");
  double acc = 0.0;
  for (double theta : thresholds) {
    const auto inliers = std::count_if(errs.begin(), errs.end(), [&](double e) { return e < theta; });
    acc += static_cast<double>(inliers) / static_cast<double>(errs.size());
  }
  return acc / static_cast<double>(thresholds.size());
}

double mte(std::span<const EvalPair> pairs) {
  auto errs = valid_errors(pairs);
  std::sort(errs.begin(), errs.end());
  const std::size_t n = errs.size();
  return n % 2 == 1 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
}

double survival(const EvalPair& pair, double theta) {
  check_shape(pair);
  const int T = pair.steps();
  for (int t = 0; t < T; ++t)
    if (pair.is_valid(t) && pair.error(t) > theta) return static_cast<double>(t) / T;
  return 1.0;
}

double feature_age(const EvalPair& pair, int max_threshold) {
  if (max_threshold < 1) throw ConfigError("feature age needs thresholds >= 1");
  double acc = 0.0;
  for (int theta = 1; theta <= max_threshold; ++theta) acc += survival(pair, theta);
  return acc / max_threshold;
}

double expected_feature_age(std::span<const EvalPair> pairs, const EfaOptions& opts) {
  if (pairs.empty()) throw ConfigError("expected feature age needs at least one track");
  double stable_sum = 0.0;
  int stable = 0;
  for (const auto& p : pairs) {
    const double fa = feature_age(p, opts.max_threshold);
    if (fa > opts.stable_above) {
      stable_sum += fa;
      ++stable;
    }
  }
  if (stable == 0) return 0.0;
  return (static_cast<double>(stable) / pairs.size()) * (stable_sum / stable);
}

double weighted_mae(const EvalPair& pair, double gamma) {
  check_shape(pair);
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  const int T = pair.steps();
  double loss = 0.0;
  for (int i = 1; i <= T; ++i) {
    const int t = i - 1;
    if (!pair.is_valid(t)) continue;
    const double l1 = std::abs(pair.pred[t].x - pair.gt[t].x) + std::abs(pair.pred[t].y - pair.gt[t].y);
    loss += std::pow(gamma, T - i) * l1;
  }
  return loss;
}

MetricsReport evaluate(std::span<const EvalPair> pairs, const MetricParams& params) {
  if (pairs.empty()) throw Error("no trajectories to evaluate");
  MetricsReport r;
  r.params = params;
  r.points = static_cast<int>(pairs.size());
  r.steps = pairs.front().steps();
  r.delta_avg = delta_avg(pairs);
  r.mte = mte(pairs);
  for (const auto& p : pairs) {
    r.survival += survival(p, params.survival_theta);
    r.fa += feature_age(p, params.efa.max_threshold);
    r.weighted_mae += weighted_mae(p, params.gamma);
  }
  r.survival /= r.points;
  r.fa /= r.points;
  r.weighted_mae /= r.points;
  r.efa = expected_feature_age(pairs, params.efa);
  return r;
}

std::string format_report_table(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "points: %d  steps: %d\n"
                "%-14s %12s\n"
                "%-14s %12.6f\n"
                "%-14s %12.6f\n"
                "%-14s %12.6f  (theta=%g)\n"
                "%-14s %12.6f  (thresholds 1..%d)\n"
                "%-14s %12.6f\n"
                "%-14s %12.6f  (gamma=%g)\n",
                r.points, r.steps, "metric", "value", "delta_avg", r.delta_avg, "mte_px", r.mte,
                "survival", r.survival, r.params.survival_theta, "feature_age", r.fa,
                r.params.efa.max_threshold, "efa", r.efa, "weighted_mae", r.weighted_mae,
                r.params.gamma);
  return buf;
}

std::string format_report_csv(const MetricsReport& r) {
  std::string out = "metric,value,param\n";
  auto row = [&](const char* name, double v, const std::string& param) {
    out += std::string(name) + ',' + io::fixed(v, 9) + ',' + param + '\n';
  };
  row("delta_avg", r.delta_avg, "1|2|4|8|16");
  row("mte", r.mte, "");
  row("survival", r.survival, "theta=" + io::fixed(r.params.survival_theta, 3));
  row("feature_age", r.fa, "max_threshold=" + std::to_string(r.params.efa.max_threshold));
  row("efa", r.efa, "stable_above=" + io::fixed(r.params.efa.stable_above, 3));
  row("weighted_mae", r.weighted_mae,
      "gamma=" + io::fixed(r.params.gamma, 3) + " T=" + std::to_string(r.steps));
  return out;
}

}  // namespace evtap
