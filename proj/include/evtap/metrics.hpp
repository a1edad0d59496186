#pragma once

#include <span>
#include <string>
#include <vector>

#include "evtap/geometry.hpp"

namespace evtap {

/// Predicted and ground-truth positions for one point. An empty `valid`
/// means every step is valid.
struct EvalPair {
  std::vector<Point2> pred;
  std::vector<Point2> gt;
  std::vector<bool> valid;

  int steps() const { return static_cast<int>(gt.size()); }
  bool is_valid(int t) const { return valid.empty() || valid[static_cast<std::size_t>(t)]; }
  double error(int t) const { return distance(pred[t], gt[t]); }
};

inline const std::vector<double> kDeltaThresholds{1.0, 2.0, 4.0, 8.0, 16.0};

/// Mean over thresholds of the fraction of valid steps with error < theta.
double delta_avg(std::span<const EvalPair> pairs,
                 std::span<const double> thresholds = kDeltaThresholds);

/// Median L2 error over all valid steps (mean of the central two for even counts).
double mte(std::span<const EvalPair> pairs);

/// t*/T where t* is the first valid step with error > theta (T if none).
double survival(const EvalPair& pair, double theta);

/// Mean over theta = 1 .. max_threshold of survival(pair, theta).
double feature_age(const EvalPair& pair, int max_threshold = 31);

struct EfaOptions {
  int max_threshold = 31;
  /// A track counts as stable when its feature age exceeds this value.
  double stable_above = 0.0;
};

/// (stable / total) * mean feature age over stable tracks.
double expected_feature_age(std::span<const EvalPair> pairs, const EfaOptions& opts = {});

/// sum_{i=1..T} gamma^(T-i) * |e_i|_1 over valid steps.
double weighted_mae(const EvalPair& pair, double gamma);

struct MetricParams {
  double survival_theta = 50.0;
  double gamma = 0.8;
  EfaOptions efa;
};

struct MetricsReport {
  MetricParams params;
  int points = 0;
  int steps = 0;
  double delta_avg = 0.0;
  double mte = 0.0;
  double survival = 0.0;  // mean over points
  double fa = 0.0;        // mean over points
  double efa = 0.0;
  double weighted_mae = 0.0;  // mean over points
};

MetricsReport evaluate(std::span<const EvalPair> pairs, const MetricParams& params = {});

std::string format_report_table(const MetricsReport& report);
/// `metric,value,param` rows.
std::string format_report_csv(const MetricsReport& report);

}  // namespace evtap
