#include "evtap/motion_guidance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "evtap/io_util.hpp"

namespace evtap {

namespace {

struct FitOutcome {
  std::optional<PlaneFit> fit;
  const char* reason = nullptr;
};

struct Sample {
  double x, y, t, w;
};

double plane_time(const Eigen::Vector4d& c, const Sample& s) {
  return -(c(0) * s.x + c(1) * s.y + c(3)) / c(2);
}

FitOutcome solve(const std::vector<Sample>& samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (n < 4) return {std::nullopt, "fewer than 4 valid samples"};

  double mean_t = 0.0, w_sum = 0.0, t_min = samples[0].t, t_max = samples[0].t;
  for (const auto& s : samples) {
    mean_t += s.w * s.t;
    w_sum += s.w;
    t_min = std::min(t_min, s.t);
    t_max = std::max(t_max, s.t);
  }
  mean_t /= w_sum;
  if (t_max - t_min <= 1e-12) return {std::nullopt, "all timestamps identical"};

  Eigen::MatrixX4d A(n, 4);
  for (Eigen::Index i = 0; i < n; ++i)
    A.row(i) = std::sqrt(samples[i].w) *
               Eigen::RowVector4d(samples[i].x, samples[i].y, samples[i].t - mean_t, 1.0);
  Eigen::JacobiSVD<Eigen::MatrixX4d> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector4d sv = svd.singularValues();
  if (sv(2) <= 1e-9 * sv(0)) return {std::nullopt, "rank-deficient neighborhood"};

  Eigen::Vector4d coeffs = svd.matrixV().col(3);
  // Fix the sign so identical inputs always give identical coefficients.
  if (coeffs(2) < 0.0 || (coeffs(2) == 0.0 && coeffs(0) < 0.0)) coeffs = -coeffs;

  PlaneFit fit;
  for (int k = 0; k < 4; ++k) {
    fit.coeffs[k] = coeffs(k);
    fit.singular_values[k] = sv(k);
  }
  fit.n_support = static_cast<int>(n);
  fit.support = w_sum;
  fit.mean_t = mean_t;
  if (std::abs(coeffs(2)) > 1e-9) {
    double ss = 0.0;
    for (const auto& s : samples) {
      const double r = (s.t - mean_t) - plane_time(coeffs, s);
      ss += s.w * r * r;
    }
    fit.residual = std::sqrt(ss / w_sum);
  } else {
    fit.residual = 1.0;
  }
  return {fit, nullptr};
}

FitOutcome fit_impl(const TimeSurface& ts, Point2 center, int radius) {
  if (radius < 1) return {std::nullopt, "fit radius must be >= 1"};
  if (!center.finite()) return {std::nullopt, "fit center is not finite"};
  // Window weights fall linearly from 1 at distance r to 0 at r + 1 on each
  // axis, so the fit varies continuously with a sub-pixel center.
  const auto taper = [radius](double d) { return std::clamp(radius + 1.0 - std::abs(d), 0.0, 1.0); };
  const long x0 = static_cast<long>(std::floor(center.x)) - radius;
  const long y0 = static_cast<long>(std::floor(center.y)) - radius;

  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(2 * radius + 2) * (2 * radius + 2));
  for (long y = y0; y <= y0 + 2 * radius + 1; ++y) {
    if (y < 0 || y >= ts.height()) continue;
    for (long x = x0; x <= x0 + 2 * radius + 1; ++x) {
      if (x < 0 || x >= ts.width()) continue;
      const double w = taper(x - center.x) * taper(y - center.y);
      if (w <= 0.0) continue;
      const double t = ts.latest(static_cast<int>(x), static_cast<int>(y));
      if (t > 0.0) samples.push_back({x - center.x, y - center.y, t, w});
    }
  }
  return solve(samples);
}

}  // namespace

std::optional<PlaneFit> try_fit_plane(const TimeSurface& ts, Point2 center, int radius) {
  return fit_impl(ts, center, radius).fit;
}

PlaneFit fit_plane(const TimeSurface& ts, Point2 center, int radius) {
  auto outcome = fit_impl(ts, center, radius);
  if (!outcome.fit) throw DegenerateFitError(std::string("degenerate plane fit: ") + outcome.reason);
  return *outcome.fit;
}

KinematicVector plane_to_velocity(const PlaneFit& fit, const GuidanceParams& params) {
  KinematicVector kv;
  kv.residual = fit.residual;
  kv.n_support = fit.n_support;
  const double norm = std::sqrt(fit.coeffs[0] * fit.coeffs[0] + fit.coeffs[1] * fit.coeffs[1] +
                                fit.coeffs[2] * fit.coeffs[2] + fit.coeffs[3] * fit.coeffs[3]);
  if (std::abs(fit.coeffs[2]) <= 1e-9 * norm) return kv;

  const Point2 g = fit.gradient();
  const double g2 = g.x * g.x + g.y * g.y;
  if (!(std::sqrt(g2) > 1e-12) || !(g2 + params.eps > 0.0)) return kv;

  Point2 v = (1.0 / (g2 + params.eps)) * g;
  const double speed = v.norm();
  if (!std::isfinite(speed)) return kv;
  if (speed > params.v_max) v = (params.v_max / speed) * v;
  kv.v = v;

  const double support =
      std::min(1.0, fit.support / std::max(params.full_support, 1));
  kv.weight = std::clamp(std::exp(-fit.residual / params.residual_scale) * support, 0.0, 1.0);
  return kv;
}

KinematicVector estimate_kinematics(const TimeSurface& ts, Point2 center,
                                    const GuidanceParams& params) {
  auto fit = try_fit_plane(ts, center, params.fit_radius);
  if (!fit) return {};
  return plane_to_velocity(*fit, params);
}

std::vector<KinematicVector> correct_kinematics(std::span<const KinematicVector> raw,
                                                int half_width) {
  const int T = static_cast<int>(raw.size());
  const int W = std::max(half_width, 0);
  std::vector<KinematicVector> out(raw.begin(), raw.end());
  for (int t = 0; t < T; ++t) {
    double kernel_sum = 0.0, weight_sum = 0.0, residual_sum = 0.0;
    Point2 acc{0.0, 0.0};
    for (int j = -W; j <= W; ++j) {
      const int s = t + j;
      if (s < 0 || s >= T) continue;
      const double k = static_cast<double>(W + 1 - std::abs(j)) / (W + 1);
      kernel_sum += k;
      const double w = k * raw[s].weight;
      if (w <= 0.0) continue;
      acc = acc + w * raw[s].v;
      weight_sum += w;
      residual_sum += w * raw[s].residual;
    }
    KinematicVector& o = out[t];
    if (weight_sum > 0.0) {
      o.v = (1.0 / weight_sum) * acc;
      o.weight = std::clamp(weight_sum / kernel_sum, 0.0, 1.0);
      o.residual = residual_sum / weight_sum;
    } else {
      o.v = {0.0, 0.0};
      o.weight = 0.0;
    }
  }
  return out;
}

void save_kinematics_csv(std::span<const std::vector<KinematicVector>> per_point,
                         const std::filesystem::path& path) {
  std::string out = "point_id,step,vx,vy,weight,residual,n_support\n";
  for (std::size_t q = 0; q < per_point.size(); ++q)
    for (std::size_t k = 0; k < per_point[q].size(); ++k) {
      const auto& kv = per_point[q][k];
      out += std::to_string(q) + ',' + std::to_string(k) + ',' + io::fixed(kv.v.x) + ',' +
             io::fixed(kv.v.y) + ',' + io::fixed(kv.weight) + ',' + io::fixed(kv.residual) +
             ',' + std::to_string(kv.n_support) + '\n';
    }
  io::write_file_atomic(path, out);
}

}  // namespace evtap
