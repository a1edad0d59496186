#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "evtap/errors.hpp"
#include "evtap/geometry.hpp"
#include "evtap/time_surface.hpp"

namespace evtap {

/// Local velocity estimate in pixels per normalized window time unit.
struct KinematicVector {
  Point2 v;
  double weight = 0.0;    // reliability in [0, 1]
  double residual = 0.0;  // RMS fit residual, normalized time units
  int n_support = 0;      // pixels used in the fit
};

/// Tangent plane a*x + b*y + c*t + d = 0 with |(a,b,c,d)| = 1, x and y relative
/// to the fit center and t relative to the sample mean.
struct PlaneFit {
  std::array<double, 4> coeffs{};
  std::array<double, 4> singular_values{};  // descending
  double residual = 0.0;
  int n_support = 0;
  double support = 0.0;  // sum of window weights over the samples
  double mean_t = 0.0;   // weighted sample mean the t axis is centered on

  /// (dt/dx, dt/dy) = (-a/c, -b/c); undefined for c == 0.
  Point2 gradient() const { return {-coeffs[0] / coeffs[2], -coeffs[1] / coeffs[2]}; }
};

class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

struct GuidanceParams {
  int fit_radius = 3;
  double eps = 1e-6;
  double v_max = 16.0;          // px per window unit
  double residual_scale = 0.1;  // weight = exp(-residual / residual_scale) * support
  int full_support = 12;        // support count at which the support factor saturates
  int smoothing_half_width = 3;
};

/// Weighted least-squares plane through the fresher-polarity timestamps
/// within r pixels of center (tapering to zero weight at r + 1), via the
/// right singular vector of the smallest singular value. Returns nullopt for
/// degenerate neighborhoods
/// (fewer than 4 samples, constant timestamps, collinear support).
std::optional<PlaneFit> try_fit_plane(const TimeSurface& ts, Point2 center, int radius);

/// As try_fit_plane, throwing DegenerateFitError with the reason instead.
PlaneFit fit_plane(const TimeSurface& ts, Point2 center, int radius);

/// Normal-flow inversion v = g / (|g|^2 + eps) of the plane gradient g,
/// clamped to |v| <= v_max. Near-vertical or flat planes yield weight 0.
KinematicVector plane_to_velocity(const PlaneFit& fit, const GuidanceParams& params = {});

/// fit + inversion; a degenerate neighborhood yields a zero, weight-0 vector.
KinematicVector estimate_kinematics(const TimeSurface& ts, Point2 center,
                                    const GuidanceParams& params = {});

/// Reliability-weighted triangular smoothing over +-half_width steps.
/// Zero-weight inputs never contribute.
std::vector<KinematicVector> correct_kinematics(std::span<const KinematicVector> raw,
                                                int half_width = 3);

/// `point_id,step,vx,vy,weight,residual,n_support`.
void save_kinematics_csv(std::span<const std::vector<KinematicVector>> per_point,
                         const std::filesystem::path& path);

}  // namespace evtap
