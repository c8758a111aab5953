#pragma once

#include <utility>
#include <vector>

#include "trajdiff/data.hpp"
#include "trajdiff/geometry.hpp"

namespace trajdiff {

// Short-term intention as per-step (angle, magnitude) of acceleration,
// anchored at a reference origin.
struct PolarIntentSequence {
  std::vector<double> theta;   // radians in (-pi, pi]
  std::vector<double> radius;  // non-negative magnitudes
  Vec2 origin;
};

// Raw network outputs before conversion to scalar increments.
struct PolarResiduals {
  std::vector<double> d_cos;
  std::vector<double> d_sin;
  std::vector<double> d_r_raw;  // pre-softplus
};

/// Second temporal derivative of a 2-D path. Interior points use the central
/// stencil (p[t+1] - 2 p[t] + p[t-1]) / dt^2; endpoints use one-sided stencils
/// (second order when four points are available). Output length equals input length.
std::vector<Vec2> second_derivative(const std::vector<Vec2>& positions, double dt);

/// theta = atan2(ay, ax), r = sqrt(ax^2 + ay^2 + eps).
std::pair<double, double> accel_to_polar(double ax, double ay, double eps);

/// d_theta[t] = atan2(d_sin[t], d_cos[t]); d_r[t] = softplus(d_r_raw[t]).
std::pair<std::vector<double>, std::vector<double>> residuals_to_increments(
    const PolarResiduals& res);

/// theta[t] = wrap(theta0 + sum of d_theta up to t); radius[t] = r0 + running sum of d_r.
PolarIntentSequence accumulate_polar(double theta0, double r0, const std::vector<double>& d_theta,
                                     const std::vector<double>& d_r);

/// Polar state at the final observed frame.
std::pair<double, double> polar_init_from_obs(const std::vector<Vec2>& obs, double dt, double eps);

/// Supervision targets: acceleration-derived (theta, r) at every future step.
/// Computed over the observation tail joined with the future so the first
/// future step has a left neighbor.
PolarIntentSequence ground_truth_intent(const TrajectoryWindow& window, double dt, double eps);

}  // namespace trajdiff
