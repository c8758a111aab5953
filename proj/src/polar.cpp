#include "trajdiff/polar.hpp"

#include <cmath>

#include "trajdiff/errors.hpp"

namespace trajdiff {

std::vector<Vec2> second_derivative(const std::vector<Vec2>& p, double dt) {
  const size_t n = p.size();
  if (n < 3) throw DataError("second_derivative: need at least 3 positions");
  const double inv = 1.0 / (dt * dt);
  std::vector<Vec2> a(n);
  for (size_t t = 1; t + 1 < n; ++t) {
    a[t] = (p[t + 1] - p[t] * 2.0 + p[t - 1]) * inv;
  }
  if (n >= 4) {
    // second-order one-sided stencils
    a[0] = (p[0] * 2.0 - p[1] * 5.0 + p[2] * 4.0 - p[3]) * inv;
    a[n - 1] = (p[n - 1] * 2.0 - p[n - 2] * 5.0 + p[n - 3] * 4.0 - p[n - 4]) * inv;
  } else {
    a[0] = (p[2] - p[1] * 2.0 + p[0]) * inv;
    a[n - 1] = a[0];
  }
  return a;
}

std::pair<double, double> accel_to_polar(double ax, double ay, double eps) {
  double theta = std::atan2(ay, ax);
  if (theta <= -kPi) theta = kPi;  // atan2 returns -pi for (-x, -0.0); keep (-pi, pi]
  double r = std::sqrt(ax * ax + ay * ay + eps);
  return {theta, r};
}

std::pair<std::vector<double>, std::vector<double>> residuals_to_increments(
    const PolarResiduals& res) {
  const size_t n = res.d_cos.size();
  std::vector<double> d_theta(n), d_r(n);
  for (size_t t = 0; t < n; ++t) {
    d_theta[t] = std::atan2(res.d_sin[t], res.d_cos[t]);
    d_r[t] = softplus(res.d_r_raw[t]);
  }
  return {std::move(d_theta), std::move(d_r)};
}

PolarIntentSequence accumulate_polar(double theta0, double r0, const std::vector<double>& d_theta,
                                     const std::vector<double>& d_r) {
  PolarIntentSequence seq;
  const size_t n = d_theta.size();
  seq.theta.resize(n);
  seq.radius.resize(n);
  double th = theta0, r = r0;
  for (size_t t = 0; t < n; ++t) {
    th += d_theta[t];
    r += d_r[t];
    seq.theta[t] = wrap_angle(th);
    seq.radius[t] = r;
  }
  return seq;
}

std::pair<double, double> polar_init_from_obs(const std::vector<Vec2>& obs, double dt, double eps) {
  auto acc = second_derivative(obs, dt);
  return accel_to_polar(acc.back().x, acc.back().y, eps);
}

PolarIntentSequence ground_truth_intent(const TrajectoryWindow& window, double dt, double eps) {
  // Two observed frames prepended keep the first future step interior.
  std::vector<Vec2> path;
  const size_t tail = window.obs.size() >= 2 ? 2 : window.obs.size();
  path.insert(path.end(), window.obs.end() - tail, window.obs.end());
  path.insert(path.end(), window.fut.begin(), window.fut.end());

  auto acc = second_derivative(path, dt);
  PolarIntentSequence seq;
  seq.origin = window.obs.back();
  seq.theta.reserve(window.fut.size());
  seq.radius.reserve(window.fut.size());
  for (size_t t = tail; t < path.size(); ++t) {
    auto [theta, r] = accel_to_polar(acc[t].x, acc[t].y, eps);
    seq.theta.push_back(theta);
    seq.radius.push_back(r);
  }
  return seq;
}

}  // namespace trajdiff
