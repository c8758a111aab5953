#include <doctest.h>

#include <cmath>

#include "trajdiff/errors.hpp"
#include "trajdiff/polar.hpp"
#include "trajdiff/rng.hpp"

using namespace trajdiff;

TEST_CASE("second_derivative of straight constant-velocity motion is zero") {
  std::vector<Vec2> p{{0, 0}, {1, 0}, {2, 0}};
  auto a = second_derivative(p, 1.0);
  REQUIRE(a.size() == 3);
  for (const auto& v : a) {
    CHECK(v.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(v.y == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("second_derivative interior stencil by hand") {
  std::vector<Vec2> p{{0, 0}, {0, 0}, {1, 0}};
  auto a = second_derivative(p, 1.0);
  CHECK(a[1].x == doctest::Approx(1.0));
  CHECK(a[1].y == doctest::Approx(0.0));
}

TEST_CASE("second_derivative matches the analytic value on a quadratic path") {
  // p(t) = (t^2, 0): second derivative is exactly (2, 0); the central and the
  // four-point one-sided stencils are both exact on polynomials of degree <= 3
  std::vector<Vec2> p;
  for (int t = 0; t <= 5; ++t) p.push_back({static_cast<double>(t * t), 0.0});
  auto a = second_derivative(p, 1.0);
  for (const auto& v : a) {
    CHECK(v.x == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(v.y == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("second_derivative needs at least three positions") {
  std::vector<Vec2> p{{0, 0}, {1, 0}};
  CHECK_THROWS_AS(second_derivative(p, 1.0), DataError);
}

TEST_CASE("second_derivative of affine paths is zero everywhere") {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    Vec2 x0{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    Vec2 v{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<Vec2> p;
    for (int t = 0; t < 8; ++t) p.push_back(x0 + v * (0.4 * t));
    for (const auto& acc : second_derivative(p, 0.4)) {
      CHECK(std::abs(acc.x) < 1e-9);
      CHECK(std::abs(acc.y) < 1e-9);
    }
  }
}

TEST_CASE("accel_to_polar basics") {
  auto [t1, r1] = accel_to_polar(1.0, 0.0, 1e-300);
  CHECK(t1 == doctest::Approx(0.0));
  CHECK(r1 == doctest::Approx(1.0));

  auto [t2, r2] = accel_to_polar(1.0, 1.0, 1e-300);
  CHECK(t2 == doctest::Approx(kPi / 4));
  CHECK(r2 == doctest::Approx(std::sqrt(2.0)));

  auto [t3, r3] = accel_to_polar(0.0, 0.0, 1e-6);
  CHECK(t3 == doctest::Approx(0.0));
  CHECK(r3 == doctest::Approx(1e-3));
}

TEST_CASE("accel_to_polar round-trips within the eps-induced error") {
  Rng rng(5);
  const double eps = 1e-6;
  for (int rep = 0; rep < 10000; ++rep) {
    double ax = rng.uniform(-3, 3), ay = rng.uniform(-3, 3);
    auto [theta, r] = accel_to_polar(ax, ay, eps);
    CHECK(theta > -kPi);
    CHECK(theta <= kPi);
    CHECK(r > 0.0);
    CHECK(std::abs(r * std::cos(theta) - ax) <= std::sqrt(eps) + 1e-12);
    CHECK(std::abs(r * std::sin(theta) - ay) <= std::sqrt(eps) + 1e-12);
  }
}

TEST_CASE("residuals_to_increments") {
  PolarResiduals res;
  res.d_cos = {1.0, 1.0, 1.0};
  res.d_sin = {0.0, 0.0, 0.0};
  res.d_r_raw = {0.0, -20.0, 5.0};
  auto [d_theta, d_r] = residuals_to_increments(res);
  CHECK(d_theta[0] == doctest::Approx(0.0));
  CHECK(d_r[0] == doctest::Approx(std::log(2.0)));
  // softplus(-20) = log1p(exp(-20)), strictly positive
  CHECK(d_r[1] == doctest::Approx(2.0612e-9).epsilon(1e-3));
  CHECK(d_r[1] > 0.0);
  CHECK(d_r[2] > 0.0);
}

TEST_CASE("softplus is strictly positive and monotone") {
  Rng rng(17);
  double prev_x = -40.0, prev_y = softplus(prev_x);
  CHECK(prev_y > 0.0);
  for (int i = 0; i < 1000; ++i) {
    double x = -40.0 + 0.08 * i;
    double y = softplus(x);
    CHECK(y > 0.0);
    CHECK(y >= prev_y);
    prev_y = y;
  }
}

TEST_CASE("wrap_angle stays in (-pi, pi] and is 2*pi periodic") {
  Rng rng(23);
  for (int i = 0; i < 10000; ++i) {
    double a = rng.uniform(-50.0, 50.0);
    double w = wrap_angle(a);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::abs(wrap_angle(a + kTwoPi) - w) < 1e-9);
  }
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
}

TEST_CASE("accumulate_polar identity and wrapping arithmetic") {
  auto seq = accumulate_polar(0.5, 2.0, {0, 0, 0}, {0, 0, 0});
  for (double t : seq.theta) CHECK(t == doctest::Approx(0.5));
  for (double r : seq.radius) CHECK(r == doctest::Approx(2.0));

  auto seq2 = accumulate_polar(0.0, 0.0, {kPi / 2, kPi / 2, kPi / 2, kPi / 2}, {0, 0, 0, 0});
  CHECK(seq2.theta[0] == doctest::Approx(kPi / 2));
  CHECK(seq2.theta[1] == doctest::Approx(kPi));
  CHECK(seq2.theta[2] == doctest::Approx(-kPi / 2));
  CHECK(seq2.theta[3] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("accumulate_polar matches a cumulative-sum oracle under wrap equivalence") {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    double theta0 = rng.uniform(-kPi, kPi);
    double r0 = rng.uniform(0, 2);
    std::vector<double> d_theta(12), d_r(12);
    for (int t = 0; t < 12; ++t) {
      d_theta[static_cast<size_t>(t)] = rng.uniform(-2, 2);
      d_r[static_cast<size_t>(t)] = rng.uniform(0, 0.5);
    }
    auto seq = accumulate_polar(theta0, r0, d_theta, d_r);
    double acc_t = theta0, acc_r = r0;
    for (int t = 0; t < 12; ++t) {
      acc_t += d_theta[static_cast<size_t>(t)];
      acc_r += d_r[static_cast<size_t>(t)];
      // wrapped once at the end vs per-step wrapping: equal modulo 2*pi
      CHECK(std::abs(wrap_angle(seq.theta[static_cast<size_t>(t)] - acc_t)) < 1e-9);
      CHECK(seq.radius[static_cast<size_t>(t)] == doctest::Approx(acc_r).epsilon(1e-12));
      if (t > 0) CHECK(seq.radius[static_cast<size_t>(t)] >= seq.radius[static_cast<size_t>(t - 1)]);
    }
  }
}

TEST_CASE("polar_init_from_obs on straight motion gives the eps floor") {
  // dyadic spacing keeps the stencil cancellation exact, so theta falls back
  // to the atan2(0, 0) = 0 convention
  std::vector<Vec2> obs;
  for (int t = 0; t < 8; ++t) obs.push_back({0.25 * t, 0.0});
  auto [theta0, r0] = polar_init_from_obs(obs, 0.4, 1e-6);
  CHECK(theta0 == doctest::Approx(0.0));
  CHECK(r0 == doctest::Approx(1e-3));
}

TEST_CASE("polar_init_from_obs picks up a leftward acceleration") {
  // positions with constant acceleration (0, +a)
  const double a = 0.5, dt = 0.4;
  std::vector<Vec2> obs;
  for (int t = 0; t < 8; ++t) {
    double time = dt * t;
    obs.push_back({1.0 * time, 0.5 * a * time * time});
  }
  auto [theta0, r0] = polar_init_from_obs(obs, dt, 1e-12);
  CHECK(theta0 == doctest::Approx(kPi / 2).epsilon(1e-6));
  CHECK(r0 == doctest::Approx(a).epsilon(1e-6));
}

TEST_CASE("polar_init_from_obs matches circle kinematics within 5% at dt=0.4") {
  // radius 2 m, angular velocity 0.5 rad/s: centripetal acceleration 0.5 m/s^2
  const double R = 2.0, omega = 0.5, dt = 0.4;
  std::vector<Vec2> obs;
  for (int t = 0; t < 8; ++t) {
    double ang = omega * dt * t;
    obs.push_back({R * std::cos(ang), R * std::sin(ang)});
  }
  auto [theta0, r0] = polar_init_from_obs(obs, dt, 1e-12);
  const double a_true = omega * omega * R;
  // acceleration points from the final position toward the center
  const double final_ang = omega * dt * 7;
  const double theta_true = wrap_angle(final_ang + kPi);
  CHECK(std::abs(r0 - a_true) / a_true < 0.05);
  CHECK(std::abs(wrap_angle(theta0 - theta_true)) < 0.05);
}

TEST_CASE("ground_truth_intent on constant velocity future") {
  TrajectoryWindow w;
  for (int t = 0; t < 8; ++t) w.obs.push_back({0.3 * t, 0.1 * t});
  for (int t = 0; t < 12; ++t) w.fut.push_back({0.3 * (8 + t), 0.1 * (8 + t)});
  auto seq = ground_truth_intent(w, 0.4, 1e-6);
  REQUIRE(seq.theta.size() == 12);
  REQUIRE(seq.radius.size() == 12);
  for (double r : seq.radius) CHECK(r == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(seq.origin.x == doctest::Approx(0.3 * 7));
}

TEST_CASE("ground_truth_intent crosses pi/2 at a sharp turn") {
  // straight along +x, one 90-degree corner, then straight along +y; the
  // oracle below recomputes the central difference at the corner by hand
  const double dt = 1.0;
  TrajectoryWindow w;
  for (int t = 0; t < 8; ++t) w.obs.push_back({static_cast<double>(t), 0.0});
  // future continues +x for 4 steps, corner, then +y
  std::vector<Vec2> fut;
  for (int t = 1; t <= 5; ++t) fut.push_back({7.0 + t, 0.0});
  for (int t = 1; t <= 7; ++t) fut.push_back({12.0, static_cast<double>(t)});
  w.fut = fut;
  REQUIRE(w.fut.size() == 12);

  auto seq = ground_truth_intent(w, dt, 1e-12);
  // corner is fut[4] = (12, 0): a = fut[5] - 2 fut[4] + fut[3] = (-1, 1)
  const double expect_theta = std::atan2(1.0, -1.0);  // 3*pi/4
  const double expect_r = std::sqrt(2.0);
  CHECK(seq.theta[4] == doctest::Approx(expect_theta));
  CHECK(seq.radius[4] == doctest::Approx(expect_r));
  // before the corner the path is straight: angle crosses pi/2 exactly at the turn
  CHECK(std::abs(seq.theta[2]) < 1e-6);
  CHECK(seq.theta[4] > kPi / 2);
}

TEST_CASE("ground_truth_intent output length is always t_pred") {
  Rng rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    TrajectoryWindow w;
    for (int t = 0; t < 8; ++t) w.obs.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    int t_pred = 1 + static_cast<int>(rng.below(15));
    for (int t = 0; t < t_pred; ++t) w.fut.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    auto seq = ground_truth_intent(w, 0.4, 1e-6);
    CHECK(seq.theta.size() == static_cast<size_t>(t_pred));
    CHECK(seq.radius.size() == static_cast<size_t>(t_pred));
  }
}
