#include "trajdiff/synthetic.hpp"

#include <cmath>

#include "trajdiff/rng.hpp"

namespace trajdiff {

Scene synthetic_scene(int n_agents, uint64_t seed, double dt, const std::string& name) {
  Scene scene;
  scene.name = name;
  scene.frame_interval = dt;
  scene.frame_step = 1;

  const int frames = 20;
  for (int a = 0; a < n_agents; ++a) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(a)));
    Vec2 pos{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};
    double heading = rng.uniform(-kPi, kPi);
    double speed = rng.uniform(0.8, 1.6);

    double kind = rng.uniform();
    double turn_rate = 0.0;
    bool stopping = false;
    if (kind < 0.3) {
      turn_rate = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.25, 0.6);
    } else if (kind < 0.5) {
      stopping = true;
    }

    for (int t = 0; t < frames; ++t) {
      scene.records.push_back({t, a, pos.x + rng.normal(0.0, 0.005), pos.y + rng.normal(0.0, 0.005)});
      double v = speed;
      if (stopping) {
        // decelerate smoothly to rest around frame 14
        double f = 1.0 - static_cast<double>(t) / 14.0;
        v = speed * std::max(0.0, f);
      }
      heading += turn_rate * dt;
      pos.x += v * std::cos(heading) * dt;
      pos.y += v * std::sin(heading) * dt;
    }
  }
  return scene;
}

double mean_future_displacement(const std::vector<TrajectoryWindow>& windows) {
  double sum = 0.0;
  for (const auto& w : windows) sum += dist(w.fut.back(), w.obs.back());
  return sum / static_cast<double>(windows.size());
}

}  // namespace trajdiff
