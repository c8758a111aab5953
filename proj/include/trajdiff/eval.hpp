#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "trajdiff/data.hpp"

namespace trajdiff {

using Trajectory = std::vector<Vec2>;

struct SceneScore {
  std::string scene;
  double ade = 0.0;
  double fde = 0.0;
  long windows = 0;
};

struct EvalReport {
  std::vector<SceneScore> scenes;
  double avg_ade = 0.0;  // arithmetic mean over scenes
  double avg_fde = 0.0;
  int n_samples = 0;
  std::string config_digest;

  std::string table() const;    // aligned "ADE / FDE" cells
  std::string to_json() const;  // machine-readable record
};

double ade(const Trajectory& pred, const Trajectory& gt);
double fde(const Trajectory& pred, const Trajectory& gt);

/// Per-metric minimum over samples (the two minima may come from different samples).
std::pair<double, double> best_of_n(const std::vector<Trajectory>& preds, const Trajectory& gt);

// Produces world-coordinate predictions for one window; the seed is derived
// per window so results do not depend on evaluation order or batching.
using WindowSampler =
    std::function<std::vector<Trajectory>(const TrajectoryWindow& w, int n, uint64_t seed)>;

/// Mean best-of-n ADE/FDE per scene plus the cross-scene average.
EvalReport evaluate_split(const WindowSampler& sampler, const std::vector<TrajectoryWindow>& windows,
                          int n, uint64_t seed, const std::string& config_digest = "");

}  // namespace trajdiff
