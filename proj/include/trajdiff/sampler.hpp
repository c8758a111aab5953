#pragma once

#include "trajdiff/diffusion.hpp"
#include "trajdiff/eval.hpp"
#include "trajdiff/pipeline.hpp"

namespace trajdiff {

// Guided DDIM sampling over a trained (or freshly initialized) model.
// Diversity comes only from the per-sample starting noise; the chain itself is
// deterministic. Seeds derive from (window seed, sample index), so results are
// independent of batch grouping.
class ModelSampler {
 public:
  ModelSampler(const Model& model, const ExperimentConfig& cfg);

  /// n world-coordinate trajectories for one window.
  std::vector<Trajectory> sample_window(const TrajectoryWindow& w, int n, uint64_t seed) const;

  /// Batched best-of-n evaluation over every window (same protocol and seed
  /// derivation as evaluate_split).
  EvalReport evaluate(const std::vector<TrajectoryWindow>& windows, int n, uint64_t seed,
                      int batch_windows = 16) const;

  WindowSampler as_window_sampler() const;

  const DiffusionSchedule& schedule() const { return schedule_; }

 private:
  // per (window, sample) trajectories for a group of windows
  std::vector<std::vector<Trajectory>> sample_group(
      const std::vector<const TrajectoryWindow*>& windows, const std::vector<uint64_t>& seeds,
      int n) const;

  const Model& model_;
  ExperimentConfig cfg_;
  DiffusionSchedule schedule_;
};

}  // namespace trajdiff
