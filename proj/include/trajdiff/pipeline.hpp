#pragma once

#include <optional>
#include <vector>

#include "trajdiff/config.hpp"
#include "trajdiff/data.hpp"
#include "trajdiff/model.hpp"
#include "trajdiff/polar.hpp"

namespace trajdiff {

// Model-side view of a batch of windows. Coordinates are centered on the last
// observed position; diffusion/endpoint tensors additionally carry data_scale,
// while polar quantities stay in meters.
struct WindowBatch {
  Eigen::Index B = 0;
  Mat obs_feats;     // (B*t_obs x 4) scaled positions + velocities
  Mat theta0, r0;    // (B x 1) polar state at the last observed frame
  Mat gt_theta;      // (B*t_pred x 1) supervision angles
  Mat gt_r;          // (B*t_pred x 1)
  Mat y0;            // (B*t_pred x 2) scaled future
  Mat gt_endpoint;   // (B x 2) scaled
  std::vector<Vec2> offsets;
  std::vector<const TrajectoryWindow*> windows;
};

WindowBatch make_batch(const std::vector<const TrajectoryWindow*>& windows,
                       const ExperimentConfig& cfg);

struct PredictorForwards {
  Var f_obs;
  std::optional<IntentForward> intent;       // when short-term guidance is enabled
  std::optional<EndpointForward> endpoints;  // when long-term guidance is enabled
};

PredictorForwards run_predictors(const Model& model, const WindowBatch& batch,
                                 const ExperimentConfig& cfg, bool train);

// Applies the soft-mask fusion when enabled, otherwise passes the feature through.
Var fuse_condition(const Model& model, const Var& g, int modality, const ExperimentConfig& cfg,
                   bool train);

}  // namespace trajdiff
