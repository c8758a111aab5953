#include "trajdiff/pipeline.hpp"

namespace trajdiff {

WindowBatch make_batch(const std::vector<const TrajectoryWindow*>& windows,
                       const ExperimentConfig& cfg) {
  WindowBatch b;
  b.B = static_cast<Eigen::Index>(windows.size());
  const Eigen::Index T = cfg.t_pred;
  const double s = cfg.data_scale;

  b.theta0 = Mat(b.B, 1);
  b.r0 = Mat(b.B, 1);
  b.gt_theta = Mat(b.B * T, 1);
  b.gt_r = Mat(b.B * T, 1);
  b.y0 = Mat(b.B * T, 2);
  b.gt_endpoint = Mat(b.B, 2);
  b.offsets.resize(static_cast<size_t>(b.B));
  b.windows = windows;

  std::vector<std::vector<Vec2>> scaled_obs(static_cast<size_t>(b.B));
  for (Eigen::Index i = 0; i < b.B; ++i) {
    auto [w, offset] = normalize_window(*windows[static_cast<size_t>(i)]);
    b.offsets[static_cast<size_t>(i)] = offset;

    auto& so = scaled_obs[static_cast<size_t>(i)];
    so.reserve(w.obs.size());
    for (const auto& p : w.obs) so.push_back(p * s);

    auto [th0, r0] = polar_init_from_obs(w.obs, cfg.dt, cfg.eps_polar);
    b.theta0(i, 0) = th0;
    b.r0(i, 0) = r0;

    auto gt = ground_truth_intent(w, cfg.dt, cfg.eps_polar);
    for (Eigen::Index t = 0; t < T; ++t) {
      b.gt_theta(i * T + t, 0) = gt.theta[static_cast<size_t>(t)];
      b.gt_r(i * T + t, 0) = gt.radius[static_cast<size_t>(t)];
      b.y0(i * T + t, 0) = w.fut[static_cast<size_t>(t)].x * s;
      b.y0(i * T + t, 1) = w.fut[static_cast<size_t>(t)].y * s;
    }
    b.gt_endpoint(i, 0) = w.fut.back().x * s;
    b.gt_endpoint(i, 1) = w.fut.back().y * s;
  }
  b.obs_feats = Model::obs_features(scaled_obs);
  return b;
}

PredictorForwards run_predictors(const Model& model, const WindowBatch& batch,
                                 const ExperimentConfig& cfg, bool train) {
  PredictorForwards f;
  f.f_obs = model.encode(batch.obs_feats, batch.B, train);
  if (cfg.enable_short) {
    f.intent = model.intent_forward(f.f_obs, batch.theta0, batch.r0, batch.B, train);
  }
  if (cfg.enable_long) {
    f.endpoints = model.endpoint_forward(f.f_obs, batch.B, train);
  }
  return f;
}

Var fuse_condition(const Model& model, const Var& g, int modality, const ExperimentConfig& cfg,
                   bool train) {
  if (!cfg.enable_softmask) return g;
  return model.soft_mask(g, modality, train);
}

}  // namespace trajdiff
