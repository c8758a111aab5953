#pragma once

#include <optional>
#include <vector>

#include "trajdiff/geometry.hpp"
#include "trajdiff/nn.hpp"

namespace trajdiff {

using ad::Mat;
using ad::Var;

struct ModelConfig {
  int t_obs = 8;
  int t_pred = 12;
  int d = 256;  // feature / condition width
  int L = 5;    // endpoint candidates
  int heads = 4;
  int enc_depth = 2;
  int intent_depth = 4;
  int endpoint_depth = 4;
  int den_width = 512;
  int den_depth = 4;
  int den_heads = 4;
  int ffn_mult = 2;
};

struct IntentForward {
  Var residuals;  // (B*t_pred x 3): d_cos, d_sin, d_r_raw
  Var theta;      // (B*t_pred x 1) accumulated, unwrapped (losses are wrap-invariant)
  Var radius;     // (B*t_pred x 1)
};

struct EndpointForward {
  Var points;  // (B*L x 2)
  Var probs;   // (B*L x 1), rows of each block sum to 1
};

// Soft-masked condition features plus the step embedding; absent modalities
// correspond to disabled guidance sources.
struct GuidanceVars {
  std::optional<Var> obs;        // (B x d)
  std::optional<Var> short_term; // (B x d)
  std::optional<Var> long_term;  // (B x d)
  Var step;                      // (B x d)
};

enum Modality { kObs = 0, kShort = 1, kLong = 2 };

class Model {
 public:
  Model(const ModelConfig& cfg, uint64_t seed);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }

  // Per-step position+velocity features for the encoder, stacked (B*t_obs x 4).
  static Mat obs_features(const std::vector<std::vector<Vec2>>& obs);

  Var encode(const Mat& obs_feats, Eigen::Index B, bool train) const;
  IntentForward intent_forward(const Var& f_obs, const Mat& theta0, const Mat& r0, Eigen::Index B,
                               bool train) const;
  EndpointForward endpoint_forward(const Var& f_obs, Eigen::Index B, bool train) const;

  Var cond_obs(const Var& f_obs, Eigen::Index B, bool train) const;
  Var cond_short(const Var& theta, const Var& radius, Eigen::Index B, bool train) const;
  Var cond_long(const Var& endpoint, bool train) const;
  Var soft_mask(const Var& g, int modality, bool train) const;
  Var step_embed(const std::vector<int>& ks, bool train) const;

  // Noise estimate (B*t_pred x 2) from the guided transformer.
  Var denoise(const GuidanceVars& g, const Var& y_k, Eigen::Index B, bool train) const;
  // Residual correction from the refinement head; zero at initialization.
  Var refine(const GuidanceVars& g, const Var& eps_or_y, Eigen::Index B, bool train) const;

 private:
  ModelConfig cfg_;
  nn::ParamStore params_;

  nn::Linear enc_in_;
  std::vector<nn::TransformerBlock> enc_blocks_;
  nn::LayerNorm enc_ln_;

  nn::Param* intent_slots_ = nullptr;
  std::vector<nn::TransformerBlock> intent_blocks_;
  nn::LayerNorm intent_ln_;
  nn::Linear intent_head_;

  nn::Param* endpoint_queries_ = nullptr;
  std::vector<nn::TransformerBlock> endpoint_blocks_;
  nn::LayerNorm endpoint_ln_;
  nn::Linear endpoint_point_h1_, endpoint_point_h2_;
  nn::Linear endpoint_prob_h1_, endpoint_prob_h2_;

  nn::Linear cond_obs_proj_;
  nn::Linear cond_short_h1_, cond_short_h2_;
  nn::Linear cond_long_h1_, cond_long_h2_;
  nn::Linear mask_h1_[3], mask_h2_[3];
  nn::Param* mask_token_[3] = {nullptr, nullptr, nullptr};
  nn::Linear step_proj_;

  nn::Linear den_in_;
  nn::Linear den_cond_proj_[4];  // obs, short, long, step token projections
  nn::Param* den_cond_pos_ = nullptr;
  std::vector<nn::TransformerBlock> den_blocks_;
  nn::LayerNorm den_ln_;
  nn::Linear den_head_;

  nn::Linear ref_h1_, ref_h2_, ref_out_;

  Mat enc_pos_;  // sinusoidal tables
  Mat den_pos_;
};

}  // namespace trajdiff
