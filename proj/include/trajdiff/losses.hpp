#pragma once

#include <utility>
#include <vector>

#include "trajdiff/graph.hpp"

namespace trajdiff {

using ad::Mat;
using ad::Var;

struct LossWeights {
  double lambda_theta = 0.5;
  double lambda_r = 0.25;
  double lambda_e = 1.0;
  double lambda_p = 0.5;
  double lambda_dif = 1.0;
};

// All losses reduce to 1x1 graph nodes so gradients flow to every network that
// produced the inputs. Shapes are (N*T x 1) for per-step sequences stacked
// over a batch, (N*L x 2) for endpoint candidates.

/// mean(1 - cos(pred - truth)); range [0, 2], invariant to 2*pi shifts.
Var loss_angle(const Var& pred_theta, const Var& true_theta);

/// mean squared error over every entry.
Var loss_radius(const Var& pred_r, const Var& true_r);

/// lambda_theta * angle + lambda_r * radius
Var loss_short(const Var& angle_part, const Var& radius_part, const LossWeights& w);

/// Winner-take-all endpoint regression: per item, MSE of the candidate closest
/// to the ground truth, averaged over items. Returns the loss and the winner
/// index per item.
std::pair<Var, std::vector<Eigen::Index>> loss_endpoint(const Var& candidates, const Mat& gt,
                                                        Eigen::Index L);

/// -log p[winner] + sum_{l != winner} log p[l], probabilities clamped to
/// [p_min, 1] before the logs; averaged over items.
Var loss_prob(const Var& probs, const std::vector<Eigen::Index>& winners, Eigen::Index L,
              double p_min = 1e-6);

/// lambda_e * endpoint + lambda_p * prob
Var loss_long(const Var& endpoint_part, const Var& prob_part, const LossWeights& w);

/// mean squared error between true and refined noise, over batch and coordinates.
Var loss_diffusion(const Var& true_noise, const Var& refined_noise);

/// short + long + lambda_dif * diffusion. Missing parts enter as zero scalars.
Var total_loss(const Var& short_part, const Var& long_part, const Var& dif_part,
               const LossWeights& w);

}  // namespace trajdiff
