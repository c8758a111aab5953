#include "trajdiff/losses.hpp"

#include <stdexcept>

namespace trajdiff {

namespace {
void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}
}  // namespace

Var loss_angle(const Var& pred_theta, const Var& true_theta) {
  check_same_shape(pred_theta, true_theta, "loss_angle");
  return ad::mean(ad::rsub_s(1.0, ad::cos_v(pred_theta - true_theta)));
}

Var loss_radius(const Var& pred_r, const Var& true_r) {
  check_same_shape(pred_r, true_r, "loss_radius");
  return ad::mean(ad::square(pred_r - true_r));
}

Var loss_short(const Var& angle_part, const Var& radius_part, const LossWeights& w) {
  return ad::mul_s(angle_part, w.lambda_theta) + ad::mul_s(radius_part, w.lambda_r);
}

std::pair<Var, std::vector<Eigen::Index>> loss_endpoint(const Var& candidates, const Mat& gt,
                                                        Eigen::Index L) {
  const Eigen::Index B = candidates.rows() / L;
  std::vector<Eigen::Index> winners(static_cast<size_t>(B));
  std::vector<Eigen::Index> rows(static_cast<size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_l = 0;
    for (Eigen::Index l = 0; l < L; ++l) {
      double d2 = (candidates.val().row(b * L + l) - gt.row(b)).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_l = l;
      }
    }
    winners[static_cast<size_t>(b)] = best_l;
    rows[static_cast<size_t>(b)] = b * L + best_l;
  }
  Var selected = ad::select_rows(candidates, rows);
  Var loss = ad::mean(ad::square(selected - ad::constant(gt)));
  return {loss, winners};
}

Var loss_prob(const Var& probs, const std::vector<Eigen::Index>& winners, Eigen::Index L,
              double p_min) {
  const Eigen::Index B = probs.rows() / L;
  Var logs = ad::log_v(ad::clamp_min(probs, p_min));
  // sum over all candidates minus twice the winner = -log p* + sum_{l != *} log p_l
  Var per_item_sum = ad::mul_s(ad::block_mean_rows(logs, L), static_cast<double>(L));
  std::vector<Eigen::Index> rows(static_cast<size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) rows[static_cast<size_t>(b)] = b * L + winners[static_cast<size_t>(b)];
  Var winner_logs = ad::select_rows(logs, rows);
  return ad::mean(per_item_sum - ad::mul_s(winner_logs, 2.0));
}

Var loss_long(const Var& endpoint_part, const Var& prob_part, const LossWeights& w) {
  return ad::mul_s(endpoint_part, w.lambda_e) + ad::mul_s(prob_part, w.lambda_p);
}

Var loss_diffusion(const Var& true_noise, const Var& refined_noise) {
  check_same_shape(true_noise, refined_noise, "loss_diffusion");
  return ad::mean(ad::square(true_noise - refined_noise));
}

Var total_loss(const Var& short_part, const Var& long_part, const Var& dif_part,
               const LossWeights& w) {
  return short_part + long_part + ad::mul_s(dif_part, w.lambda_dif);
}

}  // namespace trajdiff
