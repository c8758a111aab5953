#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "trajdiff/rng.hpp"

namespace trajdiff {

using Eigen::MatrixXd;

// Variance schedule for K noising steps plus the deterministic sampling stride.
// Index convention: arrays are 0-based, entry i describes step k = i + 1; the
// cumulative product at k = 0 is defined as 1.
struct DiffusionSchedule {
  int K = 0;
  int gamma = 1;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  double abar(int k) const { return k == 0 ? 1.0 : alpha_bar[static_cast<size_t>(k - 1)]; }

  // K, K - gamma, ..., gamma, 0
  std::vector<int> sampling_steps() const;
};

/// Linear beta interpolation over K steps. gamma must divide K.
DiffusionSchedule make_schedule(int K, double beta_start, double beta_end, int gamma);

/// y_k = sqrt(abar_k) y0 + sqrt(1 - abar_k) noise. Noise is an explicit argument.
MatrixXd forward_sample(const MatrixXd& y0, int k, const MatrixXd& noise,
                        const DiffusionSchedule& s);

/// x0-estimate implied by (y_k, eps) under the forward parameterization.
MatrixXd x0_estimate(const MatrixXd& y_k, int k, const MatrixXd& eps, const DiffusionSchedule& s);

/// Deterministic stride step: y_{k-gamma} from y_k and the refined noise.
MatrixXd ddim_step(const MatrixXd& y_k, int k, const MatrixXd& eps, const DiffusionSchedule& s);

// Per-step denoiser hook: callers bind the guided noise estimator here.
// Receives the current state and step k, returns the refined noise estimate.
using DenoiseFn = std::function<MatrixXd(const MatrixXd& y_k, int k)>;
// Optional data-space correction applied to the x0-estimate inside each stride
// step (the refine-to-data ablation); null when unused.
using DataResidualFn = std::function<MatrixXd(const MatrixXd& y_k, int k)>;

/// Run the full DDIM chain from one standard-normal draw.
MatrixXd ddim_chain(MatrixXd y_K, const DiffusionSchedule& s, const DenoiseFn& denoise,
                    const DataResidualFn& data_residual = nullptr);

/// n independent samples, each seeded from derive_seed(seed, sample index).
/// rows/cols give the state shape (t_pred x 2).
std::vector<MatrixXd> sample_trajectories(const DiffusionSchedule& s, const DenoiseFn& denoise,
                                          int rows, int cols, int n, uint64_t seed,
                                          const DataResidualFn& data_residual = nullptr);

}  // namespace trajdiff
