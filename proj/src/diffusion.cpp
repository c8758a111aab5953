#include "trajdiff/diffusion.hpp"

#include <cmath>

#include "trajdiff/errors.hpp"

namespace trajdiff {

std::vector<int> DiffusionSchedule::sampling_steps() const {
  std::vector<int> steps;
  for (int k = K; k >= 0; k -= gamma) steps.push_back(k);
  return steps;
}

DiffusionSchedule make_schedule(int K, double beta_start, double beta_end, int gamma) {
  if (K < 1) throw DataError("make_schedule: K must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw DataError("make_schedule: need 0 < beta_start <= beta_end < 1");
  }
  if (gamma < 1 || K % gamma != 0) {
    throw DataError("make_schedule: gamma must divide K");
  }
  DiffusionSchedule s;
  s.K = K;
  s.gamma = gamma;
  s.beta.resize(static_cast<size_t>(K));
  s.alpha.resize(static_cast<size_t>(K));
  s.alpha_bar.resize(static_cast<size_t>(K));
  double prod = 1.0;
  for (int i = 0; i < K; ++i) {
    double b = K == 1 ? beta_start
                      : beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                                         static_cast<double>(K - 1);
    s.beta[static_cast<size_t>(i)] = b;
    s.alpha[static_cast<size_t>(i)] = 1.0 - b;
    prod *= 1.0 - b;
    s.alpha_bar[static_cast<size_t>(i)] = prod;
  }
  return s;
}

MatrixXd forward_sample(const MatrixXd& y0, int k, const MatrixXd& noise,
                        const DiffusionSchedule& s) {
  if (k < 0 || k > s.K) throw DataError("forward_sample: step out of range");
  const double ab = s.abar(k);
  return std::sqrt(ab) * y0 + std::sqrt(1.0 - ab) * noise;
}

MatrixXd x0_estimate(const MatrixXd& y_k, int k, const MatrixXd& eps, const DiffusionSchedule& s) {
  const double ab = s.abar(k);
  return (y_k - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
}

MatrixXd ddim_step(const MatrixXd& y_k, int k, const MatrixXd& eps, const DiffusionSchedule& s) {
  if (k < s.gamma) throw DataError("ddim_step: step below stride");
  const double ab_prev = s.abar(k - s.gamma);
  return std::sqrt(ab_prev) * x0_estimate(y_k, k, eps, s) + std::sqrt(1.0 - ab_prev) * eps;
}

MatrixXd ddim_chain(MatrixXd y, const DiffusionSchedule& s, const DenoiseFn& denoise,
                    const DataResidualFn& data_residual) {
  for (int k = s.K; k > 0; k -= s.gamma) {
    MatrixXd eps = denoise(y, k);
    if (data_residual) {
      const double ab_prev = s.abar(k - s.gamma);
      MatrixXd x0 = x0_estimate(y, k, eps, s) + data_residual(y, k);
      y = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps;
    } else {
      y = ddim_step(y, k, eps, s);
    }
  }
  return y;
}

std::vector<MatrixXd> sample_trajectories(const DiffusionSchedule& s, const DenoiseFn& denoise,
                                          int rows, int cols, int n, uint64_t seed,
                                          const DataResidualFn& data_residual) {
  std::vector<MatrixXd> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(i)));
    MatrixXd y(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) y(r, c) = rng.normal();
    }
    out.push_back(ddim_chain(std::move(y), s, denoise, data_residual));
  }
  return out;
}

}  // namespace trajdiff
