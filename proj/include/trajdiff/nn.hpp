#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajdiff/graph.hpp"
#include "trajdiff/rng.hpp"

namespace trajdiff::nn {

using ad::Mat;
using ad::Var;

struct Param {
  std::string name;
  Mat value;
  Mat grad;  // accumulated by backward(); cleared by zero_grad()
  Mat m, v;  // Adam moments
};

enum class Init { truncated_normal, zeros, ones };

// Owns every learnable array; iteration order is insertion order, which fixes
// the checkpoint layout and the Adam update order.
class ParamStore {
 public:
  Param& add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng,
             double stddev = 0.02);
  Param* find(const std::string& name);
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }

  void zero_grad();
  double grad_norm() const;
  // One adaptive-moment update; grads are pre-scaled by clip when the global
  // norm exceeds max_grad_norm (0 disables clipping).
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                 double max_grad_norm = 1.0);
  long step_count() const { return step_; }
  void set_step_count(long s) { step_ = s; }

  size_t total_size() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::unordered_map<std::string, Param*> by_name_;
  long step_ = 0;
};

// Leaf hookup: gradients accumulate into p.grad only when train is set.
inline Var use(Param& p, bool train) { return ad::leaf(p.value, train ? &p.grad : nullptr); }

struct Linear {
  Param* W = nullptr;
  Param* b = nullptr;

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
         bool zero_init = false);
  Var operator()(const Var& x, bool train) const;
};

struct LayerNorm {
  Param* gamma = nullptr;
  Param* beta = nullptr;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, Eigen::Index dim, Rng& rng);
  Var operator()(const Var& x, bool train) const;
};

// Pre-norm multi-head attention + feed-forward block. Self-attention when no
// memory is given, cross-attention against it otherwise.
struct TransformerBlock {
  LayerNorm ln_attn, ln_cross, ln_ffn;
  Linear wq, wk, wv, wo;
  Linear cq, ck, cv, co;  // cross-attention projections (only when with_cross)
  Linear ff1, ff2;
  int heads = 4;
  bool with_cross = false;

  TransformerBlock() = default;
  TransformerBlock(ParamStore& ps, const std::string& name, Eigen::Index dim, int heads,
                   Eigen::Index ffn_dim, Rng& rng, bool with_cross = false);

  // x: (B*T x dim); memory: (B*Tm x dim) when with_cross
  Var operator()(const Var& x, Eigen::Index B, Eigen::Index T, bool train) const;
  Var operator()(const Var& x, const Var& memory, Eigen::Index B, Eigen::Index T, Eigen::Index Tm,
                 bool train) const;
};

// Fixed sinusoidal position table, rows t = 0..T-1.
Mat sinusoidal_table(Eigen::Index T, Eigen::Index dim);
// Sinusoidal embedding of arbitrary (non-negative) positions, one per row.
Mat sinusoidal_rows(const std::vector<double>& positions, Eigen::Index dim);

}  // namespace trajdiff::nn
