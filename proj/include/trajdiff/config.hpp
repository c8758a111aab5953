#pragma once

#include <string>

#include "trajdiff/losses.hpp"
#include "trajdiff/model.hpp"

namespace trajdiff {

// Flat experiment configuration. Every field is addressable by key in the
// config file and from CLI overrides; the digest is a hash of the canonical
// serialization.
struct ExperimentConfig {
  // data
  std::string dataset = "synthetic";  // synthetic | ethucy | sdd
  std::string data_dir;
  std::string train_files;  // semicolon-separated when files are given directly
  std::string eval_files;
  std::string holdout;  // leave-one-scene-out: scene stem excluded from training
  int synthetic_count = 500;
  int synthetic_eval_count = 100;
  uint64_t synthetic_seed = 7;

  // window geometry
  int t_obs = 8;
  int t_pred = 12;
  int window_stride = 1;
  double dt = 0.4;

  // model
  int K = 100;
  int gamma = 20;
  int L = 5;
  int d = 256;
  int heads = 4;
  int enc_depth = 2;
  int intent_depth = 4;
  int endpoint_depth = 4;
  int den_width = 512;
  int den_depth = 4;
  int den_heads = 4;
  int ffn_mult = 2;
  double beta_start = 1e-4;
  double beta_end = 5e-2;
  double eps_polar = 1e-6;
  double data_scale = 0.25;  // model-space units per meter^-1 applied to centered coords
  double p_min = 1e-6;

  // training
  double lr = 1e-3;
  int batch_size = 256;
  int epochs = 100;
  int max_steps = 0;         // 0 = no cap
  double train_minutes = 0;  // 0 = no wall-clock budget
  double grad_clip = 1.0;
  uint64_t seed = 1;
  int ckpt_every = 0;  // extra checkpoints every N steps (final always written)
  bool early_stop = true;
  double val_fraction = 0.1;  // slice of the training windows held out for validation
  int val_every_epochs = 20;
  int patience = 2;  // validation checks without improvement before stopping
  LossWeights weights;

  // guidance / ablation
  bool enable_long = true;
  bool enable_short = true;
  bool enable_softmask = true;
  bool enable_refine = true;
  std::string refine_in = "eps";   // eps | y
  std::string refine_out = "deps"; // deps | dy0
  bool endpoint_cycle = false;     // cycle endpoint candidates across samples

  // evaluation / io
  int n_samples = 20;
  std::string out_dir = "runs/default";

  ModelConfig model_config() const;

  static ExperimentConfig from_file(const std::string& path);
  void apply_kv(const std::string& key, const std::string& value);
  std::string serialize() const;
  std::string digest() const;
  void validate() const;
};

}  // namespace trajdiff
