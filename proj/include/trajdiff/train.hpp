#pragma once

#include <string>
#include <vector>

#include "trajdiff/config.hpp"
#include "trajdiff/data.hpp"
#include "trajdiff/eval.hpp"
#include "trajdiff/model.hpp"

namespace trajdiff {

struct DatasetSplit {
  std::vector<TrajectoryWindow> train;
  std::vector<TrajectoryWindow> eval;
};

// Resolve the config's dataset block into train/eval windows (synthetic
// generation, explicit file lists, or a scene directory with leave-one-out).
DatasetSplit load_dataset(const ExperimentConfig& cfg);

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  long steps = 0;
  double first_loss = 0.0;
  double final_loss = 0.0;
};

// One optimization step over an explicit batch; exposed for tests. Returns the
// logged loss components ({name, value} pairs, "total" always present).
std::vector<std::pair<std::string, double>> train_step(Model& model, const ExperimentConfig& cfg,
                                                       const std::vector<const TrajectoryWindow*>& batch,
                                                       uint64_t step_seed);

/// Full training loop: seeded shuffling, JSONL loss logs, checkpoints,
/// optional wall-clock budget and validation-ADE early stop.
TrainResult train(const ExperimentConfig& cfg);

struct AblationRow {
  std::string label;
  EvalReport report;
};

enum class AblationAxis { components, L_count, K_steps, refine_io };

AblationAxis ablation_axis_from_string(const std::string& s);

/// Train/evaluate the axis matrix and write the comparative table
/// (ablation_<axis>.txt / .json under cfg.out_dir). Returns the rows.
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, AblationAxis axis);

}  // namespace trajdiff
