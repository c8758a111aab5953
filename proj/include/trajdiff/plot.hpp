#pragma once

#include <string>
#include <vector>

#include "trajdiff/config.hpp"
#include "trajdiff/data.hpp"
#include "trajdiff/model.hpp"

namespace trajdiff {

// Static figure description: which windows to draw and which overlays to
// include. Figures are emitted as SVG with a JSON sidecar carrying window id,
// seed, config digest and overlay counts.
struct PlotSpec {
  std::vector<int> window_ids;
  bool observed = false;
  bool ground_truth = false;
  bool samples = false;
  bool endpoints = false;  // prob-scaled markers
  bool intent = false;     // polar intent arrows
  int n_samples = 20;
  std::string out_path;  // per-window files get an _<id> suffix
};

/// Renders one SVG (+ sidecar) per window id. Returns the emitted SVG paths.
std::vector<std::string> render_plots(const Model& model, const ExperimentConfig& cfg,
                                      const std::vector<TrajectoryWindow>& windows,
                                      const PlotSpec& spec, uint64_t seed);

}  // namespace trajdiff
