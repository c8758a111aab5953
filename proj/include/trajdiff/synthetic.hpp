#pragma once

#include "trajdiff/data.hpp"

namespace trajdiff {

// Mixture of straight, turning and stopping agents, each contributing exactly
// one 20-frame track (8 observed + 12 future at the default window lengths).
Scene synthetic_scene(int n_agents, uint64_t seed, double dt = 0.4,
                      const std::string& name = "synthetic");

// Mean total displacement over the future segment, used to normalize desk-scale
// error bars.
double mean_future_displacement(const std::vector<TrajectoryWindow>& windows);

}  // namespace trajdiff
