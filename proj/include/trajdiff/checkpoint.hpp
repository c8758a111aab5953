#pragma once

#include <string>

#include "trajdiff/config.hpp"
#include "trajdiff/nn.hpp"

namespace trajdiff {

// Single-archive checkpoint: canonical parameter names -> raw double arrays,
// plus the serialized config (with digest) and the optimizer step counter.
// Round-trips are bit-exact.

void save_checkpoint(const std::string& path, const nn::ParamStore& params,
                     const ExperimentConfig& config);

struct Checkpoint {
  ExperimentConfig config;
  long step = 0;
};

/// Loads config + step and fills an already-constructed store (shapes must match).
Checkpoint load_checkpoint(const std::string& path, nn::ParamStore* params);

/// Reads only the embedded config (to build the model before loading weights).
ExperimentConfig peek_checkpoint_config(const std::string& path);

}  // namespace trajdiff
