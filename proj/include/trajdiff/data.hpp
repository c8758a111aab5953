#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trajdiff/geometry.hpp"

namespace trajdiff {

enum class SceneFormat { ethucy, sdd };

struct SceneRecord {
  long frame = 0;
  long pedestrian = 0;
  double x = 0.0;
  double y = 0.0;
};

// One recording. Records are kept sorted by (pedestrian, frame).
struct Scene {
  std::string name;
  std::vector<SceneRecord> records;
  double frame_interval = 0.4;  // seconds between consecutive samples
  long frame_step = 0;          // frame-id delta between consecutive samples (0 = infer)
};

struct TrajectoryWindow {
  std::vector<Vec2> obs;  // t_obs positions, world coordinates
  std::vector<Vec2> fut;  // t_pred positions
  long pedestrian_id = 0;
  std::string scene;
};

/// Parse a trajectory file. ethucy: whitespace-separated "frame ped x y" lines.
/// sdd: the standard annotation columns; boxes are reduced to pixel centroids,
/// rows are kept for the "Pedestrian" label at every 12th frame (0.4 s at 30 fps).
Scene load_scene(const std::string& path, SceneFormat format);

/// Slice a scene into observation/prediction windows. Pedestrians with fewer
/// than t_obs + t_pred contiguous frames contribute no windows; windows never
/// straddle a frame-id gap.
std::vector<TrajectoryWindow> window_scene(const Scene& scene, int t_obs = 8, int t_pred = 12,
                                           int stride = 1);

/// Center a window on its last observed position. Returns the centered window
/// and the subtracted offset.
std::pair<TrajectoryWindow, Vec2> normalize_window(const TrajectoryWindow& w);

/// Inverse of normalize_window.
TrajectoryWindow denormalize_window(const TrajectoryWindow& w, const Vec2& offset);

// Modal positive frame delta across the scene (used to define contiguity).
long infer_frame_step(const Scene& scene);

}  // namespace trajdiff
