#include "trajdiff/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "trajdiff/errors.hpp"

namespace trajdiff {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& file, long line_no,
                    const char* what) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw ParseError(file, line_no, std::string("expected numeric ") + what + ", got '" + tok + "'");
  }
  return v;
}

long parse_id(const std::string& tok, const std::string& file, long line_no, const char* what) {
  // ETH/UCY files commonly write ids as "10.0"
  double v = parse_double(tok, file, line_no, what);
  return static_cast<long>(std::llround(v));
}

}  // namespace

Scene load_scene(const std::string& path, SceneFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trajectory file: " + path);

  Scene scene;
  scene.name = std::filesystem::path(path).stem().string();
  scene.frame_interval = 0.4;

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    SceneRecord rec;
    if (format == SceneFormat::ethucy) {
      if (toks.size() < 4) throw ParseError(path, line_no, "expected 'frame ped x y'");
      rec.frame = parse_id(toks[0], path, line_no, "frame id");
      rec.pedestrian = parse_id(toks[1], path, line_no, "pedestrian id");
      rec.x = parse_double(toks[2], path, line_no, "x");
      rec.y = parse_double(toks[3], path, line_no, "y");
    } else {
      // SDD annotation: track xmin ymin xmax ymax frame lost occluded generated "label"
      if (toks.size() < 10) throw ParseError(path, line_no, "expected 10 SDD annotation columns");
      long lost = parse_id(toks[6], path, line_no, "lost flag");
      std::string label = toks[9];
      for (size_t i = 10; i < toks.size(); ++i) label += " " + toks[i];
      if (lost != 0) continue;
      if (label != "\"Pedestrian\"" && label != "Pedestrian") continue;
      long frame = parse_id(toks[5], path, line_no, "frame id");
      if (frame % 12 != 0) continue;  // 30 fps annotations sampled down to 0.4 s
      rec.pedestrian = parse_id(toks[0], path, line_no, "track id");
      double xmin = parse_double(toks[1], path, line_no, "xmin");
      double ymin = parse_double(toks[2], path, line_no, "ymin");
      double xmax = parse_double(toks[3], path, line_no, "xmax");
      double ymax = parse_double(toks[4], path, line_no, "ymax");
      rec.frame = frame / 12;
      rec.x = 0.5 * (xmin + xmax);
      rec.y = 0.5 * (ymin + ymax);
    }
    scene.records.push_back(rec);
  }
  if (scene.records.empty()) throw DataError("empty trajectory file: " + path);

  std::sort(scene.records.begin(), scene.records.end(), [](const SceneRecord& a, const SceneRecord& b) {
    if (a.pedestrian != b.pedestrian) return a.pedestrian < b.pedestrian;
    return a.frame < b.frame;
  });
  for (size_t i = 1; i < scene.records.size(); ++i) {
    const auto& p = scene.records[i - 1];
    const auto& c = scene.records[i];
    if (p.pedestrian == c.pedestrian && p.frame == c.frame) {
      throw DataError(path + ": duplicate record for pedestrian " + std::to_string(c.pedestrian) +
                      " at frame " + std::to_string(c.frame));
    }
  }
  scene.frame_step = infer_frame_step(scene);
  return scene;
}

long infer_frame_step(const Scene& scene) {
  std::map<long, long> counts;
  for (size_t i = 1; i < scene.records.size(); ++i) {
    const auto& p = scene.records[i - 1];
    const auto& c = scene.records[i];
    if (p.pedestrian == c.pedestrian) counts[c.frame - p.frame]++;
  }
  long best = 1, best_count = 0;
  for (auto [delta, n] : counts) {
    if (n > best_count) {
      best = delta;
      best_count = n;
    }
  }
  return best;
}

std::vector<TrajectoryWindow> window_scene(const Scene& scene, int t_obs, int t_pred, int stride) {
  if (t_obs < 2) throw DataError("window_scene: t_obs must be >= 2");
  if (t_pred < 1) throw DataError("window_scene: t_pred must be >= 1");
  if (stride < 1) throw DataError("window_scene: stride must be >= 1");

  long step = scene.frame_step > 0 ? scene.frame_step : infer_frame_step(scene);
  const int len = t_obs + t_pred;
  std::vector<TrajectoryWindow> out;

  size_t i = 0;
  const auto& recs = scene.records;
  while (i < recs.size()) {
    // contiguous run for one pedestrian
    size_t j = i + 1;
    while (j < recs.size() && recs[j].pedestrian == recs[i].pedestrian &&
           recs[j].frame - recs[j - 1].frame == step) {
      ++j;
    }
    const long run = static_cast<long>(j - i);
    for (long s = 0; s + len <= run; s += stride) {
      TrajectoryWindow w;
      w.pedestrian_id = recs[i].pedestrian;
      w.scene = scene.name;
      w.obs.reserve(t_obs);
      w.fut.reserve(t_pred);
      for (int t = 0; t < t_obs; ++t) {
        const auto& r = recs[i + s + t];
        w.obs.push_back({r.x, r.y});
      }
      for (int t = 0; t < t_pred; ++t) {
        const auto& r = recs[i + s + t_obs + t];
        w.fut.push_back({r.x, r.y});
      }
      out.push_back(std::move(w));
    }
    // next run starts at j unless we stopped mid-pedestrian on a gap
    i = j;
  }
  return out;
}

std::pair<TrajectoryWindow, Vec2> normalize_window(const TrajectoryWindow& w) {
  Vec2 offset = w.obs.back();
  TrajectoryWindow out = w;
  for (auto& p : out.obs) p = p - offset;
  for (auto& p : out.fut) p = p - offset;
  return {out, offset};
}

TrajectoryWindow denormalize_window(const TrajectoryWindow& w, const Vec2& offset) {
  TrajectoryWindow out = w;
  for (auto& p : out.obs) p = p + offset;
  for (auto& p : out.fut) p = p + offset;
  return out;
}

}  // namespace trajdiff
