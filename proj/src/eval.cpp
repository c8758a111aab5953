#include "trajdiff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "trajdiff/errors.hpp"
#include "trajdiff/rng.hpp"

namespace trajdiff {

double ade(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size() || pred.empty()) throw DataError("ade: shape mismatch");
  double sum = 0.0;
  for (size_t t = 0; t < pred.size(); ++t) sum += dist(pred[t], gt[t]);
  return sum / static_cast<double>(pred.size());
}

double fde(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size() || pred.empty()) throw DataError("fde: shape mismatch");
  return dist(pred.back(), gt.back());
}

std::pair<double, double> best_of_n(const std::vector<Trajectory>& preds, const Trajectory& gt) {
  if (preds.empty()) throw DataError("best_of_n: no samples");
  double best_ade = std::numeric_limits<double>::infinity();
  double best_fde = std::numeric_limits<double>::infinity();
  for (const auto& p : preds) {
    best_ade = std::min(best_ade, ade(p, gt));
    best_fde = std::min(best_fde, fde(p, gt));
  }
  return {best_ade, best_fde};
}

EvalReport evaluate_split(const WindowSampler& sampler, const std::vector<TrajectoryWindow>& windows,
                          int n, uint64_t seed, const std::string& config_digest) {
  if (windows.empty()) throw DataError("evaluate_split: empty window set");

  struct Acc {
    double ade = 0.0, fde = 0.0;
    long count = 0;
  };
  std::map<std::string, Acc> per_scene;
  for (size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    auto preds = sampler(w, n, derive_seed(seed, i));
    auto [a, f] = best_of_n(preds, w.fut);
    auto& acc = per_scene[w.scene];
    acc.ade += a;
    acc.fde += f;
    acc.count += 1;
  }

  EvalReport report;
  report.n_samples = n;
  report.config_digest = config_digest;
  for (auto& [scene, acc] : per_scene) {
    SceneScore s;
    s.scene = scene;
    s.ade = acc.ade / static_cast<double>(acc.count);
    s.fde = acc.fde / static_cast<double>(acc.count);
    s.windows = acc.count;
    report.scenes.push_back(std::move(s));
  }
  for (const auto& s : report.scenes) {
    report.avg_ade += s.ade;
    report.avg_fde += s.fde;
  }
  report.avg_ade /= static_cast<double>(report.scenes.size());
  report.avg_fde /= static_cast<double>(report.scenes.size());
  return report;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  for (const auto& s : scenes) os << s.scene << "  ";
  os << "AVG\n";
  for (const auto& s : scenes) os << s.ade << " / " << s.fde << "  ";
  os << avg_ade << " / " << avg_fde << "\n";
  return os.str();
}

std::string EvalReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"n_samples\":" << n_samples << ",\"config_digest\":\"" << config_digest
     << "\",\"scenes\":[";
  for (size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    if (i) os << ",";
    os << "{\"scene\":\"" << s.scene << "\",\"ade\":" << s.ade << ",\"fde\":" << s.fde
       << ",\"windows\":" << s.windows << "}";
  }
  os << "],\"avg_ade\":" << avg_ade << ",\"avg_fde\":" << avg_fde << "}";
  return os.str();
}

}  // namespace trajdiff
