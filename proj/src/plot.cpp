#include "trajdiff/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trajdiff/errors.hpp"
#include "trajdiff/pipeline.hpp"
#include "trajdiff/polar.hpp"
#include "trajdiff/sampler.hpp"

namespace trajdiff {

namespace {

struct Box {
  double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
  void grow(const Vec2& p) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
};

class Svg {
 public:
  Svg(const Box& box, double size = 640.0) : size_(size) {
    const double w = std::max(box.xmax - box.xmin, 1e-6);
    const double h = std::max(box.ymax - box.ymin, 1e-6);
    scale_ = (size - 2 * margin_) / std::max(w, h);
    x0_ = box.xmin - (std::max(w, h) - w) / 2;
    y0_ = box.ymin - (std::max(w, h) - h) / 2;
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  double px(double x) const { return margin_ + (x - x0_) * scale_; }
  double py(double y) const { return size_ - margin_ - (y - y0_) * scale_; }

  void polyline(const std::vector<Vec2>& pts, const std::string& color, double width,
                const std::string& cls) {
    os_ << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"" << width << "\" points=\"";
    for (const auto& p : pts) os_ << px(p.x) << "," << py(p.y) << " ";
    os_ << "\"/>\n";
  }

  void circle(const Vec2& c, double r, const std::string& color) {
    os_ << "<circle cx=\"" << px(c.x) << "\" cy=\"" << py(c.y) << "\" r=\"" << r << "\" fill=\""
        << color << "\" fill-opacity=\"0.6\"/>\n";
  }

  void line(const Vec2& a, const Vec2& b, const std::string& color, double width) {
    os_ << "<line x1=\"" << px(a.x) << "\" y1=\"" << py(a.y) << "\" x2=\"" << px(b.x) << "\" y2=\""
        << py(b.y) << "\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"/>\n";
  }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  std::ostringstream os_;
  double size_, scale_, x0_, y0_;
  double margin_ = 24.0;
};

}  // namespace

std::vector<std::string> render_plots(const Model& model, const ExperimentConfig& cfg,
                                      const std::vector<TrajectoryWindow>& windows,
                                      const PlotSpec& spec, uint64_t seed) {
  if (!spec.observed && !spec.ground_truth && !spec.samples && !spec.endpoints && !spec.intent) {
    throw UsageError("plot: at least one overlay is required");
  }
  if (spec.out_path.empty()) throw UsageError("plot: output path is required");
  if (spec.window_ids.empty()) throw UsageError("plot: at least one window id is required");

  ModelSampler sampler(model, cfg);
  std::vector<std::string> emitted;

  for (int id : spec.window_ids) {
    if (id < 0 || static_cast<size_t>(id) >= windows.size()) {
      throw DataError("plot: window id out of range: " + std::to_string(id));
    }
    const TrajectoryWindow& w = windows[static_cast<size_t>(id)];
    const uint64_t window_seed = derive_seed(seed, static_cast<uint64_t>(id));

    std::vector<Trajectory> samples;
    if (spec.samples) samples = sampler.sample_window(w, spec.n_samples, window_seed);

    // endpoint candidates and intent from the predictors, world coordinates
    std::vector<Vec2> endpoint_pts;
    std::vector<double> endpoint_probs;
    PolarIntentSequence intent_seq;
    if (spec.endpoints || spec.intent) {
      WindowBatch batch = make_batch({&w}, cfg);
      ExperimentConfig all_on = cfg;
      all_on.enable_short = true;
      all_on.enable_long = true;
      PredictorForwards fwd = run_predictors(model, batch, all_on, false);
      const Vec2 offset = batch.offsets[0];
      for (int l = 0; l < cfg.L; ++l) {
        endpoint_pts.push_back(Vec2{fwd.endpoints->points.val()(l, 0) / cfg.data_scale,
                                    fwd.endpoints->points.val()(l, 1) / cfg.data_scale} +
                               offset);
        endpoint_probs.push_back(fwd.endpoints->probs.val()(l, 0));
      }
      for (int t = 0; t < cfg.t_pred; ++t) {
        intent_seq.theta.push_back(wrap_angle(fwd.intent->theta.val()(t, 0)));
        intent_seq.radius.push_back(fwd.intent->radius.val()(t, 0));
      }
    }

    Box box;
    for (const auto& p : w.obs) box.grow(p);
    for (const auto& p : w.fut) box.grow(p);
    for (const auto& s : samples) {
      for (const auto& p : s) box.grow(p);
    }
    for (const auto& p : endpoint_pts) box.grow(p);

    Svg svg(box);
    if (spec.samples) {
      for (const auto& s : samples) svg.polyline(s, "#e8a13c", 1.2, "sample");
    }
    if (spec.observed) svg.polyline(w.obs, "#3566c4", 2.5, "observed");
    if (spec.ground_truth) svg.polyline(w.fut, "#2e9e52", 2.5, "truth");
    if (spec.endpoints) {
      for (size_t l = 0; l < endpoint_pts.size(); ++l) {
        svg.circle(endpoint_pts[l], 4.0 + 14.0 * endpoint_probs[l], "#c43535");
      }
    }
    if (spec.intent) {
      // arrow per future step: direction theta, length scaled by magnitude
      for (int t = 0; t < cfg.t_pred; ++t) {
        const Vec2 base = w.fut[static_cast<size_t>(t)];
        const double len = std::min(0.8, 0.25 * intent_seq.radius[static_cast<size_t>(t)]);
        const Vec2 tip{base.x + len * std::cos(intent_seq.theta[static_cast<size_t>(t)]),
                       base.y + len * std::sin(intent_seq.theta[static_cast<size_t>(t)])};
        svg.line(base, tip, "#8a4bb8", 1.5);
      }
    }

    std::filesystem::path out(spec.out_path);
    std::filesystem::path svg_path = out;
    if (spec.window_ids.size() > 1) {
      svg_path = out.parent_path() /
                 (out.stem().string() + "_" + std::to_string(id) + out.extension().string());
    }
    std::ofstream f(svg_path);
    if (!f) throw DataError("plot: cannot write " + svg_path.string());
    f << svg.finish();

    std::ofstream meta(svg_path.string() + ".json");
    meta << "{\"window\":" << id << ",\"scene\":\"" << w.scene << "\",\"pedestrian\":"
         << w.pedestrian_id << ",\"seed\":" << window_seed << ",\"config_digest\":\""
         << cfg.digest() << "\",\"overlays\":{\"observed\":" << (spec.observed ? 1 : 0)
         << ",\"ground_truth\":" << (spec.ground_truth ? 1 : 0)
         << ",\"samples\":" << (spec.samples ? spec.n_samples : 0)
         << ",\"endpoints\":" << (spec.endpoints ? cfg.L : 0)
         << ",\"intent_arrows\":" << (spec.intent ? cfg.t_pred : 0) << "}}\n";

    emitted.push_back(svg_path.string());
  }
  return emitted;
}

}  // namespace trajdiff
