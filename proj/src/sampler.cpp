#include "trajdiff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "trajdiff/errors.hpp"

namespace trajdiff {

namespace {

// Deterministic largest-remainder apportionment of n samples over the
// candidate probabilities (endpoint cycling mode).
std::vector<int> apportion(const Eigen::VectorXd& probs, int n) {
  const int L = static_cast<int>(probs.size());
  std::vector<int> counts(static_cast<size_t>(L), 0);
  std::vector<std::pair<double, int>> rema;
  int assigned = 0;
  for (int l = 0; l < L; ++l) {
    double exact = probs[l] * n;
    counts[static_cast<size_t>(l)] = static_cast<int>(std::floor(exact));
    assigned += counts[static_cast<size_t>(l)];
    rema.push_back({exact - std::floor(exact), l});
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int i = 0; assigned < n; ++i, ++assigned) counts[static_cast<size_t>(rema[static_cast<size_t>(i % L)].second)]++;
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n));
  for (int l = 0; l < L; ++l) {
    for (int c = 0; c < counts[static_cast<size_t>(l)]; ++c) order.push_back(l);
  }
  return order;
}

}  // namespace

ModelSampler::ModelSampler(const Model& model, const ExperimentConfig& cfg)
    : model_(model), cfg_(cfg), schedule_(make_schedule(cfg.K, cfg.beta_start, cfg.beta_end, cfg.gamma)) {}

std::vector<std::vector<Trajectory>> ModelSampler::sample_group(
    const std::vector<const TrajectoryWindow*>& windows, const std::vector<uint64_t>& seeds,
    int n) const {
  const Eigen::Index B = static_cast<Eigen::Index>(windows.size());
  const Eigen::Index T = cfg_.t_pred;
  const Eigen::Index R = B * static_cast<Eigen::Index>(n);  // batch items: window-major, sample-minor

  WindowBatch batch = make_batch(windows, cfg_);
  PredictorForwards fwd = run_predictors(model_, batch, cfg_, /*train=*/false);

  auto replicate_per_sample = [&](const Mat& m) {
    Mat out(R * (m.rows() / B), m.cols());
    const Eigen::Index rows_per_item = m.rows() / B;
    for (Eigen::Index b = 0; b < B; ++b) {
      for (int j = 0; j < n; ++j) {
        out.middleRows((b * n + j) * rows_per_item, rows_per_item) =
            m.middleRows(b * rows_per_item, rows_per_item);
      }
    }
    return out;
  };

  GuidanceVars g;
  {
    Var g_obs = fuse_condition(model_, model_.cond_obs(fwd.f_obs, B, false), kObs, cfg_, false);
    g.obs = ad::constant(replicate_per_sample(g_obs.val()));
  }
  if (fwd.intent) {
    Var g_s = fuse_condition(
        model_, model_.cond_short(fwd.intent->theta, fwd.intent->radius, B, false), kShort, cfg_, false);
    g.short_term = ad::constant(replicate_per_sample(g_s.val()));
  }
  if (fwd.endpoints) {
    // endpoint selection per (window, sample): highest-confidence candidate, or
    // candidates apportioned by probability when cycling is enabled
    Mat selected(R, 2);
    const Mat& points = fwd.endpoints->points.val();
    const Mat& probs = fwd.endpoints->probs.val();
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::VectorXd p = probs.middleRows(b * cfg_.L, cfg_.L).col(0);
      std::vector<int> pick;
      if (cfg_.endpoint_cycle) {
        pick = apportion(p, n);
      } else {
        Eigen::Index top = 0;
        p.maxCoeff(&top);
        pick.assign(static_cast<size_t>(n), static_cast<int>(top));
      }
      for (int j = 0; j < n; ++j) {
        selected.row(b * n + j) = points.row(b * cfg_.L + pick[static_cast<size_t>(j)]);
      }
    }
    Var g_l = fuse_condition(model_, model_.cond_long(ad::constant(selected), false), kLong, cfg_, false);
    g.long_term = ad::constant(g_l.val());
  }

  // initial noise, one stream per (window, sample)
  Mat y(R * T, 2);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int j = 0; j < n; ++j) {
      Rng rng(derive_seed(seeds[static_cast<size_t>(b)], static_cast<uint64_t>(j)));
      for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::Index r = (b * n + j) * T + t;
        y(r, 0) = rng.normal();
        y(r, 1) = rng.normal();
      }
    }
  }

  const bool refine = cfg_.enable_refine;
  const bool refine_from_eps = cfg_.refine_in == "eps";
  const bool refine_to_noise = cfg_.refine_out == "deps";
  for (int k = schedule_.K; k > 0; k -= schedule_.gamma) {
    GuidanceVars gk = g;
    gk.step = model_.step_embed(std::vector<int>(static_cast<size_t>(R), k), false);
    Var yv = ad::constant(y);
    Mat eps = model_.denoise(gk, yv, R, false).val();
    Mat delta;
    if (refine) {
      Var rin = refine_from_eps ? ad::constant(eps) : yv;
      delta = model_.refine(gk, rin, R, false).val();
    }
    const double ab_prev = schedule_.abar(k - schedule_.gamma);
    if (refine && refine_to_noise) eps += delta;
    Mat x0 = x0_estimate(y, k, eps, schedule_);
    if (refine && !refine_to_noise) x0 += delta;
    y = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps;
  }

  // back to world coordinates
  std::vector<std::vector<Trajectory>> out(static_cast<size_t>(B));
  const double inv_scale = 1.0 / cfg_.data_scale;
  for (Eigen::Index b = 0; b < B; ++b) {
    auto& per_window = out[static_cast<size_t>(b)];
    per_window.resize(static_cast<size_t>(n));
    const Vec2 offset = batch.offsets[static_cast<size_t>(b)];
    for (int j = 0; j < n; ++j) {
      Trajectory traj(static_cast<size_t>(T));
      for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::Index r = (b * n + j) * T + t;
        traj[static_cast<size_t>(t)] = Vec2{y(r, 0) * inv_scale, y(r, 1) * inv_scale} + offset;
      }
      per_window[static_cast<size_t>(j)] = std::move(traj);
    }
  }
  return out;
}

std::vector<Trajectory> ModelSampler::sample_window(const TrajectoryWindow& w, int n,
                                                    uint64_t seed) const {
  return sample_group({&w}, {seed}, n)[0];
}

EvalReport ModelSampler::evaluate(const std::vector<TrajectoryWindow>& windows, int n,
                                  uint64_t seed, int batch_windows) const {
  if (windows.empty()) throw DataError("evaluate: empty window set");
  std::vector<std::pair<double, double>> scores;
  scores.reserve(windows.size());
  for (size_t i0 = 0; i0 < windows.size(); i0 += static_cast<size_t>(batch_windows)) {
    const size_t i1 = std::min(windows.size(), i0 + static_cast<size_t>(batch_windows));
    std::vector<const TrajectoryWindow*> group;
    std::vector<uint64_t> seeds;
    for (size_t i = i0; i < i1; ++i) {
      group.push_back(&windows[i]);
      seeds.push_back(derive_seed(seed, i));
    }
    auto sampled = sample_group(group, seeds, n);
    for (size_t i = i0; i < i1; ++i) {
      scores.push_back(best_of_n(sampled[i - i0], windows[i].fut));
    }
  }

  // aggregate identically to evaluate_split
  struct Acc {
    double ade = 0.0, fde = 0.0;
    long count = 0;
  };
  std::map<std::string, Acc> per_scene;
  for (size_t i = 0; i < windows.size(); ++i) {
    auto& acc = per_scene[windows[i].scene];
    acc.ade += scores[i].first;
    acc.fde += scores[i].second;
    acc.count += 1;
  }
  EvalReport report;
  report.n_samples = n;
  report.config_digest = cfg_.digest();
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

WindowSampler ModelSampler::as_window_sampler() const {
  return [this](const TrajectoryWindow& w, int n, uint64_t seed) {
    return sample_window(w, n, seed);
  };
}

}  // namespace trajdiff
