#include "trajdiff/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "trajdiff/checkpoint.hpp"
#include "trajdiff/errors.hpp"
#include "trajdiff/losses.hpp"
#include "trajdiff/pipeline.hpp"
#include "trajdiff/sampler.hpp"
#include "trajdiff/synthetic.hpp"

namespace trajdiff {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t end = s.find(';', start);
    if (end == std::string::npos) end = s.size();
    std::string item = s.substr(start, end - start);
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

std::vector<TrajectoryWindow> windows_from_files(const std::vector<std::string>& files,
                                                 const ExperimentConfig& cfg) {
  SceneFormat fmt = cfg.dataset == "sdd" ? SceneFormat::sdd : SceneFormat::ethucy;
  std::vector<TrajectoryWindow> out;
  for (const auto& f : files) {
    Scene scene = load_scene(f, fmt);
    auto ws = window_scene(scene, cfg.t_obs, cfg.t_pred, cfg.window_stride);
    out.insert(out.end(), ws.begin(), ws.end());
  }
  return out;
}

std::string fmt_loss(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

DatasetSplit load_dataset(const ExperimentConfig& cfg) {
  DatasetSplit split;
  if (cfg.dataset == "synthetic") {
    Scene train = synthetic_scene(cfg.synthetic_count, cfg.synthetic_seed, cfg.dt, "synthetic");
    Scene eval = synthetic_scene(cfg.synthetic_eval_count, derive_seed(cfg.synthetic_seed, 0xE7A1),
                                 cfg.dt, "synthetic");
    split.train = window_scene(train, cfg.t_obs, cfg.t_pred, cfg.window_stride);
    split.eval = window_scene(eval, cfg.t_obs, cfg.t_pred, cfg.window_stride);
    return split;
  }

  if (!cfg.train_files.empty() || !cfg.eval_files.empty()) {
    split.train = windows_from_files(split_list(cfg.train_files), cfg);
    split.eval = windows_from_files(split_list(cfg.eval_files), cfg);
    return split;
  }

  if (cfg.data_dir.empty()) throw UsageError("config key 'data_dir' is required for dataset=" + cfg.dataset);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(cfg.data_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .txt trajectory files under " + cfg.data_dir);
  if (cfg.holdout.empty()) {
    throw UsageError("config key 'holdout' must name the held-out scene for dataset=" + cfg.dataset);
  }
  std::vector<std::string> train_files, eval_files;
  for (const auto& f : files) {
    if (fs::path(f).stem().string() == cfg.holdout) {
      eval_files.push_back(f);
    } else {
      train_files.push_back(f);
    }
  }
  if (eval_files.empty()) throw UsageError("holdout scene '" + cfg.holdout + "' not found in " + cfg.data_dir);
  split.train = windows_from_files(train_files, cfg);
  split.eval = windows_from_files(eval_files, cfg);
  return split;
}

std::vector<std::pair<std::string, double>> train_step(Model& model, const ExperimentConfig& cfg,
                                                       const std::vector<const TrajectoryWindow*>& batch,
                                                       uint64_t step_seed) {
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index T = cfg.t_pred;
  const LossWeights& w = cfg.weights;
  DiffusionSchedule schedule = make_schedule(cfg.K, cfg.beta_start, cfg.beta_end, cfg.gamma);

  model.params().zero_grad();
  WindowBatch wb = make_batch(batch, cfg);
  PredictorForwards fwd = run_predictors(model, wb, cfg, /*train=*/true);

  std::vector<std::pair<std::string, double>> record;
  Var l_short = ad::scalar(0.0);
  Var l_long = ad::scalar(0.0);

  GuidanceVars g;
  g.obs = fuse_condition(model, model.cond_obs(fwd.f_obs, B, true), kObs, cfg, true);
  if (fwd.intent) {
    Var lth = loss_angle(fwd.intent->theta, ad::constant(wb.gt_theta));
    Var lr = loss_radius(fwd.intent->radius, ad::constant(wb.gt_r));
    l_short = loss_short(lth, lr, w);
    g.short_term =
        fuse_condition(model, model.cond_short(fwd.intent->theta, fwd.intent->radius, B, true),
                       kShort, cfg, true);
    record.push_back({"loss_theta", lth.val()(0, 0)});
    record.push_back({"loss_r", lr.val()(0, 0)});
  }
  if (fwd.endpoints) {
    auto [le, winners] = loss_endpoint(fwd.endpoints->points, wb.gt_endpoint, cfg.L);
    Var lp = loss_prob(fwd.endpoints->probs, winners, cfg.L, cfg.p_min);
    l_long = loss_long(le, lp, w);
    // training-time guidance: the candidate closest to the ground truth
    std::vector<Eigen::Index> rows(static_cast<size_t>(B));
    for (Eigen::Index b = 0; b < B; ++b) {
      rows[static_cast<size_t>(b)] = b * cfg.L + winners[static_cast<size_t>(b)];
    }
    Var sel = ad::select_rows(fwd.endpoints->points, rows);
    g.long_term = fuse_condition(model, model.cond_long(sel, true), kLong, cfg, true);
    record.push_back({"loss_e", le.val()(0, 0)});
    record.push_back({"loss_p", lp.val()(0, 0)});
  }

  // diffusion step: per-item uniform k and fresh standard-normal noise
  Rng rng(step_seed);
  std::vector<int> ks(static_cast<size_t>(B));
  Mat noise(B * T, 2);
  Mat y_k(B * T, 2);
  Mat dy0_coef(B, 1);
  for (Eigen::Index b = 0; b < B; ++b) {
    const int k = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(cfg.K)));
    ks[static_cast<size_t>(b)] = k;
    const double ab = schedule.abar(k);
    for (Eigen::Index t = 0; t < T; ++t) {
      noise(b * T + t, 0) = rng.normal();
      noise(b * T + t, 1) = rng.normal();
      y_k.row(b * T + t) =
          std::sqrt(ab) * wb.y0.row(b * T + t) + std::sqrt(1.0 - ab) * noise.row(b * T + t);
    }
    dy0_coef(b, 0) = std::sqrt(ab) / std::sqrt(1.0 - ab);
  }
  g.step = model.step_embed(ks, true);

  Var y_k_v = ad::constant(y_k);
  Var eps_hat = model.denoise(g, y_k_v, B, true);
  Var eps_ref = eps_hat;
  if (cfg.enable_refine) {
    Var rin = cfg.refine_in == "eps" ? eps_hat : y_k_v;
    Var delta = model.refine(g, rin, B, true);
    if (cfg.refine_out == "deps") {
      eps_ref = eps_hat + delta;
    } else {
      // data-space residual on the x0-estimate, expressed as implied noise
      Var coef = ad::expand_item_rows(ad::constant(dy0_coef), T);
      eps_ref = eps_hat - coef * delta;
    }
  }
  Var l_dif = loss_diffusion(ad::constant(noise), eps_ref);
  Var total = total_loss(l_short, l_long, l_dif, w);
  record.push_back({"loss_dif", l_dif.val()(0, 0)});
  record.push_back({"total", total.val()(0, 0)});

  ad::backward(total);
  model.params().adam_step(cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip);
  return record;
}

TrainResult train(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  DatasetSplit data = load_dataset(cfg);
  if (data.train.empty()) throw DataError("training split has no windows");

  // validation slice for early stopping
  std::vector<TrajectoryWindow> train_windows = data.train;
  std::vector<TrajectoryWindow> val_windows;
  if (cfg.early_stop && cfg.val_fraction > 0.0 && train_windows.size() >= 20) {
    size_t n_val = static_cast<size_t>(static_cast<double>(train_windows.size()) * cfg.val_fraction);
    n_val = std::max<size_t>(1, n_val);
    val_windows.assign(train_windows.end() - static_cast<long>(n_val), train_windows.end());
    train_windows.resize(train_windows.size() - n_val);
  }

  Model model(cfg.model_config(), cfg.seed);

  const std::string log_path = (fs::path(cfg.out_dir) / "train_log.jsonl").string();
  std::ofstream log(log_path);
  if (!log) throw DataError("cannot write log: " + log_path);

  {
    std::ofstream cfg_out(fs::path(cfg.out_dir) / "config.txt");
    cfg_out << cfg.serialize();
  }

  const auto t_start = std::chrono::steady_clock::now();
  auto minutes_elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count() / 60.0;
  };

  TrainResult result;
  result.log_path = log_path;
  result.checkpoint_path = (fs::path(cfg.out_dir) / "model.ckpt").string();

  std::vector<size_t> order(train_windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_val = std::numeric_limits<double>::infinity();
  int bad_vals = 0;
  std::vector<Mat> best_params;
  long step = 0;
  bool stop = false;

  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    // deterministic shuffle per epoch
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5481, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    for (size_t b0 = 0; b0 < order.size() && !stop; b0 += static_cast<size_t>(cfg.batch_size)) {
      const size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(cfg.batch_size));
      std::vector<const TrajectoryWindow*> batch;
      batch.reserve(b1 - b0);
      for (size_t i = b0; i < b1; ++i) batch.push_back(&train_windows[order[i]]);

      auto record =
          train_step(model, cfg, batch, derive_seed(cfg.seed, 0xD1FF, static_cast<uint64_t>(step)));
      double total = record.back().second;
      if (step == 0) result.first_loss = total;
      result.final_loss = total;

      log << "{\"step\":" << step;
      for (const auto& [key, value] : record) log << ",\"" << key << "\":" << fmt_loss(value);
      log << "}\n";
      log.flush();

      if (!std::isfinite(total)) {
        // diagnostic snapshot before aborting
        std::ofstream diag(fs::path(cfg.out_dir) / "diagnostic.json");
        diag << "{\"step\":" << step << ",\"grad_norm\":" << model.params().grad_norm()
             << ",\"losses\":{";
        for (size_t i = 0; i < record.size(); ++i) {
          if (i) diag << ",";
          diag << "\"" << record[i].first << "\":\"" << fmt_loss(record[i].second) << "\"";
        }
        diag << "}}\n";
        save_checkpoint((fs::path(cfg.out_dir) / "diagnostic.ckpt").string(), model.params(), cfg);
        throw NumericError("non-finite training loss at step " + std::to_string(step) +
                           " (diagnostic snapshot in " + cfg.out_dir + ")");
      }

      ++step;
      if (cfg.ckpt_every > 0 && step % cfg.ckpt_every == 0) {
        save_checkpoint((fs::path(cfg.out_dir) / ("model_step" + std::to_string(step) + ".ckpt")).string(),
                        model.params(), cfg);
      }
      if (cfg.max_steps > 0 && step >= cfg.max_steps) stop = true;
      if (cfg.train_minutes > 0.0 && minutes_elapsed() >= cfg.train_minutes) stop = true;
    }

    if (!stop && !val_windows.empty() && cfg.val_every_epochs > 0 &&
        (epoch + 1) % cfg.val_every_epochs == 0) {
      ModelSampler sampler(model, cfg);
      EvalReport report = sampler.evaluate(val_windows, std::min(cfg.n_samples, 4),
                                           derive_seed(cfg.seed, 0x7A1, static_cast<uint64_t>(epoch)));
      log << "{\"step\":" << step << ",\"val_ade\":" << fmt_loss(report.avg_ade) << "}\n";
      if (report.avg_ade < best_val - 1e-6) {
        best_val = report.avg_ade;
        bad_vals = 0;
        best_params.clear();
        for (const auto& p : model.params().all()) best_params.push_back(p->value);
      } else if (++bad_vals > cfg.patience) {
        stop = true;
      }
    }
  }

  if (!best_params.empty() && bad_vals > cfg.patience) {
    // early stop fired: keep the best validation weights
    const auto& all = model.params().all();
    for (size_t i = 0; i < all.size(); ++i) all[i]->value = best_params[i];
  }

  result.steps = step;
  save_checkpoint(result.checkpoint_path, model.params(), cfg);
  return result;
}

AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "components") return AblationAxis::components;
  if (s == "L" || s == "L_count") return AblationAxis::L_count;
  if (s == "K" || s == "K_steps") return AblationAxis::K_steps;
  if (s == "refine_io") return AblationAxis::refine_io;
  throw UsageError("unknown ablation axis: " + s + " (components|L|K|refine_io)");
}

namespace {

int largest_divisor_leq(int K, int cap) {
  for (int g = std::min(K, cap); g >= 1; --g) {
    if (K % g == 0) return g;
  }
  return 1;
}

EvalReport train_and_eval(const ExperimentConfig& cfg) {
  TrainResult tr = train(cfg);
  Model model(cfg.model_config(), cfg.seed);
  load_checkpoint(tr.checkpoint_path, &model.params());
  DatasetSplit data = load_dataset(cfg);
  ModelSampler sampler(model, cfg);
  return sampler.evaluate(data.eval, cfg.n_samples, derive_seed(cfg.seed, 0xE7A1));
}

std::string cell(const EvalReport& r) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f / %.2f", r.avg_ade, r.avg_fde);
  return buf;
}

}  // namespace

std::vector<AblationRow> run_ablation(const ExperimentConfig& base, AblationAxis axis) {
  fs::create_directories(base.out_dir);
  std::vector<AblationRow> rows;
  std::ostringstream table;
  std::string axis_name;

  if (axis == AblationAxis::components) {
    axis_name = "components";
    // rows follow the component table: all on, then refine/softmask/short/long off
    const bool flags[5][4] = {
        {true, true, true, true},
        {true, true, true, false},
        {true, true, false, true},
        {true, false, true, true},
        {false, true, true, true},
    };
    table << "Long  Short  Softmask  Refine  ADE / FDE\n";
    for (int i = 0; i < 5; ++i) {
      ExperimentConfig cfg = base;
      cfg.enable_long = flags[i][0];
      cfg.enable_short = flags[i][1];
      cfg.enable_softmask = flags[i][2];
      cfg.enable_refine = flags[i][3];
      cfg.out_dir = (fs::path(base.out_dir) / ("components_row" + std::to_string(i))).string();
      EvalReport rep = train_and_eval(cfg);
      auto mark = [](bool on) { return on ? "   v " : "     "; };
      table << mark(cfg.enable_long) << " " << mark(cfg.enable_short) << "    " << mark(cfg.enable_softmask)
            << "   " << mark(cfg.enable_refine) << "  " << cell(rep) << "\n";
      std::string label = std::string("long=") + (cfg.enable_long ? "1" : "0") +
                          " short=" + (cfg.enable_short ? "1" : "0") +
                          " softmask=" + (cfg.enable_softmask ? "1" : "0") +
                          " refine=" + (cfg.enable_refine ? "1" : "0");
      rows.push_back({label, rep});
    }
  } else if (axis == AblationAxis::L_count || axis == AblationAxis::K_steps) {
    const bool is_L = axis == AblationAxis::L_count;
    axis_name = is_L ? "L" : "K";
    const std::vector<int> values = is_L ? std::vector<int>{1, 3, 5, 10, 20}
                                         : std::vector<int>{10, 50, 100, 150, 200};
    for (int v : values) {
      ExperimentConfig cfg = base;
      if (is_L) {
        cfg.L = v;
      } else {
        cfg.K = v;
        cfg.gamma = largest_divisor_leq(v, base.gamma);
      }
      cfg.out_dir = (fs::path(base.out_dir) / (axis_name + std::to_string(v))).string();
      rows.push_back({axis_name + "=" + std::to_string(v), train_and_eval(cfg)});
    }
    // scenes as rows, axis values as columns (benchmark-table layout)
    table << axis_name;
    for (int v : values) table << "\t" << v;
    table << "\n";
    std::vector<std::string> scenes;
    for (const auto& s : rows.front().report.scenes) scenes.push_back(s.scene);
    for (size_t si = 0; si < scenes.size(); ++si) {
      table << scenes[si];
      for (const auto& row : rows) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f/%.2f", row.report.scenes[si].ade,
                      row.report.scenes[si].fde);
        table << "\t" << buf;
      }
      table << "\n";
    }
    table << "AVG";
    for (const auto& row : rows) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f/%.2f", row.report.avg_ade, row.report.avg_fde);
      table << "\t" << buf;
    }
    table << "\n";
  } else {
    axis_name = "refine_io";
    const std::pair<const char*, const char*> variants[4] = {
        {"eps", "deps"}, {"eps", "dy0"}, {"y", "deps"}, {"y", "dy0"}};
    table << "In     Out     ADE / FDE\n";
    const char* in_label[2] = {"eps_k", "y_k"};
    const char* out_label[2] = {"d_eps", "d_y0"};
    for (int i = 0; i < 4; ++i) {
      ExperimentConfig cfg = base;
      cfg.refine_in = variants[i].first;
      cfg.refine_out = variants[i].second;
      cfg.enable_refine = true;
      cfg.out_dir = (fs::path(base.out_dir) / ("refine_row" + std::to_string(i))).string();
      EvalReport rep = train_and_eval(cfg);
      table << in_label[std::string(variants[i].first) == "y"] << "  "
            << out_label[std::string(variants[i].second) == "dy0"] << "   " << cell(rep) << "\n";
      rows.push_back({std::string(variants[i].first) + "->" + variants[i].second, rep});
    }
  }

  std::ofstream txt(fs::path(base.out_dir) / ("ablation_" + axis_name + ".txt"));
  txt << table.str();
  std::ofstream js(fs::path(base.out_dir) / ("ablation_" + axis_name + ".json"));
  js << "[";
  for (size_t i = 0; i < rows.size(); ++i) {
    if (i) js << ",";
    js << "{\"label\":\"" << rows[i].label << "\",\"report\":" << rows[i].report.to_json() << "}";
  }
  js << "]\n";
  return rows;
}

}  // namespace trajdiff
