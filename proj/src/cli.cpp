#include "trajdiff/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "trajdiff/checkpoint.hpp"
#include "trajdiff/errors.hpp"
#include "trajdiff/plot.hpp"
#include "trajdiff/sampler.hpp"
#include "trajdiff/train.hpp"

namespace trajdiff {

namespace {

// Config resolution: file values first, then direct flags, then --set pairs.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flag_overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "config file (key = value lines)");
    app->add_option("--set", sets, "override any config key, e.g. --set K=50")->take_all();
    auto track = [this](const std::string& key) {
      return [this, key](const std::string& v) { flag_overrides.push_back({key, v}); };
    };
    app->add_option_function<std::string>("--K", track("K"), "diffusion steps");
    app->add_option_function<std::string>("--gamma", track("gamma"), "DDIM stride");
    app->add_option_function<std::string>("--L", track("L"), "endpoint candidates");
    app->add_option_function<std::string>("--epochs", track("epochs"), "training epochs");
    app->add_option_function<std::string>("--batch-size", track("batch_size"), "batch size");
    app->add_option_function<std::string>("--lr", track("lr"), "learning rate");
    app->add_option_function<std::string>("--seed", track("seed"), "master seed");
    app->add_option_function<std::string>("--dataset", track("dataset"), "synthetic|ethucy|sdd");
    app->add_option_function<std::string>("--data-dir", track("data_dir"), "scene directory");
    app->add_option_function<std::string>("--holdout", track("holdout"), "held-out scene");
    app->add_option_function<std::string>("--max-steps", track("max_steps"), "step cap");
    app->add_option_function<std::string>("--train-minutes", track("train_minutes"),
                                          "wall-clock budget");
    app->add_option_function<std::string>("--n", track("n_samples"), "samples per prediction");
    app->add_option_function<std::string>("--out", track("out_dir"), "output directory");
  }

  ExperimentConfig resolve(const ExperimentConfig* base = nullptr) const {
    ExperimentConfig cfg = base ? *base
                                : (config_path.empty() ? ExperimentConfig{}
                                                       : ExperimentConfig::from_file(config_path));
    if (base && !config_path.empty()) {
      throw UsageError("--config cannot be combined with a checkpoint config");
    }
    for (const auto& [k, v] : flag_overrides) cfg.apply_kv(k, v);
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got: " + s);
      cfg.apply_kv(s.substr(0, eq), s.substr(eq + 1));
    }
    return cfg;
  }
};

int cmd_train(const ConfigArgs& args) {
  ExperimentConfig cfg = args.resolve();
  cfg.validate();
  TrainResult r = train(cfg);
  std::cout << "trained " << r.steps << " steps; first loss " << r.first_loss << ", final loss "
            << r.final_loss << "\n";
  std::cout << "checkpoint: " << r.checkpoint_path << "\n";
  std::cout << "log: " << r.log_path << "\n";
  std::cout << "config digest: " << cfg.digest() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const ConfigArgs& args, const std::string& report_path,
             bool oracle) {
  ExperimentConfig cfg;
  std::unique_ptr<Model> model;
  if (!ckpt.empty()) {
    cfg = peek_checkpoint_config(ckpt);
    cfg = args.resolve(&cfg);
    model = std::make_unique<Model>(cfg.model_config(), cfg.seed);
    load_checkpoint(ckpt, &model->params());
  } else if (oracle) {
    cfg = args.resolve();
  } else {
    throw UsageError("eval: --ckpt is required (or --oracle for the self-check mode)");
  }
  cfg.validate();

  DatasetSplit data = load_dataset(cfg);
  EvalReport report;
  const uint64_t seed = derive_seed(cfg.seed, 0xE7A1);
  if (oracle) {
    // metric-path self check: a sampler that returns the ground truth
    WindowSampler gt = [](const TrajectoryWindow& w, int n, uint64_t) {
      return std::vector<Trajectory>(static_cast<size_t>(n), w.fut);
    };
    report = evaluate_split(gt, data.eval, cfg.n_samples, seed, cfg.digest());
  } else {
    ModelSampler sampler(*model, cfg);
    report = sampler.evaluate(data.eval, cfg.n_samples, seed);
  }
  std::cout << report.table();
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    if (!f) throw DataError("cannot write report: " + report_path);
    f << report.to_json() << "\n";
    std::cout << "report: " << report_path << "\n";
  }
  return 0;
}

int cmd_sample(const std::string& ckpt, const ConfigArgs& args, int window_id, int n,
               uint64_t seed, const std::string& out_path) {
  ExperimentConfig cfg = peek_checkpoint_config(ckpt);
  cfg = args.resolve(&cfg);
  cfg.validate();
  Model model(cfg.model_config(), cfg.seed);
  load_checkpoint(ckpt, &model.params());

  DatasetSplit data = load_dataset(cfg);
  if (window_id < 0 || static_cast<size_t>(window_id) >= data.eval.size()) {
    throw DataError("sample: window id out of range (eval split has " +
                    std::to_string(data.eval.size()) + " windows)");
  }
  ModelSampler sampler(model, cfg);
  auto trajs = sampler.sample_window(data.eval[static_cast<size_t>(window_id)], n, seed);

  std::ostream* os = &std::cout;
  std::ofstream f;
  if (!out_path.empty()) {
    f.open(out_path);
    if (!f) throw DataError("cannot write samples: " + out_path);
    os = &f;
  }
  (*os) << "{\"window\":" << window_id << ",\"seed\":" << seed << ",\"config_digest\":\""
        << cfg.digest() << "\",\"samples\":[";
  for (size_t s = 0; s < trajs.size(); ++s) {
    if (s) (*os) << ",";
    (*os) << "[";
    for (size_t t = 0; t < trajs[s].size(); ++t) {
      if (t) (*os) << ",";
      (*os) << "[" << trajs[s][t].x << "," << trajs[s][t].y << "]";
    }
    (*os) << "]";
  }
  (*os) << "]}\n";
  return 0;
}

int cmd_ablate(const ConfigArgs& args, const std::string& axis) {
  ExperimentConfig cfg = args.resolve();
  cfg.validate();
  run_ablation(cfg, ablation_axis_from_string(axis));
  std::string table_path =
      (std::filesystem::path(cfg.out_dir) / ("ablation_" + (axis == "L_count" ? "L" : axis == "K_steps" ? "K" : axis) + ".txt"))
          .string();
  std::ifstream t(table_path);
  std::cout << t.rdbuf();
  std::cout << "table: " << table_path << "\n";
  return 0;
}

int cmd_plot(const std::string& ckpt, const ConfigArgs& args, const std::vector<int>& window_ids,
             const std::string& overlays, int n, uint64_t seed, const std::string& out_path) {
  ExperimentConfig cfg = peek_checkpoint_config(ckpt);
  cfg = args.resolve(&cfg);
  cfg.validate();
  Model model(cfg.model_config(), cfg.seed);
  load_checkpoint(ckpt, &model.params());

  PlotSpec spec;
  spec.window_ids = window_ids;
  spec.n_samples = n;
  spec.out_path = out_path;
  std::istringstream ss(overlays);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "observed") spec.observed = true;
    else if (item == "gt" || item == "ground_truth") spec.ground_truth = true;
    else if (item == "samples") spec.samples = true;
    else if (item == "endpoints") spec.endpoints = true;
    else if (item == "intent") spec.intent = true;
    else if (!item.empty()) throw UsageError("plot: unknown overlay '" + item + "'");
  }

  DatasetSplit data = load_dataset(cfg);
  auto files = render_plots(model, cfg, data.eval, spec, seed);
  for (const auto& fpath : files) std::cout << fpath << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"intention-conditioned trajectory diffusion"};
  app.require_subcommand(1);

  ConfigArgs train_args, eval_args, sample_args, ablate_args, plot_args;

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_args.attach(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (best-of-n ADE/FDE)");
  std::string eval_ckpt, report_path;
  bool oracle = false;
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path");
  eval_cmd->add_option("--report", report_path, "write the machine-readable report here");
  eval_cmd->add_flag("--oracle", oracle, "metric-path self check: sampler returns ground truth");
  eval_args.attach(eval_cmd);

  auto* sample_cmd = app.add_subcommand("sample", "sample trajectories for one window");
  std::string sample_ckpt, sample_out;
  int sample_window = 0, sample_n = 20;
  uint64_t sample_seed = 1;
  sample_cmd->add_option("--ckpt", sample_ckpt, "checkpoint path")->required();
  sample_cmd->add_option("--window", sample_window, "eval-split window index");
  sample_cmd->add_option("--n-samples", sample_n, "number of samples");
  sample_cmd->add_option("--sample-seed", sample_seed, "sampling seed");
  sample_cmd->add_option("--out-file", sample_out, "output JSON path (stdout when omitted)");
  sample_args.attach(sample_cmd);

  auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation matrix");
  std::string axis;
  ablate_cmd->add_option("--axis", axis, "components|L|K|refine_io")->required();
  ablate_args.attach(ablate_cmd);

  auto* plot_cmd = app.add_subcommand("plot", "emit trajectory/endpoint figures");
  std::string plot_ckpt, overlays = "observed,gt,samples", plot_out = "plot.svg";
  std::vector<int> plot_windows{0};
  int plot_n = 20;
  uint64_t plot_seed = 1;
  plot_cmd->add_option("--ckpt", plot_ckpt, "checkpoint path")->required();
  plot_cmd->add_option("--windows", plot_windows, "eval-split window indices")->take_all();
  plot_cmd->add_option("--overlays", overlays, "comma list: observed,gt,samples,endpoints,intent");
  plot_cmd->add_option("--n-samples", plot_n, "sample overlay count");
  plot_cmd->add_option("--plot-seed", plot_seed, "sampling seed");
  plot_cmd->add_option("--out-file", plot_out, "output SVG path");
  plot_args.attach(plot_cmd);

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_args, report_path, oracle);
    if (sample_cmd->parsed()) {
      return cmd_sample(sample_ckpt, sample_args, sample_window, sample_n, sample_seed, sample_out);
    }
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, axis);
    if (plot_cmd->parsed()) {
      return cmd_plot(plot_ckpt, plot_args, plot_windows, overlays, plot_n, plot_seed, plot_out);
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace trajdiff
