#include "trajdiff/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "trajdiff/errors.hpp"

namespace trajdiff {

namespace {

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double to_double(const std::string& s, const std::string& key) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw UsageError("config key '" + key + "': bad number '" + s + "'");
  return v;
}

long to_long(const std::string& s, const std::string& key) {
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw UsageError("config key '" + key + "': bad integer '" + s + "'");
  return v;
}

bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "on") return true;
  if (s == "false" || s == "0" || s == "off") return false;
  throw UsageError("config key '" + key + "': bad boolean '" + s + "'");
}

// Canonical field table; serialization order == declaration order here.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> f;
    auto str = [&](const std::string& key, std::string ExperimentConfig::* p) {
      f.push_back({key, {[p](const ExperimentConfig& c) { return c.*p; },
                         [p](ExperimentConfig& c, const std::string& v) { c.*p = v; }}});
    };
    auto integer = [&](const std::string& key, int ExperimentConfig::* p) {
      f.push_back({key, {[p](const ExperimentConfig& c) { return std::to_string(c.*p); },
                         [p, key](ExperimentConfig& c, const std::string& v) {
                           c.*p = static_cast<int>(to_long(v, key));
                         }}});
    };
    auto u64 = [&](const std::string& key, uint64_t ExperimentConfig::* p) {
      f.push_back({key, {[p](const ExperimentConfig& c) { return std::to_string(c.*p); },
                         [p, key](ExperimentConfig& c, const std::string& v) {
                           c.*p = static_cast<uint64_t>(to_long(v, key));
                         }}});
    };
    auto real = [&](const std::string& key, double ExperimentConfig::* p) {
      f.push_back({key, {[p](const ExperimentConfig& c) { return fmt_double(c.*p); },
                         [p, key](ExperimentConfig& c, const std::string& v) { c.*p = to_double(v, key); }}});
    };
    auto boolean = [&](const std::string& key, bool ExperimentConfig::* p) {
      f.push_back({key, {[p](const ExperimentConfig& c) { return std::string(c.*p ? "true" : "false"); },
                         [p, key](ExperimentConfig& c, const std::string& v) { c.*p = to_bool(v, key); }}});
    };
    auto weight = [&](const std::string& key, double LossWeights::* p) {
      f.push_back({key, {[p](const ExperimentConfig& c) { return fmt_double(c.weights.*p); },
                         [p, key](ExperimentConfig& c, const std::string& v) {
                           c.weights.*p = to_double(v, key);
                         }}});
    };

    str("dataset", &ExperimentConfig::dataset);
    str("data_dir", &ExperimentConfig::data_dir);
    str("train_files", &ExperimentConfig::train_files);
    str("eval_files", &ExperimentConfig::eval_files);
    str("holdout", &ExperimentConfig::holdout);
    integer("synthetic_count", &ExperimentConfig::synthetic_count);
    integer("synthetic_eval_count", &ExperimentConfig::synthetic_eval_count);
    u64("synthetic_seed", &ExperimentConfig::synthetic_seed);
    integer("t_obs", &ExperimentConfig::t_obs);
    integer("t_pred", &ExperimentConfig::t_pred);
    integer("window_stride", &ExperimentConfig::window_stride);
    real("dt", &ExperimentConfig::dt);
    integer("K", &ExperimentConfig::K);
    integer("gamma", &ExperimentConfig::gamma);
    integer("L", &ExperimentConfig::L);
    integer("d", &ExperimentConfig::d);
    integer("heads", &ExperimentConfig::heads);
    integer("enc_depth", &ExperimentConfig::enc_depth);
    integer("intent_depth", &ExperimentConfig::intent_depth);
    integer("endpoint_depth", &ExperimentConfig::endpoint_depth);
    integer("den_width", &ExperimentConfig::den_width);
    integer("den_depth", &ExperimentConfig::den_depth);
    integer("den_heads", &ExperimentConfig::den_heads);
    integer("ffn_mult", &ExperimentConfig::ffn_mult);
    real("beta_start", &ExperimentConfig::beta_start);
    real("beta_end", &ExperimentConfig::beta_end);
    real("eps_polar", &ExperimentConfig::eps_polar);
    real("data_scale", &ExperimentConfig::data_scale);
    real("p_min", &ExperimentConfig::p_min);
    real("lr", &ExperimentConfig::lr);
    integer("batch_size", &ExperimentConfig::batch_size);
    integer("epochs", &ExperimentConfig::epochs);
    integer("max_steps", &ExperimentConfig::max_steps);
    real("train_minutes", &ExperimentConfig::train_minutes);
    real("grad_clip", &ExperimentConfig::grad_clip);
    u64("seed", &ExperimentConfig::seed);
    integer("ckpt_every", &ExperimentConfig::ckpt_every);
    boolean("early_stop", &ExperimentConfig::early_stop);
    real("val_fraction", &ExperimentConfig::val_fraction);
    integer("val_every_epochs", &ExperimentConfig::val_every_epochs);
    integer("patience", &ExperimentConfig::patience);
    weight("lambda_theta", &LossWeights::lambda_theta);
    weight("lambda_r", &LossWeights::lambda_r);
    weight("lambda_e", &LossWeights::lambda_e);
    weight("lambda_p", &LossWeights::lambda_p);
    weight("lambda_dif", &LossWeights::lambda_dif);
    boolean("enable_long", &ExperimentConfig::enable_long);
    boolean("enable_short", &ExperimentConfig::enable_short);
    boolean("enable_softmask", &ExperimentConfig::enable_softmask);
    boolean("enable_refine", &ExperimentConfig::enable_refine);
    str("refine_in", &ExperimentConfig::refine_in);
    str("refine_out", &ExperimentConfig::refine_out);
    boolean("endpoint_cycle", &ExperimentConfig::endpoint_cycle);
    integer("n_samples", &ExperimentConfig::n_samples);
    str("out_dir", &ExperimentConfig::out_dir);
    return f;
  }();
  return table;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m;
  m.t_obs = t_obs;
  m.t_pred = t_pred;
  m.d = d;
  m.L = L;
  m.heads = heads;
  m.enc_depth = enc_depth;
  m.intent_depth = intent_depth;
  m.endpoint_depth = endpoint_depth;
  m.den_width = den_width;
  m.den_depth = den_depth;
  m.den_heads = den_heads;
  m.ffn_mult = ffn_mult;
  return m;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    cfg.apply_kv(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void ExperimentConfig::apply_kv(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, value);
      return;
    }
  }
  throw UsageError("unknown config key: " + key);
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [name, field] : fields()) os << name << " = " << field.get(*this) << "\n";
  return os.str();
}

std::string ExperimentConfig::digest() const {
  const std::string text = serialize();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void ExperimentConfig::validate() const {
  auto positive = [](long v, const char* key) {
    if (v <= 0) throw UsageError(std::string("config key '") + key + "' must be positive");
  };
  positive(t_obs, "t_obs");
  positive(t_pred, "t_pred");
  positive(K, "K");
  positive(gamma, "gamma");
  positive(L, "L");
  positive(d, "d");
  positive(heads, "heads");
  positive(den_width, "den_width");
  positive(den_depth, "den_depth");
  positive(den_heads, "den_heads");
  positive(batch_size, "batch_size");
  positive(n_samples, "n_samples");
  if (t_obs < 2) throw UsageError("config key 't_obs' must be >= 2");
  if (K % gamma != 0) throw UsageError("config key 'gamma' must divide K");
  if (refine_in != "eps" && refine_in != "y") throw UsageError("config key 'refine_in' must be eps|y");
  if (refine_out != "deps" && refine_out != "dy0") {
    throw UsageError("config key 'refine_out' must be deps|dy0");
  }
  if (dataset != "synthetic" && dataset != "ethucy" && dataset != "sdd") {
    throw UsageError("config key 'dataset' must be synthetic|ethucy|sdd");
  }
  if (dataset != "synthetic" && data_dir.empty() && train_files.empty() && eval_files.empty()) {
    throw UsageError("config key 'data_dir' (or train_files/eval_files) is required for dataset=" +
                     dataset);
  }
  if (weights.lambda_theta < 0 || weights.lambda_r < 0 || weights.lambda_e < 0 ||
      weights.lambda_p < 0 || weights.lambda_dif < 0) {
    throw UsageError("loss weights must be non-negative");
  }
}

}  // namespace trajdiff
