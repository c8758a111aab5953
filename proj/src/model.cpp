#include "trajdiff/model.hpp"

#include <cassert>

namespace trajdiff {

namespace {
const char* kModalityName[3] = {"obs", "short", "long"};
}

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  Rng rng(derive_seed(seed, 0x1417));
  auto& ps = params_;
  const Eigen::Index d = cfg.d;
  const Eigen::Index w = cfg.den_width;

  enc_in_ = nn::Linear(ps, "encoder.in", 4, d, rng);
  for (int i = 0; i < cfg.enc_depth; ++i) {
    enc_blocks_.emplace_back(ps, "encoder.block" + std::to_string(i), d, cfg.heads,
                             d * cfg.ffn_mult, rng);
  }
  enc_ln_ = nn::LayerNorm(ps, "encoder.out_ln", d, rng);

  intent_slots_ = &ps.add("intent.slots", cfg.t_pred, d, nn::Init::truncated_normal, rng);
  for (int i = 0; i < cfg.intent_depth; ++i) {
    intent_blocks_.emplace_back(ps, "intent.block" + std::to_string(i), d, cfg.heads,
                                d * cfg.ffn_mult, rng);
  }
  intent_ln_ = nn::LayerNorm(ps, "intent.out_ln", d, rng);
  intent_head_ = nn::Linear(ps, "intent.head", d, 3, rng);

  endpoint_queries_ = &ps.add("endpoint.queries", cfg.L, d, nn::Init::truncated_normal, rng);
  for (int i = 0; i < cfg.endpoint_depth; ++i) {
    endpoint_blocks_.emplace_back(ps, "endpoint.block" + std::to_string(i), d, cfg.heads,
                                  d * cfg.ffn_mult, rng, /*with_cross=*/true);
  }
  endpoint_ln_ = nn::LayerNorm(ps, "endpoint.out_ln", d, rng);
  endpoint_point_h1_ = nn::Linear(ps, "endpoint.point_h1", d, d, rng);
  endpoint_point_h2_ = nn::Linear(ps, "endpoint.point_h2", d, 2, rng);
  endpoint_prob_h1_ = nn::Linear(ps, "endpoint.prob_h1", d, d, rng);
  endpoint_prob_h2_ = nn::Linear(ps, "endpoint.prob_h2", d, 1, rng);

  cond_obs_proj_ = nn::Linear(ps, "cond.obs", d, d, rng);
  cond_short_h1_ = nn::Linear(ps, "cond.short_h1", 3 * cfg.t_pred, d, rng);
  cond_short_h2_ = nn::Linear(ps, "cond.short_h2", d, d, rng);
  cond_long_h1_ = nn::Linear(ps, "cond.long_h1", 2, d, rng);
  cond_long_h2_ = nn::Linear(ps, "cond.long_h2", d, d, rng);
  for (int m = 0; m < 3; ++m) {
    std::string base = std::string("mask.") + kModalityName[m];
    mask_h1_[m] = nn::Linear(ps, base + ".h1", d, d, rng);
    mask_h2_[m] = nn::Linear(ps, base + ".h2", d, d, rng);
    mask_token_[m] = &ps.add(base + ".token", 1, d, nn::Init::truncated_normal, rng);
  }
  step_proj_ = nn::Linear(ps, "cond.step", d, d, rng);

  den_in_ = nn::Linear(ps, "denoiser.in", 2, w, rng);
  const char* den_cond[4] = {"obs", "short", "long", "step"};
  for (int i = 0; i < 4; ++i) {
    den_cond_proj_[i] = nn::Linear(ps, std::string("denoiser.cond_") + den_cond[i], d, w, rng);
  }
  den_cond_pos_ = &ps.add("denoiser.cond_pos", 4, w, nn::Init::truncated_normal, rng);
  for (int i = 0; i < cfg.den_depth; ++i) {
    den_blocks_.emplace_back(ps, "denoiser.block" + std::to_string(i), w, cfg.den_heads,
                             w * cfg.ffn_mult, rng);
  }
  den_ln_ = nn::LayerNorm(ps, "denoiser.out_ln", w, rng);
  den_head_ = nn::Linear(ps, "denoiser.head", w, 2, rng);

  const Eigen::Index ref_in = 3 * d + 2 * cfg.t_pred + d;
  ref_h1_ = nn::Linear(ps, "refiner.h1", ref_in, d, rng);
  ref_h2_ = nn::Linear(ps, "refiner.h2", d, d, rng);
  ref_out_ = nn::Linear(ps, "refiner.out", d, 2 * cfg.t_pred, rng, /*zero_init=*/true);

  enc_pos_ = nn::sinusoidal_table(cfg.t_obs, d);
  den_pos_ = nn::sinusoidal_table(cfg.t_pred, w);
}

Mat Model::obs_features(const std::vector<std::vector<Vec2>>& obs) {
  const Eigen::Index B = static_cast<Eigen::Index>(obs.size());
  const Eigen::Index T = static_cast<Eigen::Index>(obs.front().size());
  Mat out(B * T, 4);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& o = obs[static_cast<size_t>(b)];
    for (Eigen::Index t = 0; t < T; ++t) {
      const Vec2& p = o[static_cast<size_t>(t)];
      const Vec2 v = t == 0 ? o[1] - o[0] : o[static_cast<size_t>(t)] - o[static_cast<size_t>(t - 1)];
      out(b * T + t, 0) = p.x;
      out(b * T + t, 1) = p.y;
      out(b * T + t, 2) = v.x;
      out(b * T + t, 3) = v.y;
    }
  }
  return out;
}

Var Model::encode(const Mat& obs_feats, Eigen::Index B, bool train) const {
  assert(obs_feats.rows() == B * cfg_.t_obs && obs_feats.cols() == 4);
  Var x = enc_in_(ad::constant(obs_feats), train);
  x = x + ad::constant(enc_pos_.replicate(B, 1));
  for (const auto& blk : enc_blocks_) x = blk(x, B, cfg_.t_obs, train);
  return enc_ln_(x, train);
}

IntentForward Model::intent_forward(const Var& f_obs, const Mat& theta0, const Mat& r0,
                                    Eigen::Index B, bool train) const {
  const Eigen::Index T = cfg_.t_pred;
  Var slots = ad::tile_blocks(nn::use(*intent_slots_, train), B);
  Var x = ad::interleave_blocks({f_obs, slots}, {cfg_.t_obs, T});
  const Eigen::Index t_total = cfg_.t_obs + T;
  for (const auto& blk : intent_blocks_) x = blk(x, B, t_total, train);
  x = intent_ln_(x, train);
  Var out = intent_head_(ad::slice_block_rows(x, t_total, cfg_.t_obs, T), train);

  IntentForward f;
  f.residuals = out;
  Var d_theta = ad::atan2_v(ad::slice_cols(out, 1, 1), ad::slice_cols(out, 0, 1));
  Var d_r = ad::softplus_v(ad::slice_cols(out, 2, 1));
  f.theta = ad::cumsum_blocked(d_theta, T) + ad::expand_item_rows(ad::constant(theta0), T);
  f.radius = ad::cumsum_blocked(d_r, T) + ad::expand_item_rows(ad::constant(r0), T);
  return f;
}

EndpointForward Model::endpoint_forward(const Var& f_obs, Eigen::Index B, bool train) const {
  Var q = ad::tile_blocks(nn::use(*endpoint_queries_, train), B);
  for (const auto& blk : endpoint_blocks_) {
    q = blk(q, f_obs, B, cfg_.L, cfg_.t_obs, train);
  }
  q = endpoint_ln_(q, train);
  EndpointForward f;
  f.points = endpoint_point_h2_(ad::relu(endpoint_point_h1_(q, train)), train);
  Var logits = endpoint_prob_h2_(ad::relu(endpoint_prob_h1_(q, train)), train);
  // softmax over each item's L candidates
  Var per_item = ad::flatten_blocks(logits, cfg_.L);  // (B x L)
  f.probs = ad::unflatten_blocks(ad::softmax_rows(per_item), cfg_.L);
  return f;
}

Var Model::cond_obs(const Var& f_obs, Eigen::Index B, bool train) const {
  (void)B;
  return cond_obs_proj_(ad::block_mean_rows(f_obs, cfg_.t_obs), train);
}

Var Model::cond_short(const Var& theta, const Var& radius, Eigen::Index B, bool train) const {
  (void)B;
  Var feats = ad::concat_cols({ad::cos_v(theta), ad::sin_v(theta), radius});
  Var flat = ad::flatten_blocks(feats, cfg_.t_pred);  // (B x 3*t_pred)
  return cond_short_h2_(ad::relu(cond_short_h1_(flat, train)), train);
}

Var Model::cond_long(const Var& endpoint, bool train) const {
  return cond_long_h2_(ad::relu(cond_long_h1_(endpoint, train)), train);
}

Var Model::soft_mask(const Var& g, int modality, bool train) const {
  Var m = ad::sigmoid(mask_h2_[modality](ad::relu(mask_h1_[modality](g, train)), train));
  Var token = nn::use(*mask_token_[modality], train);
  return ad::rsub_s(1.0, m) * g + m * token;
}

Var Model::step_embed(const std::vector<int>& ks, bool train) const {
  std::vector<double> pos(ks.size());
  for (size_t i = 0; i < ks.size(); ++i) pos[i] = static_cast<double>(ks[i]);
  return step_proj_(ad::constant(nn::sinusoidal_rows(pos, cfg_.d)), train);
}

Var Model::denoise(const GuidanceVars& g, const Var& y_k, Eigen::Index B, bool train) const {
  const Eigen::Index T = cfg_.t_pred;
  Var traj = den_in_(y_k, train) + ad::constant(den_pos_.replicate(B, 1));

  std::vector<Var> tokens{traj};
  std::vector<Eigen::Index> lens{T};
  Var cond_pos = nn::use(*den_cond_pos_, train);
  auto push_cond = [&](const Var& c, int which) {
    Var tok = den_cond_proj_[which](c, train) + ad::slice_rows(cond_pos, which, 1);
    tokens.push_back(tok);
    lens.push_back(1);
  };
  if (g.obs) push_cond(*g.obs, 0);
  if (g.short_term) push_cond(*g.short_term, 1);
  if (g.long_term) push_cond(*g.long_term, 2);
  push_cond(g.step, 3);

  Var x = ad::interleave_blocks(tokens, lens);
  Eigen::Index t_total = 0;
  for (auto l : lens) t_total += l;
  for (const auto& blk : den_blocks_) x = blk(x, B, t_total, train);
  x = den_ln_(x, train);
  return den_head_(ad::slice_block_rows(x, t_total, 0, T), train);
}

Var Model::refine(const GuidanceVars& g, const Var& eps_or_y, Eigen::Index B, bool train) const {
  auto zero_cond = [&]() { return ad::constant(Mat::Zero(B, cfg_.d)); };
  Var flat = ad::flatten_blocks(eps_or_y, cfg_.t_pred);
  Var in = ad::concat_cols({g.obs ? *g.obs : zero_cond(), g.short_term ? *g.short_term : zero_cond(),
                            g.long_term ? *g.long_term : zero_cond(), flat, g.step});
  Var h = ad::relu(ref_h1_(in, train));
  h = ad::relu(ref_h2_(h, train));
  return ad::unflatten_blocks(ref_out_(h, train), cfg_.t_pred);
}

}  // namespace trajdiff
