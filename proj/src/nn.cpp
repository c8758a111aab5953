#include "trajdiff/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace trajdiff::nn {

Param& ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init,
                       Rng& rng, double stddev) {
  if (by_name_.count(name)) throw std::logic_error("duplicate parameter: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Mat(rows, cols);
  switch (init) {
    case Init::zeros:
      p->value.setZero();
      break;
    case Init::ones:
      p->value.setOnes();
      break;
    case Init::truncated_normal:
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          double x;
          do {
            x = rng.normal(0.0, stddev);
          } while (std::abs(x) > 2.0 * stddev);
          p->value(i, j) = x;
        }
      }
      break;
  }
  p->m = Mat::Zero(rows, cols);
  p->v = Mat::Zero(rows, cols);
  Param* raw = p.get();
  params_.push_back(std::move(p));
  by_name_[name] = raw;
  return *raw;
}

Param* ParamStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.resize(0, 0);
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (p->grad.size() != 0) sq += p->grad.squaredNorm();
  }
  return std::sqrt(sq);
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps,
                           double max_grad_norm) {
  ++step_;
  double scale = 1.0;
  if (max_grad_norm > 0.0) {
    double norm = grad_norm();
    if (norm > max_grad_norm) scale = max_grad_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (auto& p : params_) {
    if (p->grad.size() == 0) continue;  // parameter unused this step
    Mat g = p->grad * scale;
    p->m = beta1 * p->m + (1.0 - beta1) * g;
    p->v = beta2 * p->v + (1.0 - beta2) * g.cwiseProduct(g);
    Mat mhat = p->m / bc1;
    Mat vhat = p->v / bc2;
    p->value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
}

size_t ParamStore::total_size() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

Linear::Linear(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
               Rng& rng, bool zero_init) {
  W = &ps.add(name + ".w", in, out, zero_init ? Init::zeros : Init::truncated_normal, rng);
  b = &ps.add(name + ".b", 1, out, Init::zeros, rng);
}

Var Linear::operator()(const Var& x, bool train) const {
  return ad::add(ad::matmul(x, use(*W, train)), use(*b, train));
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, Eigen::Index dim, Rng& rng) {
  gamma = &ps.add(name + ".gamma", 1, dim, Init::ones, rng);
  beta = &ps.add(name + ".beta", 1, dim, Init::zeros, rng);
}

Var LayerNorm::operator()(const Var& x, bool train) const {
  return ad::layer_norm(x, use(*gamma, train), use(*beta, train));
}

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& name, Eigen::Index dim,
                                   int heads_, Eigen::Index ffn_dim, Rng& rng, bool with_cross_)
    : heads(heads_), with_cross(with_cross_) {
  ln_attn = LayerNorm(ps, name + ".ln_attn", dim, rng);
  wq = Linear(ps, name + ".wq", dim, dim, rng);
  wk = Linear(ps, name + ".wk", dim, dim, rng);
  wv = Linear(ps, name + ".wv", dim, dim, rng);
  wo = Linear(ps, name + ".wo", dim, dim, rng);
  if (with_cross) {
    ln_cross = LayerNorm(ps, name + ".ln_cross", dim, rng);
    cq = Linear(ps, name + ".cq", dim, dim, rng);
    ck = Linear(ps, name + ".ck", dim, dim, rng);
    cv = Linear(ps, name + ".cv", dim, dim, rng);
    co = Linear(ps, name + ".co", dim, dim, rng);
  }
  ln_ffn = LayerNorm(ps, name + ".ln_ffn", dim, rng);
  ff1 = Linear(ps, name + ".ff1", dim, ffn_dim, rng);
  ff2 = Linear(ps, name + ".ff2", ffn_dim, dim, rng);
}

Var TransformerBlock::operator()(const Var& x, Eigen::Index B, Eigen::Index T, bool train) const {
  Var h = ln_attn(x, train);
  Var att = ad::attention(wq(h, train), wk(h, train), wv(h, train), B, T, T, heads);
  Var y = x + wo(att, train);
  Var f = ln_ffn(y, train);
  return y + ff2(ad::relu(ff1(f, train)), train);
}

Var TransformerBlock::operator()(const Var& x, const Var& memory, Eigen::Index B, Eigen::Index T,
                                 Eigen::Index Tm, bool train) const {
  Var h = ln_attn(x, train);
  Var att = ad::attention(wq(h, train), wk(h, train), wv(h, train), B, T, T, heads);
  Var y = x + wo(att, train);
  Var c = ln_cross(y, train);
  Var cross = ad::attention(cq(c, train), ck(memory, train), cv(memory, train), B, T, Tm, heads);
  y = y + co(cross, train);
  Var f = ln_ffn(y, train);
  return y + ff2(ad::relu(ff1(f, train)), train);
}

Mat sinusoidal_table(Eigen::Index T, Eigen::Index dim) {
  std::vector<double> pos(static_cast<size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) pos[static_cast<size_t>(t)] = static_cast<double>(t);
  return sinusoidal_rows(pos, dim);
}

Mat sinusoidal_rows(const std::vector<double>& positions, Eigen::Index dim) {
  Mat out(static_cast<Eigen::Index>(positions.size()), dim);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double p = positions[static_cast<size_t>(r)];
    for (Eigen::Index i = 0; i < dim / 2; ++i) {
      double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
      out(r, 2 * i) = std::sin(p * freq);
      out(r, 2 * i + 1) = std::cos(p * freq);
    }
    if (dim % 2 == 1) out(r, dim - 1) = 0.0;
  }
  return out;
}

}  // namespace trajdiff::nn
