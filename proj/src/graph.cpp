#include "trajdiff/graph.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace trajdiff::ad {

namespace {

using Index = Eigen::Index;

NodePtr make_node(Mat val, std::vector<NodePtr> parents) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  for (auto& p : parents) {
    if (p->needs_grad) n->needs_grad = true;
  }
  n->parents = std::move(parents);
  return n;
}

void ensure_grad(Node& n) {
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
}

template <typename Expr>
void accum(const NodePtr& n, const Expr& g) {
  if (!n->needs_grad) return;
  ensure_grad(*n);
  n->grad += g;
}

Mat expand(const Mat& m, Index r, Index c) {
  if (m.rows() == r && m.cols() == c) return m;
  return m.replicate(r / m.rows(), c / m.cols());
}

// Sum a full-shape gradient back down to a broadcast operand's shape.
Mat reduce_to(const Mat& g, Index r, Index c) {
  if (g.rows() == r && g.cols() == c) return g;
  Mat out = g;
  if (r == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (c == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

void check_bcast(const Var& a, const Var& b, const char* op) {
  auto ok = [](Index x, Index y) { return x == y || x == 1 || y == 1; };
  if (!ok(a.rows(), b.rows()) || !ok(a.cols(), b.cols())) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ") vs (" +
                                std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace

Var constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  return Var(n);
}

Var scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var leaf(const Mat& v, Mat* grad_sink) {
  auto n = std::make_shared<Node>();
  n->val = v;
  if (grad_sink) {
    n->needs_grad = true;
    n->back = [grad_sink](Node& self) {
      if (grad_sink->size() == 0) *grad_sink = Mat::Zero(self.val.rows(), self.val.cols());
      *grad_sink += self.grad;
    };
  }
  return Var(n);
}

// --- binary -----------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_bcast(a, b, "add");
  Index r = std::max(a.rows(), b.rows()), c = std::max(a.cols(), b.cols());
  auto n = make_node(expand(a.val(), r, c) + expand(b.val(), r, c), {a.node(), b.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], reduce_to(self.grad, self.parents[0]->val.rows(), self.parents[0]->val.cols()));
    accum(self.parents[1], reduce_to(self.grad, self.parents[1]->val.rows(), self.parents[1]->val.cols()));
  };
  return Var(n);
}

Var sub(const Var& a, const Var& b) {
  check_bcast(a, b, "sub");
  Index r = std::max(a.rows(), b.rows()), c = std::max(a.cols(), b.cols());
  auto n = make_node(expand(a.val(), r, c) - expand(b.val(), r, c), {a.node(), b.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], reduce_to(self.grad, self.parents[0]->val.rows(), self.parents[0]->val.cols()));
    accum(self.parents[1], -reduce_to(self.grad, self.parents[1]->val.rows(), self.parents[1]->val.cols()));
  };
  return Var(n);
}

Var mul(const Var& a, const Var& b) {
  check_bcast(a, b, "mul");
  Index r = std::max(a.rows(), b.rows()), c = std::max(a.cols(), b.cols());
  auto n = make_node(expand(a.val(), r, c).cwiseProduct(expand(b.val(), r, c)),
                     {a.node(), b.node()});
  n->back = [r, c](Node& self) {
    const Mat& av = self.parents[0]->val;
    const Mat& bv = self.parents[1]->val;
    accum(self.parents[0], reduce_to(self.grad.cwiseProduct(expand(bv, r, c)), av.rows(), av.cols()));
    accum(self.parents[1], reduce_to(self.grad.cwiseProduct(expand(av, r, c)), bv.rows(), bv.cols()));
  };
  return Var(n);
}

Var div(const Var& a, const Var& b) {
  check_bcast(a, b, "div");
  Index r = std::max(a.rows(), b.rows()), c = std::max(a.cols(), b.cols());
  auto n = make_node(expand(a.val(), r, c).cwiseQuotient(expand(b.val(), r, c)),
                     {a.node(), b.node()});
  n->back = [r, c](Node& self) {
    const Mat& av = self.parents[0]->val;
    const Mat& bv = self.parents[1]->val;
    Mat be = expand(bv, r, c);
    accum(self.parents[0], reduce_to(self.grad.cwiseQuotient(be), av.rows(), av.cols()));
    accum(self.parents[1],
          reduce_to((-self.grad.cwiseProduct(self.val).cwiseQuotient(be)).eval(), bv.rows(), bv.cols()));
  };
  return Var(n);
}

Var add_s(const Var& a, double s) {
  auto n = make_node(a.val().array() + s, {a.node()});
  n->back = [](Node& self) { accum(self.parents[0], self.grad); };
  return Var(n);
}

Var mul_s(const Var& a, double s) {
  auto n = make_node(a.val() * s, {a.node()});
  n->back = [s](Node& self) { accum(self.parents[0], self.grad * s); };
  return Var(n);
}

Var rsub_s(double s, const Var& a) {
  auto n = make_node(s - a.val().array(), {a.node()});
  n->back = [](Node& self) { accum(self.parents[0], -self.grad); };
  return Var(n);
}

// --- matmul -------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  auto n = make_node(a.val() * b.val(), {a.node(), b.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], self.grad * self.parents[1]->val.transpose());
    accum(self.parents[1], self.parents[0]->val.transpose() * self.grad);
  };
  return Var(n);
}

Var matmul_nt(const Var& a, const Var& b) {
  auto n = make_node(a.val() * b.val().transpose(), {a.node(), b.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], self.grad * self.parents[1]->val);
    accum(self.parents[1], self.grad.transpose() * self.parents[0]->val);
  };
  return Var(n);
}

Var matmul_tn(const Var& a, const Var& b) {
  auto n = make_node(a.val().transpose() * b.val(), {a.node(), b.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], self.parents[1]->val * self.grad.transpose());
    accum(self.parents[1], self.parents[0]->val * self.grad);
  };
  return Var(n);
}

// --- reductions -----------------------------------------------------------------

Var sum(const Var& a) {
  Mat m(1, 1);
  m(0, 0) = a.val().sum();
  auto n = make_node(std::move(m), {a.node()});
  n->back = [](Node& self) {
    const Mat& av = self.parents[0]->val;
    accum(self.parents[0], Mat::Constant(av.rows(), av.cols(), self.grad(0, 0)));
  };
  return Var(n);
}

Var mean(const Var& a) {
  double inv = 1.0 / static_cast<double>(a.val().size());
  Mat m(1, 1);
  m(0, 0) = a.val().sum() * inv;
  auto n = make_node(std::move(m), {a.node()});
  n->back = [inv](Node& self) {
    const Mat& av = self.parents[0]->val;
    accum(self.parents[0], Mat::Constant(av.rows(), av.cols(), self.grad(0, 0) * inv));
  };
  return Var(n);
}

Var rowwise_sum(const Var& a) {
  auto n = make_node(a.val().rowwise().sum(), {a.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], self.grad.replicate(1, self.parents[0]->val.cols()));
  };
  return Var(n);
}

Var rowwise_mean(const Var& a) {
  double inv = 1.0 / static_cast<double>(a.val().cols());
  auto n = make_node(a.val().rowwise().mean(), {a.node()});
  n->back = [inv](Node& self) {
    accum(self.parents[0], (self.grad * inv).replicate(1, self.parents[0]->val.cols()));
  };
  return Var(n);
}

// --- unaries -----------------------------------------------------------------------

Var relu(const Var& a) {
  auto n = make_node(a.val().cwiseMax(0.0), {a.node()});
  n->back = [](Node& self) {
    accum(self.parents[0],
          self.grad.cwiseProduct((self.parents[0]->val.array() > 0.0).cast<double>().matrix()));
  };
  return Var(n);
}

Var sigmoid(const Var& a) {
  auto n = make_node((1.0 / (1.0 + (-a.val().array()).exp())).matrix(), {a.node()});
  n->back = [](Node& self) {
    auto y = self.val.array();
    accum(self.parents[0], (self.grad.array() * y * (1.0 - y)).matrix());
  };
  return Var(n);
}

Var tanh_v(const Var& a) {
  auto n = make_node(a.val().array().tanh().matrix(), {a.node()});
  n->back = [](Node& self) {
    auto y = self.val.array();
    accum(self.parents[0], (self.grad.array() * (1.0 - y * y)).matrix());
  };
  return Var(n);
}

Var softplus_v(const Var& a) {
  Mat v = a.val().unaryExpr([](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); });
  auto n = make_node(std::move(v), {a.node()});
  n->back = [](Node& self) {
    auto x = self.parents[0]->val.array();
    accum(self.parents[0], (self.grad.array() / (1.0 + (-x).exp())).matrix());
  };
  return Var(n);
}

Var exp_v(const Var& a) {
  auto n = make_node(a.val().array().exp().matrix(), {a.node()});
  n->back = [](Node& self) { accum(self.parents[0], self.grad.cwiseProduct(self.val)); };
  return Var(n);
}

Var log_v(const Var& a) {
  auto n = make_node(a.val().array().log().matrix(), {a.node()});
  n->back = [](Node& self) { accum(self.parents[0], self.grad.cwiseQuotient(self.parents[0]->val)); };
  return Var(n);
}

Var sqrt_v(const Var& a) {
  auto n = make_node(a.val().array().sqrt().matrix(), {a.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], (self.grad.array() * 0.5 / self.val.array()).matrix());
  };
  return Var(n);
}

Var square(const Var& a) {
  auto n = make_node(a.val().array().square().matrix(), {a.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], (self.grad.array() * 2.0 * self.parents[0]->val.array()).matrix());
  };
  return Var(n);
}

Var sin_v(const Var& a) {
  auto n = make_node(a.val().array().sin().matrix(), {a.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], (self.grad.array() * self.parents[0]->val.array().cos()).matrix());
  };
  return Var(n);
}

Var cos_v(const Var& a) {
  auto n = make_node(a.val().array().cos().matrix(), {a.node()});
  n->back = [](Node& self) {
    accum(self.parents[0], (-self.grad.array() * self.parents[0]->val.array().sin()).matrix());
  };
  return Var(n);
}

Var clamp_min(const Var& a, double c) {
  auto n = make_node(a.val().cwiseMax(c), {a.node()});
  n->back = [c](Node& self) {
    accum(self.parents[0],
          self.grad.cwiseProduct((self.parents[0]->val.array() > c).cast<double>().matrix()));
  };
  return Var(n);
}

Var atan2_v(const Var& y, const Var& x) {
  assert(y.rows() == x.rows() && y.cols() == x.cols());
  Mat v = y.val().binaryExpr(x.val(), [](double yy, double xx) { return std::atan2(yy, xx); });
  auto n = make_node(std::move(v), {y.node(), x.node()});
  n->back = [](Node& self) {
    auto yv = self.parents[0]->val.array();
    auto xv = self.parents[1]->val.array();
    Eigen::ArrayXXd denom = xv * xv + yv * yv;
    accum(self.parents[0], (self.grad.array() * xv / denom).matrix());
    accum(self.parents[1], (-self.grad.array() * yv / denom).matrix());
  };
  return Var(n);
}

// --- shape ops ---------------------------------------------------------------------

Var transpose(const Var& a) {
  auto n = make_node(a.val().transpose(), {a.node()});
  n->back = [](Node& self) { accum(self.parents[0], self.grad.transpose()); };
  return Var(n);
}

Var slice_rows(const Var& a, Index r0, Index nrows) {
  auto n = make_node(a.val().middleRows(r0, nrows), {a.node()});
  n->back = [r0, nrows](Node& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    ensure_grad(*p);
    p->grad.middleRows(r0, nrows) += self.grad;
  };
  return Var(n);
}

Var slice_cols(const Var& a, Index c0, Index ncols) {
  auto n = make_node(a.val().middleCols(c0, ncols), {a.node()});
  n->back = [c0, ncols](Node& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    ensure_grad(*p);
    p->grad.middleCols(c0, ncols) += self.grad;
  };
  return Var(n);
}

Var concat_rows(const std::vector<Var>& vs) {
  Index rows = 0, cols = vs.front().cols();
  std::vector<NodePtr> parents;
  for (const auto& v : vs) {
    rows += v.rows();
    parents.push_back(v.node());
  }
  Mat out(rows, cols);
  Index r = 0;
  for (const auto& v : vs) {
    out.middleRows(r, v.rows()) = v.val();
    r += v.rows();
  }
  auto n = make_node(std::move(out), std::move(parents));
  n->back = [](Node& self) {
    Index r = 0;
    for (auto& p : self.parents) {
      if (p->needs_grad) {
        ensure_grad(*p);
        p->grad += self.grad.middleRows(r, p->val.rows());
      }
      r += p->val.rows();
    }
  };
  return Var(n);
}

Var concat_cols(const std::vector<Var>& vs) {
  Index cols = 0, rows = vs.front().rows();
  std::vector<NodePtr> parents;
  for (const auto& v : vs) {
    cols += v.cols();
    parents.push_back(v.node());
  }
  Mat out(rows, cols);
  Index c = 0;
  for (const auto& v : vs) {
    out.middleCols(c, v.cols()) = v.val();
    c += v.cols();
  }
  auto n = make_node(std::move(out), std::move(parents));
  n->back = [](Node& self) {
    Index c = 0;
    for (auto& p : self.parents) {
      if (p->needs_grad) {
        ensure_grad(*p);
        p->grad += self.grad.middleCols(c, p->val.cols());
      }
      c += p->val.cols();
    }
  };
  return Var(n);
}

Var select_rows(const Var& a, const std::vector<Index>& idx) {
  Mat out(static_cast<Index>(idx.size()), a.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = a.val().row(idx[i]);
  auto n = make_node(std::move(out), {a.node()});
  n->back = [idx](Node& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    ensure_grad(*p);
    for (size_t i = 0; i < idx.size(); ++i) {
      p->grad.row(idx[i]) += self.grad.row(static_cast<Index>(i));
    }
  };
  return Var(n);
}

// --- batched-sequence ops -------------------------------------------------------------

Var cumsum_blocked(const Var& a, Index T) {
  assert(a.rows() % T == 0);
  Mat out = a.val();
  for (Index r = 0; r < out.rows(); ++r) {
    if (r % T != 0) out.row(r) += out.row(r - 1);
  }
  auto n = make_node(std::move(out), {a.node()});
  n->back = [T](Node& self) {
    Mat g = self.grad;
    for (Index r = g.rows() - 1; r > 0; --r) {
      if (r % T != 0) g.row(r - 1) += g.row(r);
    }
    accum(self.parents[0], g);
  };
  return Var(n);
}

Var expand_item_rows(const Var& a, Index T) {
  const Index B = a.rows(), C = a.cols();
  Mat out(B * T, C);
  for (Index b = 0; b < B; ++b) out.middleRows(b * T, T) = a.val().row(b).replicate(T, 1);
  auto n = make_node(std::move(out), {a.node()});
  n->back = [T, B, C](Node& self) {
    Mat g(B, C);
    for (Index b = 0; b < B; ++b) g.row(b) = self.grad.middleRows(b * T, T).colwise().sum();
    accum(self.parents[0], g);
  };
  return Var(n);
}

Var block_mean_rows(const Var& a, Index T) {
  assert(a.rows() % T == 0);
  const Index B = a.rows() / T, C = a.cols();
  Mat out(B, C);
  const double inv = 1.0 / static_cast<double>(T);
  for (Index b = 0; b < B; ++b) out.row(b) = a.val().middleRows(b * T, T).colwise().sum() * inv;
  auto n = make_node(std::move(out), {a.node()});
  n->back = [T, B, inv](Node& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    ensure_grad(*p);
    for (Index b = 0; b < B; ++b) {
      p->grad.middleRows(b * T, T) += (self.grad.row(b) * inv).replicate(T, 1);
    }
  };
  return Var(n);
}

Var flatten_blocks(const Var& a, Index T) {
  assert(a.rows() % T == 0);
  const Index B = a.rows() / T, C = a.cols();
  Mat out(B, T * C);
  for (Index b = 0; b < B; ++b) {
    for (Index t = 0; t < T; ++t) out.block(b, t * C, 1, C) = a.val().row(b * T + t);
  }
  auto n = make_node(std::move(out), {a.node()});
  n->back = [T, B, C](Node& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    ensure_grad(*p);
    for (Index b = 0; b < B; ++b) {
      for (Index t = 0; t < T; ++t) p->grad.row(b * T + t) += self.grad.block(b, t * C, 1, C);
    }
  };
  return Var(n);
}

Var unflatten_blocks(const Var& a, Index T) {
  const Index B = a.rows();
  assert(a.cols() % T == 0);
  const Index C = a.cols() / T;
  Mat out(B * T, C);
  for (Index b = 0; b < B; ++b) {
    for (Index t = 0; t < T; ++t) out.row(b * T + t) = a.val().block(b, t * C, 1, C);
  }
  auto n = make_node(std::move(out), {a.node()});
  n->back = [T, B, C](Node& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    ensure_grad(*p);
    for (Index b = 0; b < B; ++b) {
      for (Index t = 0; t < T; ++t) p->grad.block(b, t * C, 1, C) += self.grad.row(b * T + t);
    }
  };
  return Var(n);
}

Var tile_blocks(const Var& a, Index B) {
  const Index T = a.rows();
  auto n = make_node(a.val().replicate(B, 1), {a.node()});
  n->back = [T, B](Node& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    ensure_grad(*p);
    for (Index b = 0; b < B; ++b) p->grad += self.grad.middleRows(b * T, T);
  };
  return Var(n);
}

Var interleave_blocks(const std::vector<Var>& vs, const std::vector<Index>& Ts) {
  assert(vs.size() == Ts.size() && !vs.empty());
  const Index C = vs.front().cols();
  Index t_total = 0;
  for (Index t : Ts) t_total += t;
  const Index B = vs.front().rows() / Ts.front();

  Mat out(B * t_total, C);
  std::vector<NodePtr> parents;
  for (const auto& v : vs) parents.push_back(v.node());
  for (Index b = 0; b < B; ++b) {
    Index off = 0;
    for (size_t i = 0; i < vs.size(); ++i) {
      out.middleRows(b * t_total + off, Ts[i]) = vs[i].val().middleRows(b * Ts[i], Ts[i]);
      off += Ts[i];
    }
  }
  auto n = make_node(std::move(out), std::move(parents));
  n->back = [Ts, B, t_total](Node& self) {
    for (Index b = 0; b < B; ++b) {
      Index off = 0;
      for (size_t i = 0; i < self.parents.size(); ++i) {
        auto& p = self.parents[i];
        if (p->needs_grad) {
          ensure_grad(*p);
          p->grad.middleRows(b * Ts[i], Ts[i]) += self.grad.middleRows(b * t_total + off, Ts[i]);
        }
        off += Ts[i];
      }
    }
  };
  return Var(n);
}

Var slice_block_rows(const Var& a, Index t_total, Index offset, Index nrows) {
  assert(a.rows() % t_total == 0);
  const Index B = a.rows() / t_total;
  Mat out(B * nrows, a.cols());
  for (Index b = 0; b < B; ++b) {
    out.middleRows(b * nrows, nrows) = a.val().middleRows(b * t_total + offset, nrows);
  }
  auto n = make_node(std::move(out), {a.node()});
  n->back = [t_total, offset, nrows, B](Node& self) {
    auto& p = self.parents[0];
    if (!p->needs_grad) return;
    ensure_grad(*p);
    for (Index b = 0; b < B; ++b) {
      p->grad.middleRows(b * t_total + offset, nrows) += self.grad.middleRows(b * nrows, nrows);
    }
  };
  return Var(n);
}

// --- fused layers -----------------------------------------------------------------------

Var softmax_rows(const Var& a) {
  Mat v = a.val();
  for (Index r = 0; r < v.rows(); ++r) {
    Eigen::ArrayXd row = v.row(r).array();
    row -= row.maxCoeff();
    row = row.exp();
    v.row(r) = (row / row.sum()).matrix();
  }
  auto n = make_node(std::move(v), {a.node()});
  n->back = [](Node& self) {
    const Mat& y = self.val;
    Mat dx = self.grad.cwiseProduct(y);
    Eigen::VectorXd s = dx.rowwise().sum();
    dx.noalias() -= s.asDiagonal() * y;
    accum(self.parents[0], dx);
  };
  return Var(n);
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Index R = x.rows(), C = x.cols();
  Eigen::VectorXd mu = x.val().rowwise().mean();
  Mat centered = x.val().colwise() - mu;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(C)) + eps)
          .sqrt()
          .inverse()
          .matrix();
  Mat xhat = inv_std.asDiagonal() * centered;
  Mat out = (xhat.array().rowwise() * gamma.val().row(0).array()).rowwise() +
            beta.val().row(0).array();
  auto n = make_node(std::move(out), {x.node(), gamma.node(), beta.node()});
  // keep normalized activations for the backward pass
  auto xhat_p = std::make_shared<Mat>(std::move(xhat));
  auto inv_p = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
  n->back = [xhat_p, inv_p, C](Node& self) {
    const Mat& g = self.grad;
    const Mat& xh = *xhat_p;
    accum(self.parents[1], (g.cwiseProduct(xh)).colwise().sum());
    accum(self.parents[2], g.colwise().sum());
    if (!self.parents[0]->needs_grad) return;
    Mat dxhat = g.array().rowwise() * self.parents[1]->val.row(0).array();
    Eigen::VectorXd m1 = dxhat.rowwise().mean();
    Eigen::VectorXd m2 = dxhat.cwiseProduct(xh).rowwise().mean();
    Mat dx = dxhat;
    dx.colwise() -= m1;
    dx.noalias() -= m2.asDiagonal() * xh;
    dx = inv_p->asDiagonal() * dx;
    accum(self.parents[0], dx);
  };
  return Var(n);
}

Var attention(const Var& q, const Var& k, const Var& v, Index B, Index Tq, Index Tk, int heads) {
  const Index d = q.cols();
  assert(d % heads == 0);
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  assert(q.rows() == B * Tq && k.rows() == B * Tk && v.rows() == B * Tk);

  Mat out(B * Tq, d);
  auto probs = std::make_shared<std::vector<Mat>>();
  probs->reserve(static_cast<size_t>(B) * heads);
  for (Index b = 0; b < B; ++b) {
    for (int h = 0; h < heads; ++h) {
      auto Qb = q.val().block(b * Tq, h * dh, Tq, dh);
      auto Kb = k.val().block(b * Tk, h * dh, Tk, dh);
      auto Vb = v.val().block(b * Tk, h * dh, Tk, dh);
      Mat s = (Qb * Kb.transpose()) * scale;
      for (Index r = 0; r < s.rows(); ++r) {
        Eigen::ArrayXd row = s.row(r).array();
        row -= row.maxCoeff();
        row = row.exp();
        s.row(r) = (row / row.sum()).matrix();
      }
      out.block(b * Tq, h * dh, Tq, dh).noalias() = s * Vb;
      probs->push_back(std::move(s));
    }
  }
  auto n = make_node(std::move(out), {q.node(), k.node(), v.node()});
  n->back = [B, Tq, Tk, heads, dh, scale, probs](Node& self) {
    auto& qn = self.parents[0];
    auto& kn = self.parents[1];
    auto& vn = self.parents[2];
    if (qn->needs_grad) ensure_grad(*qn);
    if (kn->needs_grad) ensure_grad(*kn);
    if (vn->needs_grad) ensure_grad(*vn);
    for (Index b = 0; b < B; ++b) {
      for (int h = 0; h < heads; ++h) {
        const Mat& P = (*probs)[static_cast<size_t>(b) * heads + h];
        auto dO = self.grad.block(b * Tq, h * dh, Tq, dh);
        auto Vb = vn->val.block(b * Tk, h * dh, Tk, dh);
        if (vn->needs_grad) vn->grad.block(b * Tk, h * dh, Tk, dh).noalias() += P.transpose() * dO;
        if (!qn->needs_grad && !kn->needs_grad) continue;
        Mat dP = dO * Vb.transpose();
        // softmax backward per row
        Mat dS = dP.cwiseProduct(P);
        Eigen::VectorXd rowsum = dS.rowwise().sum();
        dS.noalias() -= rowsum.asDiagonal() * P;
        dS *= scale;
        auto Qb = qn->val.block(b * Tq, h * dh, Tq, dh);
        auto Kb = kn->val.block(b * Tk, h * dh, Tk, dh);
        if (qn->needs_grad) qn->grad.block(b * Tq, h * dh, Tq, dh).noalias() += dS * Kb;
        if (kn->needs_grad) kn->grad.block(b * Tk, h * dh, Tk, dh).noalias() += dS.transpose() * Qb;
      }
    }
  };
  return Var(n);
}

// --- execution ----------------------------------------------------------------------------

void backward(const Var& root) {
  if (root.val().size() != 1) throw std::invalid_argument("backward: root must be 1x1");

  // reverse post-order DFS over parent edges
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->grad = Mat::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->back && n->grad.size() != 0) n->back(*n);
    n->grad.resize(0, 0);  // consumed; free early
  }
}

}  // namespace trajdiff::ad
