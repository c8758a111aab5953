#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

namespace trajdiff::ad {

// Reverse-mode autodiff over dense double matrices. Graphs are built
// dynamically per forward pass; sequences are stacked row-wise as
// (batch * steps) x width so the heavy matmuls stay large.

using Mat = Eigen::MatrixXd;

struct Node {
  Mat val;
  Mat grad;  // allocated lazily during backward, freed once consumed
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> back;  // reads this->grad, accumulates into parents
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  const Mat& val() const { return n_->val; }
  Eigen::Index rows() const { return n_->val.rows(); }
  Eigen::Index cols() const { return n_->val.cols(); }
  bool defined() const { return static_cast<bool>(n_); }
  const NodePtr& node() const { return n_; }

 private:
  NodePtr n_;
};

// --- graph construction ---------------------------------------------------

Var constant(Mat v);
Var scalar(double v);
// Leaf whose gradient is accumulated into *grad_sink (parameter hookup).
// A null sink gives a plain constant.
Var leaf(const Mat& v, Mat* grad_sink);

// --- elementwise / broadcasting binary ops --------------------------------
// Shapes broadcast NumPy-style: each dim must match or be 1.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var add_s(const Var& a, double s);
Var mul_s(const Var& a, double s);
Var rsub_s(double s, const Var& a);  // s - a

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

// --- matrix products --------------------------------------------------------

Var matmul(const Var& a, const Var& b);     // a * b
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var matmul_tn(const Var& a, const Var& b);  // a^T * b

// --- reductions -------------------------------------------------------------

Var sum(const Var& a);
Var mean(const Var& a);
Var rowwise_sum(const Var& a);
Var rowwise_mean(const Var& a);

// --- elementwise unaries ----------------------------------------------------

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh_v(const Var& a);
Var softplus_v(const Var& a);
Var exp_v(const Var& a);
Var log_v(const Var& a);
Var sqrt_v(const Var& a);
Var square(const Var& a);
Var sin_v(const Var& a);
Var cos_v(const Var& a);
Var clamp_min(const Var& a, double c);
Var atan2_v(const Var& y, const Var& x);  // elementwise, same shapes

// --- shape ops ----------------------------------------------------------------

Var transpose(const Var& a);
Var slice_rows(const Var& a, Eigen::Index r0, Eigen::Index n);
Var slice_cols(const Var& a, Eigen::Index c0, Eigen::Index n);
Var concat_rows(const std::vector<Var>& vs);
Var concat_cols(const std::vector<Var>& vs);
Var select_rows(const Var& a, const std::vector<Eigen::Index>& idx);

// --- batched-sequence ops (rows grouped in blocks of T per item) -------------

// Running sum down the rows of each T-row block.
Var cumsum_blocked(const Var& a, Eigen::Index T);
// (B x C) -> (B*T x C), each row repeated T times.
Var expand_item_rows(const Var& a, Eigen::Index T);
// (B*T x C) -> (B x C), mean over each block.
Var block_mean_rows(const Var& a, Eigen::Index T);
// (B*T x C) -> (B x T*C), row-major per block.
Var flatten_blocks(const Var& a, Eigen::Index T);
// (B x T*C) -> (B*T x C), inverse of flatten_blocks.
Var unflatten_blocks(const Var& a, Eigen::Index T);
// (T x C) -> (B*T x C), whole block repeated per item (learned token sets).
Var tile_blocks(const Var& a, Eigen::Index B);
// Stitch several per-item sequences into one: block b of the result is the
// concatenation of block b of every input.
Var interleave_blocks(const std::vector<Var>& vs, const std::vector<Eigen::Index>& Ts);
// From (B*T_total x C), keep rows [offset, offset+n) of each block.
Var slice_block_rows(const Var& a, Eigen::Index t_total, Eigen::Index offset, Eigen::Index n);

// --- fused layers -------------------------------------------------------------

Var softmax_rows(const Var& a);
// Row-wise layer norm with learned gain/bias (1 x C each).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// Scaled dot-product attention over B blocks and H heads. q: (B*Tq x d),
// k, v: (B*Tk x d) with d divisible by H.
Var attention(const Var& q, const Var& k, const Var& v, Eigen::Index B, Eigen::Index Tq,
              Eigen::Index Tk, int heads);

// --- execution ---------------------------------------------------------------

// Accumulate d(root)/d(leaf) into every leaf sink. root must be 1x1.
void backward(const Var& root);

}  // namespace trajdiff::ad
