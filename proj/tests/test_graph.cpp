#include <doctest.h>

#include <cmath>
#include <functional>

#include "trajdiff/graph.hpp"
#include "trajdiff/rng.hpp"

using namespace trajdiff;
using ad::Mat;
using ad::Var;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

// Central finite differences against the backward pass, every input entry.
void check_grads(const std::function<Var(const std::vector<Var>&)>& build,
                 std::vector<Mat> inputs, double tol = 1e-6) {
  std::vector<Mat> sinks(inputs.size());
  std::vector<Var> leaves;
  for (size_t i = 0; i < inputs.size(); ++i) leaves.push_back(ad::leaf(inputs[i], &sinks[i]));
  Var out = build(leaves);
  REQUIRE(out.val().size() == 1);
  ad::backward(out);

  auto eval = [&](const std::vector<Mat>& xs) {
    std::vector<Var> consts;
    for (const auto& x : xs) consts.push_back(ad::constant(x));
    return build(consts).val()(0, 0);
  };

  for (size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index r = 0; r < inputs[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < inputs[i].cols(); ++c) {
        const double h = 1e-6 * std::max(1.0, std::abs(inputs[i](r, c)));
        std::vector<Mat> xs = inputs;
        xs[i](r, c) += h;
        double fp = eval(xs);
        xs[i](r, c) -= 2 * h;
        double fm = eval(xs);
        double fd = (fp - fm) / (2 * h);
        double got = sinks[i].size() ? sinks[i](r, c) : 0.0;
        CHECK(std::abs(got - fd) <= tol * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

}  // namespace

TEST_CASE("gradients: broadcasting binary ops") {
  Rng rng(1);
  Mat a = random_mat(3, 4, rng), b = random_mat(3, 4, rng);
  Mat row = random_mat(1, 4, rng), col = random_mat(3, 1, rng);
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::add(v[0], v[1])); }, {a, b});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::sub(v[0], v[1])); }, {a, row});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::mul(v[0], v[1])); }, {a, col});
  check_grads([](const std::vector<Var>& v) { return ad::mean(ad::mul(v[0], v[1])); }, {a, b});
  Mat bpos = random_mat(1, 4, rng, 0.5, 2.0);
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::div(v[0], v[1])); }, {a, bpos});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::rsub_s(2.5, ad::mul_s(v[0], 1.7))); },
              {a});
}

TEST_CASE("gradients: matrix products") {
  Rng rng(2);
  Mat a = random_mat(3, 4, rng), b = random_mat(4, 2, rng), c = random_mat(3, 2, rng);
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::matmul(v[0], v[1])); }, {a, b});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::matmul_nt(v[0], v[1])); }, {a, c});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::matmul_tn(v[0], v[1])); }, {a, c});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::transpose(v[0])); }, {a});
}

TEST_CASE("gradients: reductions and unaries") {
  Rng rng(3);
  Mat a = random_mat(3, 5, rng);
  Mat pos = random_mat(3, 5, rng, 0.2, 2.0);
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::rowwise_sum(ad::square(v[0]))); }, {a});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::rowwise_mean(ad::exp_v(v[0]))); }, {a});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::sigmoid(v[0])); }, {a});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::tanh_v(v[0])); }, {a});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::softplus_v(v[0])); }, {a});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::log_v(v[0])); }, {pos});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::sqrt_v(v[0])); }, {pos});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::sin_v(v[0])); }, {a});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::cos_v(v[0])); }, {a});
  // relu / clamp kinks: keep probes away from the corner
  Mat faraway = random_mat(3, 5, rng);
  for (Eigen::Index i = 0; i < faraway.size(); ++i) {
    if (std::abs(faraway(i)) < 0.1) faraway(i) = 0.5;
  }
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::relu(v[0])); }, {faraway});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::clamp_min(v[0], 0.0)); }, {faraway});
}

TEST_CASE("gradients: atan2") {
  Rng rng(4);
  Mat y = random_mat(4, 3, rng), x = random_mat(4, 3, rng);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) < 0.2 && std::abs(y(i)) < 0.2) x(i) = 0.7;
  }
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::atan2_v(v[0], v[1])); }, {y, x});
}

TEST_CASE("gradients: shape ops") {
  Rng rng(5);
  Mat a = random_mat(6, 4, rng), b = random_mat(2, 4, rng);
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::square(ad::slice_rows(v[0], 1, 3))); },
              {a});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::square(ad::slice_cols(v[0], 1, 2))); },
              {a});
  check_grads(
      [](const std::vector<Var>& v) { return ad::sum(ad::square(ad::concat_rows({v[0], v[1]}))); },
      {a, b});
  Mat c = random_mat(6, 2, rng);
  check_grads(
      [](const std::vector<Var>& v) { return ad::sum(ad::square(ad::concat_cols({v[0], v[1]}))); },
      {a, c});
  // gather with a repeated row exercises scatter-add
  check_grads(
      [](const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::select_rows(v[0], {0, 2, 2, 5})));
      },
      {a});
}

TEST_CASE("gradients: batched-sequence ops") {
  Rng rng(6);
  Mat a = random_mat(6, 3, rng);   // B=2, T=3
  Mat item = random_mat(2, 3, rng);  // B=2
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::square(ad::cumsum_blocked(v[0], 3))); },
              {a});
  check_grads(
      [](const std::vector<Var>& v) { return ad::sum(ad::square(ad::expand_item_rows(v[0], 3))); },
      {item});
  check_grads(
      [](const std::vector<Var>& v) { return ad::sum(ad::square(ad::block_mean_rows(v[0], 3))); },
      {a});
  check_grads(
      [](const std::vector<Var>& v) { return ad::sum(ad::square(ad::flatten_blocks(v[0], 3))); },
      {a});
  check_grads(
      [](const std::vector<Var>& v) { return ad::sum(ad::square(ad::unflatten_blocks(v[0], 3))); },
      {item});
  check_grads([](const std::vector<Var>& v) { return ad::sum(ad::square(ad::tile_blocks(v[0], 4))); },
              {a});
  Mat b2 = random_mat(2, 3, rng);  // one token per item
  check_grads(
      [](const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::interleave_blocks({v[0], v[1]}, {3, 1})));
      },
      {a, b2});
  check_grads(
      [](const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::slice_block_rows(v[0], 3, 1, 2)));
      },
      {a});
}

TEST_CASE("batched-sequence ops: exact values") {
  Mat a(4, 1);
  a << 1, 2, 3, 4;  // B=2 blocks of T=2
  Var c = ad::cumsum_blocked(ad::constant(a), 2);
  CHECK(c.val()(0, 0) == 1);
  CHECK(c.val()(1, 0) == 3);
  CHECK(c.val()(2, 0) == 3);  // second block restarts
  CHECK(c.val()(3, 0) == 7);

  Mat it(2, 2);
  it << 1, 2, 3, 4;
  Var e = ad::expand_item_rows(ad::constant(it), 3);
  CHECK(e.rows() == 6);
  CHECK(e.val()(2, 0) == 1);
  CHECK(e.val()(3, 1) == 4);

  Var f = ad::flatten_blocks(ad::constant(a), 2);
  CHECK(f.rows() == 2);
  CHECK(f.cols() == 2);
  CHECK(f.val()(1, 0) == 3);
  Var uf = ad::unflatten_blocks(f, 2);
  CHECK(uf.val() == a);
}

TEST_CASE("softmax rows: values and gradients") {
  Mat a(2, 3);
  a << 1, 1, 1, 0, 100, 0;
  Var s = ad::softmax_rows(ad::constant(a));
  CHECK(s.val()(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(s.val()(1, 1) == doctest::Approx(1.0));
  CHECK(s.val().rowwise().sum().isOnes(1e-12));

  Rng rng(7);
  Mat b = random_mat(3, 5, rng);
  Mat w = random_mat(3, 5, rng);
  check_grads(
      [&w](const std::vector<Var>& v) {
        return ad::sum(ad::mul(ad::softmax_rows(v[0]), ad::constant(w)));
      },
      {b});
}

TEST_CASE("layer_norm: normalization and gradients") {
  Rng rng(8);
  Mat x = random_mat(4, 6, rng), g = random_mat(1, 6, rng, 0.5, 1.5), b = random_mat(1, 6, rng);
  Var out = ad::layer_norm(ad::constant(x), ad::constant(g), ad::constant(b));
  // with unit gain and zero bias rows are standardized
  Var plain = ad::layer_norm(ad::constant(x), ad::constant(Mat::Ones(1, 6)),
                             ad::constant(Mat::Zero(1, 6)));
  for (Eigen::Index r = 0; r < 4; ++r) {
    CHECK(plain.val().row(r).mean() == doctest::Approx(0.0).epsilon(1e-9));
    double var = plain.val().row(r).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps-regularized
  }
  Mat w = random_mat(4, 6, rng);
  check_grads(
      [&w](const std::vector<Var>& v) {
        return ad::sum(ad::mul(ad::layer_norm(v[0], v[1], v[2]), ad::constant(w)));
      },
      {x, g, b}, 1e-5);
}

TEST_CASE("attention: gradients and per-item isolation") {
  Rng rng(9);
  const Eigen::Index B = 2, Tq = 3, Tk = 4, d = 6;
  Mat q = random_mat(B * Tq, d, rng), k = random_mat(B * Tk, d, rng), v = random_mat(B * Tk, d, rng);
  Mat w = random_mat(B * Tq, d, rng);
  check_grads(
      [&](const std::vector<Var>& vars) {
        return ad::sum(ad::mul(ad::attention(vars[0], vars[1], vars[2], B, Tq, Tk, 2), ad::constant(w)));
      },
      {q, k, v}, 1e-5);

  // item 0's output must not depend on item 1's inputs
  Var out1 = ad::attention(ad::constant(q), ad::constant(k), ad::constant(v), B, Tq, Tk, 2);
  Mat k2 = k;
  k2.bottomRows(Tk).setRandom();
  Var out2 = ad::attention(ad::constant(q), ad::constant(k2), ad::constant(v), B, Tq, Tk, 2);
  CHECK(out1.val().topRows(Tq) == out2.val().topRows(Tq));
  CHECK(out1.val().bottomRows(Tq) != out2.val().bottomRows(Tq));
}

TEST_CASE("backward handles diamond-shaped reuse") {
  Rng rng(10);
  Mat a = random_mat(3, 3, rng);
  check_grads(
      [](const std::vector<Var>& v) {
        Var s = ad::sigmoid(v[0]);
        return ad::sum(ad::mul(s, s) + ad::mul_s(s, 0.5));
      },
      {a});
}

TEST_CASE("composite transformer-style chain gradient") {
  Rng rng(11);
  const Eigen::Index B = 2, T = 3, d = 4;
  Mat x = random_mat(B * T, d, rng);
  Mat wq = random_mat(d, d, rng), wk = random_mat(d, d, rng), wv = random_mat(d, d, rng);
  Mat gamma = Mat::Ones(1, d), beta = Mat::Zero(1, d);
  check_grads(
      [&](const std::vector<Var>& v) {
        Var h = ad::layer_norm(v[0], ad::constant(gamma), ad::constant(beta));
        Var att = ad::attention(ad::matmul(h, v[1]), ad::matmul(h, v[2]), ad::matmul(h, v[3]), B, T,
                                T, 2);
        Var y = ad::add(v[0], att);
        return ad::mean(ad::square(y));
      },
      {x, wq, wk, wv}, 1e-5);
}
