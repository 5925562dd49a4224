#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "ldoc/tensor.hpp"

using namespace ldoc;

TEST_CASE("softmax of a uniform row is uniform") {
  const auto x = Tensor::from({1, 2}, {0.0, 0.0});
  const auto s = softmax_rows(nullptr, x);
  CHECK(s->data[0] == doctest::Approx(0.5));
  CHECK(s->data[1] == doctest::Approx(0.5));
}

TEST_CASE("cross entropy of a uniform binary prediction is ln 2") {
  const auto logits = Tensor::from({1, 2}, {0.0, 0.0});
  const auto loss = cross_entropy(nullptr, logits, {0});
  CHECK(loss->data[0] == doctest::Approx(0.6931471805599453).epsilon(1e-9));
}

TEST_CASE("layer norm of a constant row is beta") {
  const auto x = Tensor::from({1, 4}, {3.0, 3.0, 3.0, 3.0});
  const auto g = Tensor::full({1, 4}, 1.0);
  const auto b = Tensor::full({1, 4}, 0.25);
  const auto y = layer_norm(nullptr, x, g, b);
  for (double v : y->data) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("backward of sum(x*x) is 2x") {
  const auto x = Tensor::from({1, 3}, {1.0, 2.0, 3.0}, true);
  Tape tape;
  const auto loss = sum_all(&tape, mul(&tape, x, x));
  tape.backward(loss);
  CHECK(x->grad[0] == doctest::Approx(2.0));
  CHECK(x->grad[1] == doctest::Approx(4.0));
  CHECK(x->grad[2] == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar losses") {
  const auto x = Tensor::from({1, 2}, {1.0, 2.0}, true);
  Tape tape;
  const auto y = mul(&tape, x, x);
  CHECK_THROWS(tape.backward(y));
}

namespace {

// Runs loss() through a fresh tape, backprops, then finite-differences
// every requested parameter.
void check_gradients(const std::vector<TensorPtr>& params,
                     const std::function<TensorPtr(Tape*)>& forward,
                     double tol = 1e-6) {
  Tape tape;
  for (const auto& p : params) p->zero_grad();
  const auto loss = forward(&tape);
  tape.backward(loss);
  Rng rng(99);
  for (const auto& p : params) {
    const auto res = oracles::finite_diff(
        p, [&] { return forward(nullptr)->data[0]; }, rng);
    CHECK(res.max_rel_err < tol);
  }
}

}  // namespace

TEST_CASE("finite differences: matmul + softmax + cross entropy") {
  Rng rng(5);
  const auto w = Tensor::randn({4, 2}, 0.5, rng);
  const auto x = Tensor::randn({3, 4}, 1.0, rng);
  check_gradients({w, x}, [&](Tape* t) {
    return cross_entropy(t, matmul(t, x, w), {0, 1, 1});
  });
}

TEST_CASE("finite differences: layer norm, gelu, tanh, sigmoid") {
  Rng rng(6);
  const auto x = Tensor::randn({2, 5}, 1.0, rng);
  const auto g = Tensor::randn({1, 5}, 0.5, rng);
  const auto b = Tensor::randn({1, 5}, 0.5, rng);
  check_gradients({x, g, b}, [&](Tape* t) {
    return sum_all(t, gelu(t, layer_norm(t, x, g, b)));
  });
  check_gradients({x}, [&](Tape* t) {
    return sum_all(t, tanh_op(t, sigmoid(t, x)));
  });
}

TEST_CASE("finite differences: concat, slices, mean_over_mask, broadcast add") {
  Rng rng(7);
  const auto a = Tensor::randn({3, 4}, 1.0, rng);
  const auto b = Tensor::randn({3, 4}, 1.0, rng);
  const auto bias = Tensor::randn({1, 8}, 0.5, rng);
  const std::vector<int> mask{1, 0, 1};
  check_gradients({a, b, bias}, [&](Tape* t) {
    const auto cat = concat(t, {a, b}, 1);
    const auto shifted = add(t, cat, bias);
    const auto pooled = mean_over_mask(t, shifted, mask);
    return sum_all(t, mul(t, pooled, pooled));
  });
  check_gradients({a}, [&](Tape* t) {
    const auto s = slice_cols(t, slice_rows(t, a, 1, 2), 1, 2);
    return sum_all(t, mul(t, s, s));
  });
}

TEST_CASE("finite differences: embedding lookup and umap pair loss") {
  Rng rng(8);
  const auto table = Tensor::randn({6, 3}, 1.0, rng);
  check_gradients({table}, [&](Tape* t) {
    const auto e = embedding_lookup(t, table, {4, 0, 4});
    return sum_all(t, mul(t, e, e));
  });
  const auto zi = Tensor::randn({1, 4}, 1.0, rng);
  const auto zj = Tensor::randn({1, 4}, 1.0, rng);
  check_gradients({zi, zj}, [&](Tape* t) {
    return umap_pair_loss(t, zi, zj, true);
  });
  check_gradients({zi, zj}, [&](Tape* t) {
    return umap_pair_loss(t, zi, zj, false);
  });
}

TEST_CASE("mean_over_mask rejects an all-zero mask") {
  const auto x = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_WITH(mean_over_mask(nullptr, x, {0, 0}),
                    doctest::Contains("mask selects no rows"));
}

TEST_CASE("adam: first step moves each weight by about lr") {
  const auto x = Tensor::from({1, 3}, {1.0, -2.0, 5.0}, true);
  x->grad = {0.3, -4.0, 0.001};
  AdamState adam;
  adam.lr = 0.01;
  adam_step({x}, adam);
  CHECK(std::abs(x->data[0] - 1.0 + 0.01) < 1e-4);
  CHECK(std::abs(x->data[1] + 2.0 - 0.01) < 1e-4);
}

TEST_CASE("adam: converges on (x-3)^2") {
  const auto x = Tensor::from({1, 1}, {0.0}, true);
  AdamState adam;
  adam.lr = 0.1;
  for (int i = 0; i < 400; ++i) {
    x->zero_grad();
    Tape tape;
    const auto diff = sub(&tape, x, Tensor::full({1, 1}, 3.0));
    const auto loss = sum_all(&tape, mul(&tape, diff, diff));
    tape.backward(loss);
    adam_step({x}, adam);
  }
  CHECK(x->data[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("adam rejects non-finite gradients") {
  const auto x = Tensor::from({1, 1}, {1.0}, true);
  x->grad = {std::nan("")};
  AdamState adam;
  CHECK_THROWS_WITH(adam_step({x}, adam),
                    doctest::Contains("non-finite gradient"));
}

TEST_CASE("dropout is the identity when not training") {
  Rng rng(3);
  const auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto y = dropout(nullptr, x, 0.5, false, rng);
  CHECK(y->data == x->data);
}

TEST_CASE("checkpoint round-trip preserves names, shapes and bits") {
  Rng rng(17);
  const auto a = Tensor::randn({3, 4}, 1.0, rng);
  const auto b = Tensor::randn({2, 2}, 1.0, rng);
  const std::string path = "ckpt_roundtrip.bin";
  save_checkpoint(path, {{"alpha", a}, {"beta", b}});
  const auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].first == "alpha");
  CHECK(loaded[0].second->shape == a->shape);
  CHECK(loaded[0].second->data == a->data);
  CHECK(loaded[1].first == "beta");
  CHECK(loaded[1].second->data == b->data);
  std::remove(path.c_str());
}
