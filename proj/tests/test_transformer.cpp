#include <doctest.h>

#include <functional>
#include <vector>

#include "oracles.hpp"
#include "ldoc/transformer.hpp"

using namespace ldoc;

TEST_CASE("encoder layer preserves shape and is deterministic in eval mode") {
  Rng rng(1);
  auto layer = EncoderLayer::init(16, 4, 32, rng);
  const auto x = Tensor::randn({6, 16}, 1.0, rng, false);
  const std::vector<int> mask{1, 1, 1, 1, 1, 1};
  Rng r1(5), r2(5);
  const auto y1 = layer.forward(nullptr, x, mask, false, 0.1, r1);
  const auto y2 = layer.forward(nullptr, x, mask, false, 0.1, r2);
  CHECK(y1->shape == std::vector<int>{6, 16});
  CHECK(y1->data == y2->data);
}

TEST_CASE("attention ignores masked positions bit-exactly") {
  Rng rng(2);
  auto layer = EncoderLayer::init(16, 4, 32, rng);
  auto x = Tensor::randn({5, 16}, 1.0, rng, false);
  const std::vector<int> mask{1, 1, 1, 0, 0};
  Rng r(7);
  const auto y1 = layer.forward(nullptr, x, mask, false, 0.0, r);
  // Perturb the padded rows arbitrarily.
  for (int t = 3; t < 5; ++t)
    for (int d = 0; d < 16; ++d)
      x->data[static_cast<std::size_t>(t) * 16 + d] += 1000.0 * (t + d);
  const auto y2 = layer.forward(nullptr, x, mask, false, 0.0, r);
  for (int t = 0; t < 3; ++t)
    for (int d = 0; d < 16; ++d)
      CHECK(y1->data[static_cast<std::size_t>(t) * 16 + d] ==
            y2->data[static_cast<std::size_t>(t) * 16 + d]);
}

TEST_CASE("encoder layer gradients pass finite differences") {
  Rng rng(3);
  auto layer = EncoderLayer::init(8, 2, 16, rng);
  const auto x = Tensor::randn({4, 8}, 1.0, rng);
  const std::vector<int> mask{1, 1, 1, 1};
  auto forward = [&](Tape* t) {
    Rng r(0);
    const auto y = layer.forward(t, x, mask, false, 0.0, r);
    return sum_all(t, mul(t, y, y));
  };
  NamedParams named;
  layer.collect("l", named);
  auto params = param_list(named);
  params.push_back(x);
  Tape tape;
  for (const auto& p : params) p->zero_grad();
  tape.backward(forward(&tape));
  Rng check_rng(42);
  for (const auto& p : params) {
    const auto res = oracles::finite_diff(
        p, [&] { return forward(nullptr)->data[0]; }, check_rng, 6);
    CHECK(res.max_rel_err < 1e-5);
  }
}

TEST_CASE("collect/restore round-trips encoder layer parameters") {
  Rng rng(4);
  auto a = EncoderLayer::init(8, 2, 16, rng);
  auto b = EncoderLayer::init(8, 2, 16, rng);
  NamedParams named;
  a.collect("x", named);
  b.restore("x", named);
  NamedParams na, nb;
  a.collect("x", na);
  b.collect("x", nb);
  REQUIRE(na.size() == nb.size());
  for (std::size_t i = 0; i < na.size(); ++i)
    CHECK(na[i].second->data == nb[i].second->data);
}

TEST_CASE("bilstm and bigru produce 2H sequences and final states") {
  Rng rng(5);
  for (const auto kind :
       {BiRecurrentLayer::Kind::kLstm, BiRecurrentLayer::Kind::kGru}) {
    auto layer = BiRecurrentLayer::init(kind, 12, 8, rng);
    const auto x = Tensor::randn({5, 12}, 1.0, rng, false);
    const auto out = layer.forward(nullptr, x);
    CHECK(out.sequence->shape == std::vector<int>{5, 16});
    CHECK(out.final_state->shape == std::vector<int>{1, 16});
    // Forward half of the final state equals the last sequence row's
    // forward half; backward half equals the first row's backward half.
    for (int j = 0; j < 8; ++j) {
      CHECK(out.final_state->data[static_cast<std::size_t>(j)] ==
            out.sequence->data[4 * 16 + static_cast<std::size_t>(j)]);
      CHECK(out.final_state->data[8 + static_cast<std::size_t>(j)] ==
            out.sequence->data[8 + static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("recurrent layer gradients pass finite differences") {
  Rng rng(6);
  for (const auto kind :
       {BiRecurrentLayer::Kind::kLstm, BiRecurrentLayer::Kind::kGru}) {
    auto layer = BiRecurrentLayer::init(kind, 6, 5, rng);
    const auto x = Tensor::randn({3, 6}, 1.0, rng);
    auto forward = [&](Tape* t) {
      const auto out = layer.forward(t, x);
      return sum_all(t, mul(t, out.final_state, out.final_state));
    };
    NamedParams named;
    layer.collect("r", named);
    auto params = param_list(named);
    params.push_back(x);
    Tape tape;
    for (const auto& p : params) p->zero_grad();
    tape.backward(forward(&tape));
    Rng check_rng(17);
    for (const auto& p : params) {
      const auto res = oracles::finite_diff(
          p, [&] { return forward(nullptr)->data[0]; }, check_rng, 6);
      CHECK(res.max_rel_err < 1e-5);
    }
  }
}

TEST_CASE("encoder layer rejects indivisible head counts") {
  Rng rng(7);
  CHECK_THROWS(EncoderLayer::init(10, 4, 16, rng));
}
