#include "ldoc/transformer.hpp"

#include <cmath>
#include <stdexcept>

namespace ldoc {

namespace {

constexpr double kInitSigma = 0.02;
constexpr double kMaskBias = -1e9;

TensorPtr dense(Tape* tape, const TensorPtr& x, const TensorPtr& w,
                const TensorPtr& b) {
  return add(tape, matmul(tape, x, w), b);
}

}  // namespace

TensorPtr find_param(const NamedParams& named, const std::string& name) {
  for (const auto& [n, t] : named)
    if (n == name) return t;
  throw std::runtime_error("checkpoint is missing parameter \"" + name + "\"");
}

std::vector<TensorPtr> param_list(const NamedParams& named) {
  std::vector<TensorPtr> out;
  out.reserve(named.size());
  for (const auto& [n, t] : named) out.push_back(t);
  return out;
}

EncoderLayer EncoderLayer::init(int d_model, int heads, int d_ff, Rng& rng) {
  if (heads < 1 || d_model % heads != 0)
    throw std::invalid_argument("d_model must be divisible by head count");
  EncoderLayer l;
  l.d_model = d_model;
  l.heads = heads;
  l.wq = Tensor::randn({d_model, d_model}, kInitSigma, rng);
  l.bq = Tensor::zeros({1, d_model}, true);
  l.wk = Tensor::randn({d_model, d_model}, kInitSigma, rng);
  l.bk = Tensor::zeros({1, d_model}, true);
  l.wv = Tensor::randn({d_model, d_model}, kInitSigma, rng);
  l.bv = Tensor::zeros({1, d_model}, true);
  l.wo = Tensor::randn({d_model, d_model}, kInitSigma, rng);
  l.bo = Tensor::zeros({1, d_model}, true);
  l.ln1_g = Tensor::full({1, d_model}, 1.0);
  l.ln1_g->set_requires_grad(true);
  l.ln1_b = Tensor::zeros({1, d_model}, true);
  l.ln2_g = Tensor::full({1, d_model}, 1.0);
  l.ln2_g->set_requires_grad(true);
  l.ln2_b = Tensor::zeros({1, d_model}, true);
  l.ff_w1 = Tensor::randn({d_model, d_ff}, kInitSigma, rng);
  l.ff_b1 = Tensor::zeros({1, d_ff}, true);
  l.ff_w2 = Tensor::randn({d_ff, d_model}, kInitSigma, rng);
  l.ff_b2 = Tensor::zeros({1, d_model}, true);
  return l;
}

TensorPtr EncoderLayer::forward(Tape* tape, const TensorPtr& x,
                                const std::vector<int>& mask, bool train,
                                double dropout_rate, Rng& rng) const {
  const int t_len = x->rows();
  if (x->cols() != d_model)
    throw std::invalid_argument("EncoderLayer: input width != d_model");
  if (mask.size() != static_cast<std::size_t>(t_len))
    throw std::invalid_argument("EncoderLayer: mask length != sequence length");

  // Additive attention bias: masked key columns get a large negative score,
  // which underflows to exactly zero weight after softmax.
  auto bias = Tensor::zeros({t_len, t_len});
  for (int i = 0; i < t_len; ++i)
    for (int j = 0; j < t_len; ++j)
      if (!mask[j]) bias->data[static_cast<std::size_t>(i) * t_len + j] = kMaskBias;

  auto xn = layer_norm(tape, x, ln1_g, ln1_b);
  auto q = dense(tape, xn, wq, bq);
  auto k = dense(tape, xn, wk, bk);
  auto v = dense(tape, xn, wv, bv);

  const int d_head = d_model / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
  std::vector<TensorPtr> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    auto qh = slice_cols(tape, q, h * d_head, d_head);
    auto kh = slice_cols(tape, k, h * d_head, d_head);
    auto vh = slice_cols(tape, v, h * d_head, d_head);
    auto scores = scale(tape, matmul(tape, qh, transpose(tape, kh)), inv_sqrt);
    auto weights = softmax_rows(tape, add(tape, scores, bias));
    head_outs.push_back(matmul(tape, weights, vh));
  }
  auto attn = dense(tape, concat(tape, head_outs, 1), wo, bo);
  attn = dropout(tape, attn, dropout_rate, train, rng);
  auto a = add(tape, x, attn);

  auto an = layer_norm(tape, a, ln2_g, ln2_b);
  auto ff = gelu(tape, dense(tape, an, ff_w1, ff_b1));
  ff = dropout(tape, ff, dropout_rate, train, rng);
  ff = dense(tape, ff, ff_w2, ff_b2);
  ff = dropout(tape, ff, dropout_rate, train, rng);
  return add(tape, a, ff);
}

void EncoderLayer::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".wq", wq);
  out.emplace_back(prefix + ".bq", bq);
  out.emplace_back(prefix + ".wk", wk);
  out.emplace_back(prefix + ".bk", bk);
  out.emplace_back(prefix + ".wv", wv);
  out.emplace_back(prefix + ".bv", bv);
  out.emplace_back(prefix + ".wo", wo);
  out.emplace_back(prefix + ".bo", bo);
  out.emplace_back(prefix + ".ln1_g", ln1_g);
  out.emplace_back(prefix + ".ln1_b", ln1_b);
  out.emplace_back(prefix + ".ln2_g", ln2_g);
  out.emplace_back(prefix + ".ln2_b", ln2_b);
  out.emplace_back(prefix + ".ff_w1", ff_w1);
  out.emplace_back(prefix + ".ff_b1", ff_b1);
  out.emplace_back(prefix + ".ff_w2", ff_w2);
  out.emplace_back(prefix + ".ff_b2", ff_b2);
}

void EncoderLayer::restore(const std::string& prefix, const NamedParams& named) {
  wq = find_param(named, prefix + ".wq");
  bq = find_param(named, prefix + ".bq");
  wk = find_param(named, prefix + ".wk");
  bk = find_param(named, prefix + ".bk");
  wv = find_param(named, prefix + ".wv");
  bv = find_param(named, prefix + ".bv");
  wo = find_param(named, prefix + ".wo");
  bo = find_param(named, prefix + ".bo");
  ln1_g = find_param(named, prefix + ".ln1_g");
  ln1_b = find_param(named, prefix + ".ln1_b");
  ln2_g = find_param(named, prefix + ".ln2_g");
  ln2_b = find_param(named, prefix + ".ln2_b");
  ff_w1 = find_param(named, prefix + ".ff_w1");
  ff_b1 = find_param(named, prefix + ".ff_b1");
  ff_w2 = find_param(named, prefix + ".ff_w2");
  ff_b2 = find_param(named, prefix + ".ff_b2");
}

BiRecurrentLayer BiRecurrentLayer::init(Kind kind, int d_in, int d_hidden,
                                        Rng& rng) {
  BiRecurrentLayer l;
  l.kind = kind;
  l.d_in = d_in;
  l.d_hidden = d_hidden;
  const int gates = kind == Kind::kLstm ? 4 : 3;
  l.wx_f = Tensor::randn({d_in, gates * d_hidden}, kInitSigma, rng);
  l.wh_f = Tensor::randn({d_hidden, gates * d_hidden}, kInitSigma, rng);
  l.b_f = Tensor::zeros({1, gates * d_hidden}, true);
  l.wx_b = Tensor::randn({d_in, gates * d_hidden}, kInitSigma, rng);
  l.wh_b = Tensor::randn({d_hidden, gates * d_hidden}, kInitSigma, rng);
  l.b_b = Tensor::zeros({1, gates * d_hidden}, true);
  return l;
}

namespace {

struct RecurrentDirection {
  const TensorPtr& wx;
  const TensorPtr& wh;
  const TensorPtr& b;
};

// One direction of the recurrence; `order` lists timestep indices in
// processing order. Returns hidden states in sequence order plus the
// final hidden state.
std::pair<std::vector<TensorPtr>, TensorPtr> run_direction(
    Tape* tape, const TensorPtr& x, const std::vector<int>& order,
    BiRecurrentLayer::Kind kind, int d_hidden, const RecurrentDirection& dir) {
  const int t_len = x->rows();
  std::vector<TensorPtr> states(static_cast<std::size_t>(t_len));
  auto h = Tensor::zeros({1, d_hidden});
  auto c = Tensor::zeros({1, d_hidden});
  auto ones = Tensor::full({1, d_hidden}, 1.0);
  for (int t : order) {
    auto xt = slice_rows(tape, x, t, 1);
    if (kind == BiRecurrentLayer::Kind::kLstm) {
      auto z = add(tape,
                   add(tape, matmul(tape, xt, dir.wx), matmul(tape, h, dir.wh)),
                   dir.b);
      auto i = sigmoid(tape, slice_cols(tape, z, 0, d_hidden));
      auto f = sigmoid(tape, slice_cols(tape, z, d_hidden, d_hidden));
      auto g = tanh_op(tape, slice_cols(tape, z, 2 * d_hidden, d_hidden));
      auto o = sigmoid(tape, slice_cols(tape, z, 3 * d_hidden, d_hidden));
      c = add(tape, mul(tape, f, c), mul(tape, i, g));
      h = mul(tape, o, tanh_op(tape, c));
    } else {
      auto zx = matmul(tape, xt, dir.wx);
      auto zh = matmul(tape, h, dir.wh);
      auto zgate = sigmoid(
          tape, add(tape,
                    add(tape, slice_cols(tape, zx, 0, d_hidden),
                        slice_cols(tape, zh, 0, d_hidden)),
                    slice_cols(tape, dir.b, 0, d_hidden)));
      auto rgate = sigmoid(
          tape, add(tape,
                    add(tape, slice_cols(tape, zx, d_hidden, d_hidden),
                        slice_cols(tape, zh, d_hidden, d_hidden)),
                    slice_cols(tape, dir.b, d_hidden, d_hidden)));
      auto n = tanh_op(
          tape,
          add(tape,
              add(tape, slice_cols(tape, zx, 2 * d_hidden, d_hidden),
                  mul(tape, rgate, slice_cols(tape, zh, 2 * d_hidden, d_hidden))),
              slice_cols(tape, dir.b, 2 * d_hidden, d_hidden)));
      auto one_minus_z = sub(tape, ones, zgate);
      h = add(tape, mul(tape, one_minus_z, n), mul(tape, zgate, h));
    }
    states[static_cast<std::size_t>(t)] = h;
  }
  return {std::move(states), h};
}

}  // namespace

BiRecurrentLayer::Output BiRecurrentLayer::forward(Tape* tape,
                                                   const TensorPtr& x) const {
  if (x->cols() != d_in)
    throw std::invalid_argument("BiRecurrentLayer: input width != d_in");
  const int t_len = x->rows();
  std::vector<int> fwd(static_cast<std::size_t>(t_len));
  std::vector<int> bwd(static_cast<std::size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    fwd[static_cast<std::size_t>(t)] = t;
    bwd[static_cast<std::size_t>(t)] = t_len - 1 - t;
  }
  auto [fs, f_final] =
      run_direction(tape, x, fwd, kind, d_hidden, {wx_f, wh_f, b_f});
  auto [bs, b_final] =
      run_direction(tape, x, bwd, kind, d_hidden, {wx_b, wh_b, b_b});

  std::vector<TensorPtr> rows;
  rows.reserve(static_cast<std::size_t>(t_len));
  for (int t = 0; t < t_len; ++t)
    rows.push_back(concat(
        tape, {fs[static_cast<std::size_t>(t)], bs[static_cast<std::size_t>(t)]},
        1));
  Output out;
  out.sequence = concat(tape, rows, 0);
  out.final_state = concat(tape, {f_final, b_final}, 1);
  return out;
}

void BiRecurrentLayer::collect(const std::string& prefix,
                               NamedParams& out) const {
  out.emplace_back(prefix + ".wx_f", wx_f);
  out.emplace_back(prefix + ".wh_f", wh_f);
  out.emplace_back(prefix + ".b_f", b_f);
  out.emplace_back(prefix + ".wx_b", wx_b);
  out.emplace_back(prefix + ".wh_b", wh_b);
  out.emplace_back(prefix + ".b_b", b_b);
}

void BiRecurrentLayer::restore(const std::string& prefix,
                               const NamedParams& named) {
  wx_f = find_param(named, prefix + ".wx_f");
  wh_f = find_param(named, prefix + ".wh_f");
  b_f = find_param(named, prefix + ".b_f");
  wx_b = find_param(named, prefix + ".wx_b");
  wh_b = find_param(named, prefix + ".wh_b");
  b_b = find_param(named, prefix + ".b_b");
}

}  // namespace ldoc
