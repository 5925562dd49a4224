#pragma once

#include <string>
#include <vector>

#include "ldoc/tensor.hpp"

namespace ldoc {

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

// Pre-norm transformer encoder layer: x + Attn(LN(x)), then + FF(LN(.)).
// Operates on a single sequence (T x d_model) with a per-position mask.
struct EncoderLayer {
  int d_model = 0;
  int heads = 0;
  TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
  TensorPtr ln1_g, ln1_b, ln2_g, ln2_b;
  TensorPtr ff_w1, ff_b1, ff_w2, ff_b2;

  static EncoderLayer init(int d_model, int heads, int d_ff, Rng& rng);

  TensorPtr forward(Tape* tape, const TensorPtr& x,
                    const std::vector<int>& mask, bool train,
                    double dropout_rate, Rng& rng) const;

  void collect(const std::string& prefix, NamedParams& out) const;
  void restore(const std::string& prefix, const NamedParams& named);
};

// Bidirectional recurrent layer over a T x d input sequence. Outputs the
// per-position concatenated hidden states (T x 2H) and the two final
// states concatenated (1 x 2H).
struct BiRecurrentLayer {
  enum class Kind { kLstm, kGru };
  Kind kind = Kind::kLstm;
  int d_in = 0;
  int d_hidden = 0;
  // One parameter set per direction: input and recurrent weights plus bias,
  // gates fused along columns (4H for LSTM, 3H for GRU).
  TensorPtr wx_f, wh_f, b_f;
  TensorPtr wx_b, wh_b, b_b;

  static BiRecurrentLayer init(Kind kind, int d_in, int d_hidden, Rng& rng);

  struct Output {
    TensorPtr sequence;     // T x 2H
    TensorPtr final_state;  // 1 x 2H
  };
  Output forward(Tape* tape, const TensorPtr& x) const;

  void collect(const std::string& prefix, NamedParams& out) const;
  void restore(const std::string& prefix, const NamedParams& named);
};

// Checkpoint helpers shared by the models.
TensorPtr find_param(const NamedParams& named, const std::string& name);
std::vector<TensorPtr> param_list(const NamedParams& named);

}  // namespace ldoc
