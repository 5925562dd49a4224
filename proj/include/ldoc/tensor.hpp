#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ldoc/rng.hpp"

namespace ldoc {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major 64-bit float tensor. Gradient buffer exists iff
// requires_grad; ops propagate requires_grad from their inputs when a
// tape is recording.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;

  std::size_t size() const { return data.size(); }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool is_scalar() const { return data.size() == 1; }

  void set_requires_grad(bool rg) {
    requires_grad = rg;
    grad.assign(rg ? data.size() : 0, 0.0);
  }
  void zero_grad() { grad.assign(grad.size(), 0.0); }

  static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr full(std::vector<int> shape, double value);
  static TensorPtr from(std::vector<int> shape, std::vector<double> data,
                        bool requires_grad = false);
  static TensorPtr scalar(double v);
  // N(0, sigma^2) init.
  static TensorPtr randn(std::vector<int> shape, double sigma, Rng& rng,
                         bool requires_grad = true);
};

// Ordered record of forward ops; backward() replays the recorded pullbacks
// in reverse. Confined to one training thread.
class Tape {
 public:
  void record(std::function<void()> pullback) {
    entries_.push_back(std::move(pullback));
  }
  // Seeds loss->grad with 1 and runs all pullbacks in reverse order.
  // Throws if loss is not a scalar.
  void backward(const TensorPtr& loss);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::function<void()>> entries_;
};

// Primitive ops. `tape` may be nullptr for inference; gradients are then
// neither tracked nor required.
TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(Tape* tape, const TensorPtr& a);
// b must match a's shape exactly, or be a row vector broadcast over a's rows.
TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape* tape, const TensorPtr& a, double c);
TensorPtr embedding_lookup(Tape* tape, const TensorPtr& table,
                           const std::vector<int>& ids);
TensorPtr softmax_rows(Tape* tape, const TensorPtr& a);
TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, double eps = 1e-5);
TensorPtr gelu(Tape* tape, const TensorPtr& x);
TensorPtr tanh_op(Tape* tape, const TensorPtr& x);
TensorPtr sigmoid(Tape* tape, const TensorPtr& x);
// Inverted dropout; identity (bit-exact) when train is false.
TensorPtr dropout(Tape* tape, const TensorPtr& x, double rate, bool train,
                  Rng& rng);
TensorPtr concat(Tape* tape, const std::vector<TensorPtr>& parts, int axis);
TensorPtr slice_rows(Tape* tape, const TensorPtr& a, int start, int len);
TensorPtr slice_cols(Tape* tape, const TensorPtr& a, int start, int len);
// x is T x d, mask has T entries; mean over rows with mask != 0 -> 1 x d.
TensorPtr mean_over_mask(Tape* tape, const TensorPtr& x,
                         const std::vector<int>& mask);
// logits is b x 2, targets in {0,1}; mean negative log-likelihood (scalar).
TensorPtr cross_entropy(Tape* tape, const TensorPtr& logits,
                        const std::vector<int>& targets);
TensorPtr sum_all(Tape* tape, const TensorPtr& x);
// UMAP edge loss on a pair of low-dim points (1 x d each) with similarity
// q = 1/(1 + ||zi - zj||^2): -log(q) for positive edges, -log(1-q) for
// negative samples (scalar).
TensorPtr umap_pair_loss(Tape* tape, const TensorPtr& zi, const TensorPtr& zj,
                         bool positive);

// Bias-corrected Adam over a fixed parameter list; moment buffers are
// lazily sized on the first step.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m, v;
};

// Applies one update using each param's .grad; throws on non-finite
// gradients.
void adam_step(const std::vector<TensorPtr>& params, AdamState& state);

// Parameter checkpoint container: (name, shape, row-major doubles) per
// tensor, with a format-version header.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& named);
std::vector<std::pair<std::string, TensorPtr>> load_checkpoint(
    const std::string& path);

}  // namespace ldoc
