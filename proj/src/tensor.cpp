#include "ldoc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ldoc/io.hpp"
#include "ldoc/kernels.hpp"

namespace ldoc {

namespace {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

[[noreturn]] void shape_error(const char* op, const TensorPtr& a,
                              const TensorPtr& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a->shape) + " and " +
                              shape_str(b->shape));
}

bool track(Tape* tape, std::initializer_list<const TensorPtr*> inputs) {
  if (!tape) return false;
  for (const TensorPtr* t : inputs)
    if ((*t)->requires_grad) return true;
  return false;
}

TensorPtr make_out(std::vector<int> shape, bool rg) {
  auto t = Tensor::zeros(std::move(shape));
  t->set_requires_grad(rg);
  return t;
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->data.assign(shape_size(shape), 0.0);
  t->shape = std::move(shape);
  t->set_requires_grad(requires_grad);
  return t;
}

TensorPtr Tensor::full(std::vector<int> shape, double value) {
  auto t = Tensor::zeros(std::move(shape));
  std::fill(t->data.begin(), t->data.end(), value);
  return t;
}

TensorPtr Tensor::from(std::vector<int> shape, std::vector<double> data,
                       bool requires_grad) {
  if (shape_size(shape) != data.size())
    throw std::invalid_argument("Tensor::from: shape/data size mismatch");
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  t->set_requires_grad(requires_grad);
  return t;
}

TensorPtr Tensor::scalar(double v) { return Tensor::from({1}, {v}); }

TensorPtr Tensor::randn(std::vector<int> shape, double sigma, Rng& rng,
                        bool requires_grad) {
  auto t = Tensor::zeros(std::move(shape));
  for (double& x : t->data) x = sigma * rng.normal();
  t->set_requires_grad(requires_grad);
  return t;
}

void Tape::backward(const TensorPtr& loss) {
  if (!loss->is_scalar())
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  if (!loss->requires_grad)
    throw std::invalid_argument("backward: loss does not require grad");
  loss->grad[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->cols() != b->rows())
    shape_error("matmul", a, b);
  const std::size_t m = a->rows(), k = a->cols(), n = b->cols();
  auto out = make_out({static_cast<int>(m), static_cast<int>(n)},
                      track(tape, {&a, &b}));
  kernels::matmul(a->data.data(), b->data.data(), out->data.data(), m, k, n);
  if (out->requires_grad) {
    tape->record([a, b, out, m, k, n] {
      const double* dc = out->grad.data();
      if (a->requires_grad) {
        // dA += dC * B^T
        double* da = a->grad.data();
        const double* bd = b->data.data();
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
        for (long long i = 0; i < static_cast<long long>(m); ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = dc[i * n + j];
            if (g == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p)
              da[i * k + p] += g * bd[p * n + j];
          }
      }
      if (b->requires_grad) {
        // dB += A^T * dC
        double* db = b->grad.data();
        const double* ad = a->data.data();
#pragma omp parallel for schedule(static) if (m * n * k > 16384)
        for (long long p = 0; p < static_cast<long long>(k); ++p)
          for (std::size_t i = 0; i < m; ++i) {
            const double av = ad[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
              db[p * n + j] += av * dc[i * n + j];
          }
      }
    });
  }
  return out;
}

TensorPtr transpose(Tape* tape, const TensorPtr& a) {
  if (a->shape.size() != 2)
    throw std::invalid_argument("transpose: expects a 2-D tensor");
  const int m = a->rows(), n = a->cols();
  auto out = make_out({n, m}, track(tape, {&a}));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out->data[j * m + i] = a->data[i * n + j];
  if (out->requires_grad) {
    tape->record([a, out, m, n] {
      if (!a->requires_grad) return;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) a->grad[i * n + j] += out->grad[j * m + i];
    });
  }
  return out;
}

namespace {

// add/sub share the broadcast layout check: exact match, or b a row
// vector applied to each row of a.
enum class BroadcastKind { kExact, kRow };

BroadcastKind broadcast_kind(const char* op, const TensorPtr& a,
                             const TensorPtr& b) {
  if (a->shape == b->shape) return BroadcastKind::kExact;
  if (b->size() == static_cast<std::size_t>(a->cols()) && a->shape.size() == 2)
    return BroadcastKind::kRow;
  shape_error(op, a, b);
}

}  // namespace

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  const auto kind = broadcast_kind("add", a, b);
  auto out = make_out(a->shape, track(tape, {&a, &b}));
  const std::size_t n = a->size(), bc = b->size();
  if (kind == BroadcastKind::kExact) {
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out->data[i] = a->data[i] + b->data[i % bc];
  }
  if (out->requires_grad) {
    tape->record([a, b, out, n, bc] {
      if (a->requires_grad)
        for (std::size_t i = 0; i < n; ++i) a->grad[i] += out->grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < n; ++i) b->grad[i % bc] += out->grad[i];
    });
  }
  return out;
}

TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  const auto kind = broadcast_kind("sub", a, b);
  auto out = make_out(a->shape, track(tape, {&a, &b}));
  const std::size_t n = a->size(), bc = b->size();
  if (kind == BroadcastKind::kExact) {
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a->data[i] - b->data[i];
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out->data[i] = a->data[i] - b->data[i % bc];
  }
  if (out->requires_grad) {
    tape->record([a, b, out, n, bc] {
      if (a->requires_grad)
        for (std::size_t i = 0; i < n; ++i) a->grad[i] += out->grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < n; ++i) b->grad[i % bc] -= out->grad[i];
    });
  }
  return out;
}

TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) shape_error("mul", a, b);
  auto out = make_out(a->shape, track(tape, {&a, &b}));
  const std::size_t n = a->size();
  for (std::size_t i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
  if (out->requires_grad) {
    tape->record([a, b, out, n] {
      for (std::size_t i = 0; i < n; ++i) {
        if (a->requires_grad) a->grad[i] += out->grad[i] * b->data[i];
        if (b->requires_grad) b->grad[i] += out->grad[i] * a->data[i];
      }
    });
  }
  return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& a, double c) {
  auto out = make_out(a->shape, track(tape, {&a}));
  const std::size_t n = a->size();
  for (std::size_t i = 0; i < n; ++i) out->data[i] = c * a->data[i];
  if (out->requires_grad) {
    tape->record([a, out, c, n] {
      if (!a->requires_grad) return;
      for (std::size_t i = 0; i < n; ++i) a->grad[i] += c * out->grad[i];
    });
  }
  return out;
}

TensorPtr embedding_lookup(Tape* tape, const TensorPtr& table,
                           const std::vector<int>& ids) {
  if (table->shape.size() != 2)
    throw std::invalid_argument("embedding_lookup: table must be 2-D");
  const int v = table->rows(), d = table->cols();
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::out_of_range("embedding_lookup: id " + std::to_string(id) +
                              " outside table of " + std::to_string(v) +
                              " rows");
  auto out =
      make_out({static_cast<int>(ids.size()), d}, track(tape, {&table}));
  for (std::size_t t = 0; t < ids.size(); ++t)
    std::copy_n(table->data.begin() + static_cast<std::size_t>(ids[t]) * d, d,
                out->data.begin() + t * d);
  if (out->requires_grad) {
    tape->record([table, out, ids, d] {
      for (std::size_t t = 0; t < ids.size(); ++t)
        for (int j = 0; j < d; ++j)
          table->grad[static_cast<std::size_t>(ids[t]) * d + j] +=
              out->grad[t * d + j];
    });
  }
  return out;
}

TensorPtr softmax_rows(Tape* tape, const TensorPtr& a) {
  const int m = a->rows(), n = a->cols();
  auto out = make_out(a->shape, track(tape, {&a}));
  for (int i = 0; i < m; ++i) {
    const double* row = a->data.data() + static_cast<std::size_t>(i) * n;
    double* orow = out->data.data() + static_cast<std::size_t>(i) * n;
    const double mx = *std::max_element(row, row + n);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= sum;
  }
  if (out->requires_grad) {
    tape->record([a, out, m, n] {
      if (!a->requires_grad) return;
      for (int i = 0; i < m; ++i) {
        const double* y = out->data.data() + static_cast<std::size_t>(i) * n;
        const double* dy = out->grad.data() + static_cast<std::size_t>(i) * n;
        double* dx = a->grad.data() + static_cast<std::size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += dy[j] * y[j];
        for (int j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
      }
    });
  }
  return out;
}

TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, double eps) {
  const int m = x->rows(), n = x->cols();
  if (gamma->size() != static_cast<std::size_t>(n) ||
      beta->size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("layer_norm: gamma/beta length must equal row width");
  auto out = make_out(x->shape, track(tape, {&x, &gamma, &beta}));
  // Keep per-row mean and inverse stddev for the pullback.
  auto mu = std::make_shared<std::vector<double>>(m);
  auto rstd = std::make_shared<std::vector<double>>(m);
  for (int i = 0; i < m; ++i) {
    const double* row = x->data.data() + static_cast<std::size_t>(i) * n;
    double* orow = out->data.data() + static_cast<std::size_t>(i) * n;
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= n;
    const double rs = 1.0 / std::sqrt(var + eps);
    (*mu)[i] = mean;
    (*rstd)[i] = rs;
    for (int j = 0; j < n; ++j)
      orow[j] = gamma->data[j] * (row[j] - mean) * rs + beta->data[j];
  }
  if (out->requires_grad) {
    tape->record([x, gamma, beta, out, mu, rstd, m, n] {
      for (int i = 0; i < m; ++i) {
        const double* row = x->data.data() + static_cast<std::size_t>(i) * n;
        const double* dy = out->grad.data() + static_cast<std::size_t>(i) * n;
        const double rs = (*rstd)[i], mean = (*mu)[i];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
          const double xhat = (row[j] - mean) * rs;
          const double dxhat = dy[j] * gamma->data[j];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          if (gamma->requires_grad) gamma->grad[j] += dy[j] * xhat;
          if (beta->requires_grad) beta->grad[j] += dy[j];
        }
        if (x->requires_grad) {
          double* dx = x->grad.data() + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) {
            const double xhat = (row[j] - mean) * rs;
            const double dxhat = dy[j] * gamma->data[j];
            dx[j] += rs * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / n);
          }
        }
      }
    });
  }
  return out;
}

TensorPtr gelu(Tape* tape, const TensorPtr& x) {
  auto out = make_out(x->shape, track(tape, {&x}));
  const std::size_t n = x->size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x->data[i];
    out->data[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  if (out->requires_grad) {
    tape->record([x, out, n] {
      if (!x->requires_grad) return;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = x->data[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        x->grad[i] += out->grad[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

TensorPtr tanh_op(Tape* tape, const TensorPtr& x) {
  auto out = make_out(x->shape, track(tape, {&x}));
  const std::size_t n = x->size();
  for (std::size_t i = 0; i < n; ++i) out->data[i] = std::tanh(x->data[i]);
  if (out->requires_grad) {
    tape->record([x, out, n] {
      if (!x->requires_grad) return;
      for (std::size_t i = 0; i < n; ++i) {
        const double y = out->data[i];
        x->grad[i] += out->grad[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

TensorPtr sigmoid(Tape* tape, const TensorPtr& x) {
  auto out = make_out(x->shape, track(tape, {&x}));
  const std::size_t n = x->size();
  for (std::size_t i = 0; i < n; ++i)
    out->data[i] = 1.0 / (1.0 + std::exp(-x->data[i]));
  if (out->requires_grad) {
    tape->record([x, out, n] {
      if (!x->requires_grad) return;
      for (std::size_t i = 0; i < n; ++i) {
        const double y = out->data[i];
        x->grad[i] += out->grad[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

TensorPtr dropout(Tape* tape, const TensorPtr& x, double rate, bool train,
                  Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  auto out = make_out(x->shape, track(tape, {&x}));
  const std::size_t n = x->size();
  const double inv_keep = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    (*mask)[i] = rng.uniform() < rate ? 0.0 : inv_keep;
    out->data[i] = x->data[i] * (*mask)[i];
  }
  if (out->requires_grad) {
    tape->record([x, out, mask, n] {
      if (!x->requires_grad) return;
      for (std::size_t i = 0; i < n; ++i)
        x->grad[i] += out->grad[i] * (*mask)[i];
    });
  }
  return out;
}

TensorPtr concat(Tape* tape, const std::vector<TensorPtr>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1)
    throw std::invalid_argument("concat: axis must be 0 or 1");
  bool rg = false;
  if (tape)
    for (const auto& p : parts) rg = rg || p->requires_grad;
  if (axis == 0) {
    const int n = parts[0]->cols();
    int m = 0;
    for (const auto& p : parts) {
      if (p->cols() != n) shape_error("concat", parts[0], p);
      m += p->rows();
    }
    auto out = make_out({m, n}, rg);
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p->data.begin(), p->data.end(), out->data.begin() + off);
      off += p->size();
    }
    if (rg) {
      tape->record([parts, out] {
        std::size_t off = 0;
        for (const auto& p : parts) {
          if (p->requires_grad)
            for (std::size_t i = 0; i < p->size(); ++i)
              p->grad[i] += out->grad[off + i];
          off += p->size();
        }
      });
    }
    return out;
  }
  const int m = parts[0]->rows();
  int n = 0;
  for (const auto& p : parts) {
    if (p->rows() != m) shape_error("concat", parts[0], p);
    n += p->cols();
  }
  auto out = make_out({m, n}, rg);
  int coff = 0;
  for (const auto& p : parts) {
    const int pc = p->cols();
    for (int i = 0; i < m; ++i)
      std::copy_n(p->data.begin() + static_cast<std::size_t>(i) * pc, pc,
                  out->data.begin() + static_cast<std::size_t>(i) * n + coff);
    coff += pc;
  }
  if (rg) {
    tape->record([parts, out, m, n] {
      int coff = 0;
      for (const auto& p : parts) {
        const int pc = p->cols();
        if (p->requires_grad)
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < pc; ++j)
              p->grad[static_cast<std::size_t>(i) * pc + j] +=
                  out->grad[static_cast<std::size_t>(i) * n + coff + j];
        coff += pc;
      }
    });
  }
  return out;
}

TensorPtr slice_rows(Tape* tape, const TensorPtr& a, int start, int len) {
  const int m = a->rows(), n = a->cols();
  if (start < 0 || len < 1 || start + len > m)
    throw std::out_of_range("slice_rows: range outside tensor");
  auto out = make_out({len, n}, track(tape, {&a}));
  std::copy_n(a->data.begin() + static_cast<std::size_t>(start) * n,
              static_cast<std::size_t>(len) * n, out->data.begin());
  if (out->requires_grad) {
    tape->record([a, out, start, len, n] {
      if (!a->requires_grad) return;
      for (std::size_t i = 0; i < static_cast<std::size_t>(len) * n; ++i)
        a->grad[static_cast<std::size_t>(start) * n + i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr slice_cols(Tape* tape, const TensorPtr& a, int start, int len) {
  const int m = a->rows(), n = a->cols();
  if (start < 0 || len < 1 || start + len > n)
    throw std::out_of_range("slice_cols: range outside tensor");
  auto out = make_out({m, len}, track(tape, {&a}));
  for (int i = 0; i < m; ++i)
    std::copy_n(a->data.begin() + static_cast<std::size_t>(i) * n + start, len,
                out->data.begin() + static_cast<std::size_t>(i) * len);
  if (out->requires_grad) {
    tape->record([a, out, start, len, m, n] {
      if (!a->requires_grad) return;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < len; ++j)
          a->grad[static_cast<std::size_t>(i) * n + start + j] +=
              out->grad[static_cast<std::size_t>(i) * len + j];
    });
  }
  return out;
}

TensorPtr mean_over_mask(Tape* tape, const TensorPtr& x,
                         const std::vector<int>& mask) {
  const int m = x->rows(), n = x->cols();
  if (mask.size() != static_cast<std::size_t>(m))
    throw std::invalid_argument("mean_over_mask: mask length must equal rows");
  int count = 0;
  for (int v : mask) count += v != 0;
  if (count == 0)
    throw std::invalid_argument("mean_over_mask: mask selects no rows");
  auto out = make_out({1, n}, track(tape, {&x}));
  for (int i = 0; i < m; ++i) {
    if (!mask[i]) continue;
    for (int j = 0; j < n; ++j)
      out->data[j] += x->data[static_cast<std::size_t>(i) * n + j];
  }
  const double inv = 1.0 / count;
  for (int j = 0; j < n; ++j) out->data[j] *= inv;
  if (out->requires_grad) {
    tape->record([x, out, mask, m, n, inv] {
      if (!x->requires_grad) return;
      for (int i = 0; i < m; ++i) {
        if (!mask[i]) continue;
        for (int j = 0; j < n; ++j)
          x->grad[static_cast<std::size_t>(i) * n + j] += inv * out->grad[j];
      }
    });
  }
  return out;
}

TensorPtr cross_entropy(Tape* tape, const TensorPtr& logits,
                        const std::vector<int>& targets) {
  const int b = logits->rows(), c = logits->cols();
  if (targets.size() != static_cast<std::size_t>(b))
    throw std::invalid_argument("cross_entropy: one target per logits row required");
  for (int t : targets)
    if (t < 0 || t >= c)
      throw std::invalid_argument("cross_entropy: target outside class range");
  auto out = make_out({1}, track(tape, {&logits}));
  auto probs = std::make_shared<std::vector<double>>(logits->data);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    double* row = probs->data() + static_cast<std::size_t>(i) * c;
    const double mx = *std::max_element(row, row + c);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int j = 0; j < c; ++j) row[j] /= sum;
    loss -= std::log(std::max(row[targets[i]], 1e-300));
  }
  out->data[0] = loss / b;
  if (out->requires_grad) {
    tape->record([logits, out, probs, targets, b, c] {
      if (!logits->requires_grad) return;
      const double g = out->grad[0] / b;
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < c; ++j)
          logits->grad[static_cast<std::size_t>(i) * c + j] +=
              g * ((*probs)[static_cast<std::size_t>(i) * c + j] -
                   (j == targets[i] ? 1.0 : 0.0));
    });
  }
  return out;
}

TensorPtr sum_all(Tape* tape, const TensorPtr& x) {
  auto out = make_out({1}, track(tape, {&x}));
  out->data[0] = std::accumulate(x->data.begin(), x->data.end(), 0.0);
  if (out->requires_grad) {
    tape->record([x, out] {
      if (!x->requires_grad) return;
      for (double& g : x->grad) g += out->grad[0];
    });
  }
  return out;
}

TensorPtr umap_pair_loss(Tape* tape, const TensorPtr& zi, const TensorPtr& zj,
                         bool positive) {
  if (zi->shape != zj->shape) shape_error("umap_pair_loss", zi, zj);
  const std::size_t n = zi->size();
  double d2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double diff = zi->data[k] - zj->data[k];
    d2 += diff * diff;
  }
  const double q = 1.0 / (1.0 + d2);
  auto out = make_out({1}, track(tape, {&zi, &zj}));
  // -log q = log(1 + d^2);  -log(1-q) = log(1 + 1/d^2)
  constexpr double kEps = 1e-9;  // keeps the repulsive branch finite at d=0
  out->data[0] = positive ? std::log1p(d2) : std::log1p(1.0 / (d2 + kEps));
  if (out->requires_grad) {
    tape->record([zi, zj, out, positive, d2, q, n] {
      // d loss / d d2: positive -> q; negative -> -1/((d2+eps)(1+d2+eps))
      const double dl_dd2 =
          positive ? q : -1.0 / ((d2 + 1e-9) * (1.0 + d2 + 1e-9));
      const double g = out->grad[0] * dl_dd2;
      for (std::size_t k = 0; k < n; ++k) {
        const double diff = zi->data[k] - zj->data[k];
        if (zi->requires_grad) zi->grad[k] += g * 2.0 * diff;
        if (zj->requires_grad) zj->grad[k] -= g * 2.0 * diff;
      }
    });
  }
  return out;
}

void adam_step(const std::vector<TensorPtr>& params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      state.m[p].assign(params[p]->size(), 0.0);
      state.v[p].assign(params[p]->size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: parameter list changed size");
  for (const auto& p : params)
    for (double g : p->grad)
      if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& m = state.m[p];
    auto& v = state.v[p];
    auto& param = *params[p];
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = param.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      param.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

namespace {
constexpr char kCkptMagic[] = "LDOCCKP1";
}

void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, TensorPtr>>& named) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kCkptMagic, 8);
  io::write_u32(os, 1);  // format version
  io::write_u64(os, named.size());
  for (const auto& [name, t] : named) {
    io::write_str(os, name);
    io::write_u32(os, static_cast<std::uint32_t>(t->shape.size()));
    for (int d : t->shape) io::write_i32(os, d);
    io::write_f64s(os, t->data);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

std::vector<std::pair<std::string, TensorPtr>> load_checkpoint(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  io::check_magic(is, kCkptMagic, "checkpoint");
  const auto version = io::read_u32(is);
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  const auto count = io::read_u64(is);
  std::vector<std::pair<std::string, TensorPtr>> named;
  named.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = io::read_str(is);
    const auto ndim = io::read_u32(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = io::read_i32(is);
    auto data = io::read_f64s(is);
    named.emplace_back(std::move(name),
                       Tensor::from(std::move(shape), std::move(data)));
  }
  return named;
}

}  // namespace ldoc
