#include "ldoc/reducer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ldoc/io.hpp"
#include "ldoc/kernels.hpp"

namespace ldoc {

namespace {
constexpr double kInitSigma = 0.1;
constexpr double kSigmaTol = 1e-5;
}  // namespace

FuzzyGraph build_fuzzy_graph(const std::vector<double>& points, int n, int dim,
                             int k) {
  if (k < 2) throw std::invalid_argument("build_fuzzy_graph: k must be >= 2");
  if (k >= n)
    throw std::invalid_argument("build_fuzzy_graph: need more than k points");
  const double target = std::log2(static_cast<double>(k));

  FuzzyGraph g;
  g.n = n;
  g.k = k;
  g.neighbors.assign(static_cast<std::size_t>(n), {});
  g.distances.assign(static_cast<std::size_t>(n), {});
  g.rho.assign(static_cast<std::size_t>(n), 0.0);
  g.sigma.assign(static_cast<std::size_t>(n), 0.0);
  g.sigma_err.assign(static_cast<std::size_t>(n), 0.0);

  const auto sq = kernels::pairwise_sq_dists(points, static_cast<std::size_t>(n),
                                             static_cast<std::size_t>(dim));

#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> order;
    order.reserve(static_cast<std::size_t>(n) - 1);
    for (int j = 0; j < n; ++j)
      if (j != i)
        order.emplace_back(
            std::sqrt(sq[static_cast<std::size_t>(i) * n + j]), j);
    std::partial_sort(order.begin(), order.begin() + k, order.end());

    auto& nb = g.neighbors[static_cast<std::size_t>(i)];
    auto& dists = g.distances[static_cast<std::size_t>(i)];
    for (int t = 0; t < k; ++t) {
      dists.push_back(order[static_cast<std::size_t>(t)].first);
      nb.push_back(order[static_cast<std::size_t>(t)].second);
    }
    const double rho = dists[0];
    g.rho[static_cast<std::size_t>(i)] = rho;

    auto membership_sum = [&](double sigma) {
      double s = 0.0;
      for (double d : dists) s += std::exp(-std::max(0.0, d - rho) / sigma);
      return s;
    };

    // Sum is monotone increasing in sigma; bracket then bisect.
    double lo = 1e-12, hi = 1.0;
    while (membership_sum(hi) < target && hi < 1e12) hi *= 2.0;
    double sigma = hi;
    for (int it = 0; it < 200; ++it) {
      sigma = 0.5 * (lo + hi);
      const double s = membership_sum(sigma);
      if (std::abs(s - target) < kSigmaTol) break;
      if (s > target) hi = sigma;
      else lo = sigma;
    }
    // Degenerate neighborhoods (all distances == rho) sum to k for every
    // sigma; clamp to the bracket floor.
    if (membership_sum(1e-12) >= target) sigma = 1e-12;
    g.sigma[static_cast<std::size_t>(i)] = sigma;
    g.sigma_err[static_cast<std::size_t>(i)] =
        std::min(std::abs(membership_sum(sigma) - target),
                 std::abs(membership_sum(1e-12) - target));
  }

  // Symmetrize over the union of directed edges.
  std::map<std::pair<int, int>, std::pair<double, double>> directed;
  for (int i = 0; i < n; ++i) {
    const auto& nb = g.neighbors[static_cast<std::size_t>(i)];
    const auto& dists = g.distances[static_cast<std::size_t>(i)];
    for (int t = 0; t < k; ++t) {
      const int j = nb[static_cast<std::size_t>(t)];
      const double a =
          std::exp(-std::max(0.0, dists[static_cast<std::size_t>(t)] -
                                      g.rho[static_cast<std::size_t>(i)]) /
                   g.sigma[static_cast<std::size_t>(i)]);
      const auto key = std::minmax(i, j);
      auto& slot = directed[{key.first, key.second}];
      if (i < j) slot.first = a;
      else slot.second = a;
    }
  }
  for (const auto& [key, a] : directed) {
    FuzzyGraph::Edge e;
    e.i = key.first;
    e.j = key.second;
    e.w = a.first + a.second - a.first * a.second;
    if (e.w > 0.0) g.edges.push_back(e);
  }
  return g;
}

UmapModel::UmapModel(int d_in, const UmapConfig& config, std::uint64_t seed)
    : d_in_(d_in), config_(config) {
  Rng rng(seed);
  const int h = config.hidden;
  w1_ = Tensor::randn({d_in, h}, kInitSigma, rng);
  b1_ = Tensor::zeros({1, h}, true);
  w2_ = Tensor::randn({h, h}, kInitSigma, rng);
  b2_ = Tensor::zeros({1, h}, true);
  w3_ = Tensor::randn({h, config.out_dim}, kInitSigma, rng);
  b3_ = Tensor::zeros({1, config.out_dim}, true);
}

TensorPtr UmapModel::forward(Tape* tape, const TensorPtr& x) const {
  if (x->cols() != d_in_)
    throw std::invalid_argument("UmapModel: input width " +
                                std::to_string(x->cols()) + " != " +
                                std::to_string(d_in_));
  auto h = gelu(tape, add(tape, matmul(tape, x, w1_), b1_));
  h = gelu(tape, add(tape, matmul(tape, h, w2_), b2_));
  return add(tape, matmul(tape, h, w3_), b3_);
}

std::vector<double> UmapModel::transform(const std::vector<double>& vec) const {
  if (static_cast<int>(vec.size()) != d_in_)
    throw std::invalid_argument("transform: input length " +
                                std::to_string(vec.size()) + " != " +
                                std::to_string(d_in_));
  auto out = forward(nullptr, Tensor::from({1, d_in_}, vec));
  return out->data;
}

NamedParams UmapModel::named_params() const {
  return {{"w1", w1_}, {"b1", b1_}, {"w2", w2_},
          {"b2", b2_}, {"w3", w3_}, {"b3", b3_}};
}

void UmapModel::save(const std::string& path) const {
  auto named = named_params();
  named.emplace_back(
      "config",
      Tensor::from({8}, {static_cast<double>(d_in_),
                         static_cast<double>(config_.k),
                         static_cast<double>(config_.out_dim),
                         static_cast<double>(config_.hidden),
                         static_cast<double>(config_.epochs),
                         static_cast<double>(config_.negative_rate),
                         static_cast<double>(config_.samples_per_epoch),
                         config_.lr}));
  std::vector<double> fp(fit_fingerprint_.begin(), fit_fingerprint_.end());
  named.emplace_back("fit_fingerprint",
                     Tensor::from({static_cast<int>(fp.size())}, fp));
  save_checkpoint(path, named);
}

UmapModel UmapModel::load(const std::string& path) {
  auto named = load_checkpoint(path);
  auto cfg = find_param(named, "config");
  UmapModel m;
  m.d_in_ = static_cast<int>(cfg->data[0]);
  m.config_.k = static_cast<int>(cfg->data[1]);
  m.config_.out_dim = static_cast<int>(cfg->data[2]);
  m.config_.hidden = static_cast<int>(cfg->data[3]);
  m.config_.epochs = static_cast<int>(cfg->data[4]);
  m.config_.negative_rate = static_cast<int>(cfg->data[5]);
  m.config_.samples_per_epoch = static_cast<int>(cfg->data[6]);
  m.config_.lr = cfg->data[7];
  auto fp = find_param(named, "fit_fingerprint");
  m.fit_fingerprint_.assign(fp->data.size(), '\0');
  for (std::size_t i = 0; i < fp->data.size(); ++i)
    m.fit_fingerprint_[i] = static_cast<char>(fp->data[i]);
  m.w1_ = find_param(named, "w1");
  m.b1_ = find_param(named, "b1");
  m.w2_ = find_param(named, "w2");
  m.b2_ = find_param(named, "b2");
  m.w3_ = find_param(named, "w3");
  m.b3_ = find_param(named, "b3");
  for (const auto& [name, t] : m.named_params()) t->set_requires_grad(true);
  return m;
}

UmapModel fit_pumap(const EmbeddingStore& store, const UmapConfig& config) {
  for (const auto& d : store.docs)
    if (d.split == Split::kTest)
      throw std::runtime_error(
          "test leakage: reducer must be fit on train+validation only");
  const auto points =
      store.points_for({Split::kTrain, Split::kValidation});
  const int n = static_cast<int>(points.size() / store.dim);
  if (n == 0) throw std::invalid_argument("fit_pumap: empty store");

  auto graph = build_fuzzy_graph(points, n, store.dim, config.k);

  UmapModel model(store.dim, config, config.seed);
  model.fit_fingerprint_ =
      io::hex64(io::fnv1a64(points.data(), points.size() * sizeof(double)));

  // Cumulative weights for edge sampling proportional to w_ij.
  std::vector<double> cum(graph.edges.size());
  double total = 0.0;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    total += graph.edges[e].w;
    cum[e] = total;
  }
  if (graph.edges.empty())
    throw std::runtime_error("fit_pumap: fuzzy graph has no edges");

  auto params = param_list(model.named_params());
  AdamState adam;
  adam.lr = config.lr;
  Rng rng(config.seed + 1);

  auto point_tensor = [&](int idx) {
    return Tensor::from(
        {1, store.dim},
        {points.begin() + static_cast<std::size_t>(idx) * store.dim,
         points.begin() + static_cast<std::size_t>(idx + 1) * store.dim});
  };

  const int samples =
      std::min<int>(config.samples_per_epoch,
                    static_cast<int>(graph.edges.size()));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    int taken = 0;
    while (taken < samples) {
      const int batch = std::min(config.batch_edges, samples - taken);
      Tape tape;
      for (auto& p : params) p->zero_grad();
      std::vector<TensorPtr> losses;
      for (int b = 0; b < batch; ++b) {
        const double r = rng.uniform() * total;
        const auto it = std::lower_bound(cum.begin(), cum.end(), r);
        const auto& edge =
            graph.edges[static_cast<std::size_t>(it - cum.begin())];
        auto zi = model.forward(&tape, point_tensor(edge.i));
        auto zj = model.forward(&tape, point_tensor(edge.j));
        losses.push_back(umap_pair_loss(&tape, zi, zj, true));
        for (int neg = 0; neg < config.negative_rate; ++neg) {
          const int jn = static_cast<int>(rng.uniform_int(
              static_cast<std::uint64_t>(n)));
          auto zn = model.forward(&tape, point_tensor(jn));
          losses.push_back(umap_pair_loss(&tape, zi, zn, false));
        }
      }
      auto loss = scale(&tape, sum_all(&tape, concat(&tape, losses, 0)),
                        1.0 / static_cast<double>(losses.size()));
      epoch_loss += loss->data[0] * static_cast<double>(losses.size());
      tape.backward(loss);
      adam_step(params, adam);
      taken += batch;
    }
    model.epoch_losses_.push_back(
        epoch_loss /
        static_cast<double>(samples * (1 + config.negative_rate)));
  }
  return model;
}

EmbeddingStore reduce_store(const UmapModel& model,
                            const EmbeddingStore& store) {
  EmbeddingStore out;
  out.dim = model.out_dim();
  out.chunk_len = store.chunk_len;
  out.overlap = store.overlap;
  out.max_len = store.max_len;
  out.source_hash = store.source_hash;
  out.reduced_by = model.fit_fingerprint();
  out.docs.resize(store.docs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long long i = 0; i < static_cast<long long>(store.docs.size()); ++i) {
    const auto& d = store.docs[static_cast<std::size_t>(i)];
    DocEmbedding r;
    r.doc_id = d.doc_id;
    r.label = d.label;
    r.split = d.split;
    r.chunk_count = d.chunk_count;
    r.vectors.reserve(static_cast<std::size_t>(d.chunk_count) * out.dim);
    for (int c = 0; c < d.chunk_count; ++c) {
      std::vector<double> vec(d.chunk(c, store.dim),
                              d.chunk(c, store.dim) + store.dim);
      auto z = model.transform(vec);
      r.vectors.insert(r.vectors.end(), z.begin(), z.end());
    }
    out.docs[static_cast<std::size_t>(i)] = std::move(r);
  }
  return out;
}

EmbeddingStore filter_splits(const EmbeddingStore& store,
                             const std::vector<Split>& splits) {
  EmbeddingStore out = store;
  out.docs.clear();
  for (const auto& d : store.docs) {
    for (Split s : splits)
      if (d.split == s) {
        out.docs.push_back(d);
        break;
      }
  }
  return out;
}

}  // namespace ldoc
