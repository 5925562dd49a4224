#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldoc/embedding_store.hpp"
#include "ldoc/tensor.hpp"
#include "ldoc/transformer.hpp"

namespace ldoc {

// Symmetrized fuzzy kNN graph: directed memberships
// a_ij = exp(-max(0, d_ij - rho_i) / sigma_i) with sigma_i calibrated so
// each point's membership sum hits log2(k), then w = a + a^T - a.a^T.
struct FuzzyGraph {
  int n = 0;
  int k = 0;
  std::vector<std::vector<int>> neighbors;    // per point, k nearest ids
  std::vector<std::vector<double>> distances; // matching Euclidean distances
  std::vector<double> rho;                    // distance to nearest neighbor
  std::vector<double> sigma;
  std::vector<double> sigma_err;  // |sum a_ij - log2(k)| after calibration

  struct Edge {
    int i = 0, j = 0;  // i < j
    double w = 0.0;
  };
  std::vector<Edge> edges;
};

FuzzyGraph build_fuzzy_graph(const std::vector<double>& points, int n, int dim,
                             int k);

struct UmapConfig {
  int k = 15;
  int out_dim = 64;
  int hidden = 128;
  int epochs = 5;
  int negative_rate = 5;
  int samples_per_epoch = 4000;
  int batch_edges = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

// Parametric UMAP: a feed-forward network d_in -> hidden -> hidden -> out_dim
// trained by sampled edge-wise cross-entropy on the fuzzy graph. Being
// parametric, it transforms unseen (test) points.
class UmapModel {
 public:
  UmapModel() = default;
  UmapModel(int d_in, const UmapConfig& config, std::uint64_t seed);

  int d_in() const { return d_in_; }
  int out_dim() const { return config_.out_dim; }
  const std::string& fit_fingerprint() const { return fit_fingerprint_; }
  const std::vector<double>& epoch_losses() const { return epoch_losses_; }

  TensorPtr forward(Tape* tape, const TensorPtr& x) const;
  std::vector<double> transform(const std::vector<double>& vec) const;

  NamedParams named_params() const;

  void save(const std::string& path) const;
  static UmapModel load(const std::string& path);

  friend UmapModel fit_pumap(const EmbeddingStore& store,
                             const UmapConfig& config);

 private:
  int d_in_ = 0;
  UmapConfig config_;
  std::string fit_fingerprint_;
  std::vector<double> epoch_losses_;
  TensorPtr w1_, b1_, w2_, b2_, w3_, b3_;
};

// Fits on the store's points; the store must hold train+validation splits
// only ("test leakage" error otherwise).
UmapModel fit_pumap(const EmbeddingStore& store, const UmapConfig& config);

// Applies the model to every vector of the store, producing a reduced
// store with the model's fingerprint in the reduced_by header field.
EmbeddingStore reduce_store(const UmapModel& model, const EmbeddingStore& store);

// Split filter helper (used to honor the train/validation-only rule).
EmbeddingStore filter_splits(const EmbeddingStore& store,
                             const std::vector<Split>& splits);

}  // namespace ldoc
