#pragma once

#include <string>
#include <vector>

#include "ldoc/corpus.hpp"

namespace ldoc {

// Ordered chunk embeddings for one document; vectors laid out row-major,
// one row per chunk in chunk order.
struct DocEmbedding {
  std::string doc_id;
  int label = 0;
  Split split = Split::kTrain;
  int chunk_count = 0;
  std::vector<double> vectors;  // chunk_count x dim

  const double* chunk(int i, int dim) const {
    return vectors.data() + static_cast<std::size_t>(i) * dim;
  }
};

struct EmbeddingStore {
  int dim = 0;
  int chunk_len = 0;
  int overlap = 0;
  int max_len = 0;
  std::string source_hash;  // fingerprint of the producing checkpoint
  std::string reduced_by;   // reducer fingerprint; empty for full-dim stores
  std::vector<DocEmbedding> docs;

  std::size_t total_chunks() const;
  // Flattened points (n x dim) for the given splits, preserving document
  // and chunk order.
  std::vector<double> points_for(const std::vector<Split>& splits) const;

  void save(const std::string& path) const;
  static EmbeddingStore load(const std::string& path);
};

}  // namespace ldoc
