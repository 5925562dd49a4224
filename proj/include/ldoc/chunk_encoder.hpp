#pragma once

#include <string>
#include <vector>

#include "ldoc/corpus.hpp"
#include "ldoc/embedding_store.hpp"
#include "ldoc/transformer.hpp"

namespace ldoc {

struct ChunkEncoderConfig {
  int d_model = 64;
  int heads = 4;
  int layers = 1;
  int d_ff = 256;
  int max_len = 128;
  int vocab_size = 0;
  double dropout = 0.1;
};

// Step I: small trainable transformer that classifies chunks with their
// inherited document label, then serves as a frozen [CLS] feature
// extractor.
class ChunkEncoderModel {
 public:
  ChunkEncoderModel() = default;
  ChunkEncoderModel(const ChunkEncoderConfig& config, std::uint64_t seed);

  const ChunkEncoderConfig& config() const { return config_; }

  // Final-layer hidden states (T x d_model); logits read position 0.
  TensorPtr encode(Tape* tape, const TokenSequence& seq, bool train,
                   Rng& rng) const;
  TensorPtr logits(Tape* tape, const TokenSequence& seq, bool train,
                   Rng& rng) const;
  // [CLS] hidden state with dropout off; deterministic.
  std::vector<double> extract_cls(const TokenSequence& seq) const;

  NamedParams named_params() const;
  std::vector<TensorPtr> params() const { return param_list(named_params()); }

  void save(const std::string& path) const;
  static ChunkEncoderModel load(const std::string& path);

 private:
  ChunkEncoderConfig config_;
  TensorPtr token_emb_;  // V x d_model
  TensorPtr pos_emb_;    // max_len x d_model
  std::vector<EncoderLayer> layers_;
  TensorPtr final_ln_g_, final_ln_b_;
  TensorPtr cls_w_, cls_b_;  // d_model -> 2
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<std::string> flags;
};

struct FinetuneOptions {
  int epochs = 4;
  double lr = 3e-4;
  int batch_size = 16;
  std::uint64_t seed = 1;
};

// Labeled encoded chunk.
struct EncodedChunk {
  TokenSequence seq;
  int label = 0;
};

// Trains on inherited document labels; keeps the best-validation-accuracy
// parameters in the model on return.
TrainReport finetune_chunk_encoder(ChunkEncoderModel& model,
                                   const std::vector<EncodedChunk>& train_set,
                                   const std::vector<EncodedChunk>& val_set,
                                   const FinetuneOptions& opts);

// Embeds every chunk of every document (all splits) in chunk order.
EmbeddingStore embed_corpus(const ChunkEncoderModel& model,
                            const Corpus& corpus, const Vocab& vocab,
                            int chunk_len, int overlap,
                            const std::string& source_hash);

}  // namespace ldoc
