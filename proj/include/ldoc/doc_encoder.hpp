#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ldoc/clusterer.hpp"
#include "ldoc/embedding_store.hpp"
#include "ldoc/transformer.hpp"

namespace ldoc {

enum class InputSource { kAlpha, kBeta, kAlphaNoCluster, kBetaNoCluster };
enum class HeadKind { kEncoder, kEncoderBiLstm, kBiGruX2, kBiLstmBiGru };

InputSource input_source_from_string(const std::string& s);
std::string to_string(InputSource v);
HeadKind head_from_string(const std::string& s);
std::string to_string(HeadKind h);

struct PipelineVariant {
  InputSource source = InputSource::kAlpha;
  HeadKind head = HeadKind::kEncoder;

  bool uses_clusters() const {
    return source == InputSource::kAlpha || source == InputSource::kBeta;
  }
  bool uses_reduced() const {
    return source == InputSource::kBeta || source == InputSource::kBetaNoCluster;
  }
  std::string name() const { return to_string(source) + "-" + to_string(head); }
};

// Cluster-id embedding table rows 0 and 1 are reserved.
constexpr int kClusterNoiseRow = 0;
constexpr int kClusterPadRow = 1;

// One document's Step II input: ordered chunk embeddings (zero-padded to
// max_chunks), position mask, and remapped cluster-table indices.
struct DocExample {
  std::string doc_id;
  int label = 0;
  Split split = Split::kTrain;
  std::vector<double> embeddings;  // max_chunks x d_in
  std::vector<int> mask;           // 1 for real chunk slots
  std::vector<int> cluster_rows;   // table indices, kClusterPadRow on padding
};

struct DocBatch {
  std::vector<DocExample> docs;
};

struct DocModelConfig {
  InputSource source = InputSource::kAlpha;
  HeadKind head = HeadKind::kEncoder;
  int d_in = 64;
  int d_cluster = 16;
  int d_enc = 64;
  int heads = 4;
  int d_ff = 256;
  int d_rnn = 64;
  int max_chunks = 64;
  int cluster_count = 0;  // C; table has C+2 rows
  double dropout = 0.1;
};

class DocModel {
 public:
  DocModel() = default;
  DocModel(const DocModelConfig& config, std::uint64_t seed);

  const DocModelConfig& config() const { return config_; }

  // Logits (1 x 2) for one document.
  TensorPtr forward(Tape* tape, const DocExample& doc, bool train,
                    Rng& rng) const;

  NamedParams named_params() const;
  std::vector<TensorPtr> params() const { return param_list(named_params()); }
  TensorPtr cluster_table() const { return cluster_emb_; }

  void save(const std::string& path) const;
  static DocModel load(const std::string& path);

 private:
  DocModelConfig config_;
  TensorPtr cluster_emb_;  // (C+2) x d_cluster
  TensorPtr proj_w_, proj_b_;  // (d_in + d_cluster) -> d_enc
  TensorPtr pos_emb_;          // max_chunks x d_enc
  EncoderLayer encoder_;
  std::vector<BiRecurrentLayer> rnn_;
  TensorPtr final_ln_g_, final_ln_b_;
  TensorPtr cls_w_, cls_b_;
};

// Builds per-document examples from a store: documents longer than
// max_chunks keep their LAST max_chunks chunks; cluster ids are remapped
// noise -1 -> 0, cluster c -> c+2, padding -> 1. Train/validation chunks
// take fit-time labels in store order; test chunks go through
// model->assign(). No-cluster variants emit all-noise ids.
std::vector<DocExample> build_doc_examples(
    const EmbeddingStore& store, const ClusterModel* cluster_model,
    const std::vector<int>& fit_labels, const PipelineVariant& variant,
    int max_chunks);

std::vector<DocBatch> make_batches(const std::vector<DocExample>& examples,
                                   int batch_size);

struct DocEpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_macro_precision = 0.0;
  double val_macro_recall = 0.0;
};

struct DocTrainReport {
  std::vector<DocEpochStats> epochs;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
};

struct DocTrainOptions {
  int epochs = 3;
  double lr = 1e-3;
  int batch_size = 8;
  std::uint64_t seed = 1;
};

DocTrainReport train_doc_model(DocModel& model,
                               const std::vector<DocExample>& train_set,
                               const std::vector<DocExample>& val_set,
                               const DocTrainOptions& opts);

struct Prediction {
  std::string doc_id;
  int label = 0;       // argmax; ties break toward 0 ("rejected")
  double p_accepted = 0.0;
};

std::vector<Prediction> predict(const DocModel& model,
                                const std::vector<DocExample>& examples);

}  // namespace ldoc
