#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ldoc/chunk_encoder.hpp"
#include "ldoc/clusterer.hpp"
#include "ldoc/doc_encoder.hpp"
#include "ldoc/evalx.hpp"
#include "ldoc/reducer.hpp"

namespace ldoc {

// Configuration / usage problems (CLI exit code 1, vs 2 for stage failures).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SyntheticSpec {
  int train_docs = 400;
  int val_docs = 100;
  int test_docs = 100;
  int words_per_doc = 1500;
  double signal_rate = 0.9;
  int topic_groups = 4;
  int words_per_group = 50;
  int section_words = 200;
  std::uint64_t seed = 7;
};

struct GridEntry {
  std::string variant = "alpha";
  std::string head = "encoder";
  int epochs = 1;
};

struct PipelineConfig {
  std::string artifacts = "artifacts";
  std::uint64_t seed = 42;
  std::string corpus_path;  // default: <artifacts>/corpus.jsonl (synth output)

  // chunking
  int chunk_len = 510;
  int overlap = 100;
  int max_len = 128;

  // chunk encoder (Step I)
  ChunkEncoderConfig chunk_encoder;
  int chunk_epochs = 2;
  double chunk_lr = 3e-4;
  int chunk_batch_size = 16;
  int vocab_max_size = 20000;
  int vocab_min_freq = 2;

  // reducer
  UmapConfig reducer;

  // clusterer (defaults 15/10)
  ClusterParams clusterer;

  // doc model (Step II)
  std::string variant = "alpha";
  std::string head = "encoder";
  int max_chunks = 64;
  int d_cluster = 16;
  int d_enc = 64;
  int doc_heads = 4;
  int doc_d_ff = 256;
  int d_rnn = 64;
  double doc_dropout = 0.1;
  int doc_epochs = 1;
  double doc_lr = 1e-3;
  int doc_batch_size = 8;

  std::vector<GridEntry> grid;  // defaults set in parse
  SyntheticSpec synth;

  // Per-stage seed overrides (empty = derived from the global seed).
  std::optional<std::uint64_t> seed_chunk, seed_reducer, seed_doc, seed_synth;

  // Original JSON text; apply_override edits and re-parses it.
  std::string raw_json;

  std::uint64_t stage_seed(const std::string& stage) const;

  static PipelineConfig from_json_file(const std::string& path);
  static PipelineConfig from_json_text(const std::string& text);
  // Dotted-path override, e.g. "doc_model.epochs=3".
  void apply_override(const std::string& key_eq_value);
};

void generate_synthetic(const SyntheticSpec& spec, const std::string& path);

// Stage runner with a replay manifest: each stage records its config-section
// hash and input artifact hashes; unchanged stages are skipped on rerun.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();

  // Stage entry points; `require` makes missing prerequisites an error
  // instead of building them.
  void synth();
  void ingest();
  void train_chunk();
  void embed();
  void reduce();
  void cluster();
  void train_doc();
  std::vector<MetricsRow> evaluate();
  std::vector<MetricsRow> run_all();

  // Ensures every stage up to and including `stage` is current.
  void ensure(const std::string& stage);
  // Errors (naming the missing stage) unless the stage's outputs exist
  // and are current.
  void require(const std::string& stage) const;

  const PipelineConfig& config() const { return config_; }
  std::string artifact(const std::string& name) const;

 private:
  struct Impl;
  PipelineConfig config_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ldoc
