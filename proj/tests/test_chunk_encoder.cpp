#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ldoc/chunk_encoder.hpp"

using namespace ldoc;

namespace {

ChunkEncoderConfig small_config() {
  ChunkEncoderConfig cfg;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.d_ff = 32;
  cfg.max_len = 12;
  cfg.vocab_size = 40;
  return cfg;
}

TokenSequence make_seq(const std::vector<int>& word_ids, int max_len) {
  TokenSequence seq;
  seq.ids.push_back(kClsId);
  for (int id : word_ids) seq.ids.push_back(id);
  seq.ids.push_back(kSepId);
  while (static_cast<int>(seq.ids.size()) < max_len) seq.ids.push_back(kPadId);
  for (int id : seq.ids) seq.attention_mask.push_back(id != kPadId ? 1 : 0);
  return seq;
}

// Two separable token populations; label 1 chunks contain token 5.
std::vector<EncodedChunk> make_chunks(int count, int max_len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EncodedChunk> out;
  for (int i = 0; i < count; ++i) {
    const int label = i % 2;
    std::vector<int> words;
    for (int w = 0; w < max_len - 2; ++w) {
      if (label == 1 && rng.uniform() < 0.4)
        words.push_back(5);
      else
        words.push_back(6 + static_cast<int>(rng.uniform_int(20)));
    }
    out.push_back({make_seq(words, max_len), label});
  }
  return out;
}

}  // namespace

TEST_CASE("config validation: divisibility and vocab size") {
  auto cfg = small_config();
  cfg.heads = 3;
  CHECK_THROWS(ChunkEncoderModel(cfg, 1));
  cfg = small_config();
  cfg.vocab_size = 4;
  CHECK_THROWS(ChunkEncoderModel(cfg, 1));
}

TEST_CASE("extract_cls has length d_model and ignores pad token values") {
  const auto cfg = small_config();
  ChunkEncoderModel model(cfg, 3);
  auto seq = make_seq({7, 8, 9}, cfg.max_len);
  const auto a = model.extract_cls(seq);
  CHECK(a.size() == static_cast<std::size_t>(cfg.d_model));
  // Changing which token id sits in a padded slot must not matter.
  for (std::size_t t = 0; t < seq.ids.size(); ++t)
    if (seq.attention_mask[t] == 0) seq.ids[t] = 17;
  const auto b = model.extract_cls(seq);
  CHECK(a == b);
}

TEST_CASE("finetune learns a separable chunk set and keeps the best epoch") {
  const auto cfg = small_config();
  ChunkEncoderModel model(cfg, 5);
  const auto train = make_chunks(120, cfg.max_len, 1);
  const auto val = make_chunks(40, cfg.max_len, 2);
  FinetuneOptions opts;
  opts.epochs = 4;
  opts.lr = 3e-3;
  opts.batch_size = 8;
  opts.seed = 9;
  const auto report = finetune_chunk_encoder(model, train, val, opts);
  REQUIRE(report.epochs.size() == 4);
  CHECK(report.best_val_accuracy >= 0.9);
  CHECK(report.best_epoch >= 1);
  // Training loss decreases over the first epochs on separable data.
  CHECK(report.epochs[2].train_loss < report.epochs[0].train_loss);
}

TEST_CASE("finetune input validation and degenerate label flag") {
  const auto cfg = small_config();
  ChunkEncoderModel model(cfg, 5);
  const auto val = make_chunks(8, cfg.max_len, 2);
  FinetuneOptions opts;
  CHECK_THROWS(finetune_chunk_encoder(model, {}, val, opts));
  auto train = make_chunks(16, cfg.max_len, 1);
  opts.epochs = 0;
  CHECK_THROWS(finetune_chunk_encoder(model, train, val, opts));
  opts.epochs = 1;
  for (auto& c : train) c.label = 1;
  ChunkEncoderModel model2(cfg, 5);
  const auto report = finetune_chunk_encoder(model2, train, val, opts);
  REQUIRE(!report.flags.empty());
  CHECK(report.flags[0].find("degenerate") != std::string::npos);
}

TEST_CASE("model round-trips through save/load") {
  const auto cfg = small_config();
  ChunkEncoderModel model(cfg, 11);
  const std::string path = "chunk_encoder_roundtrip.bin";
  model.save(path);
  const auto loaded = ChunkEncoderModel::load(path);
  CHECK(loaded.config().d_model == cfg.d_model);
  const auto seq = make_seq({7, 8}, cfg.max_len);
  CHECK(loaded.extract_cls(seq) == model.extract_cls(seq));
  std::remove(path.c_str());
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto cfg = small_config();
  const auto train = make_chunks(40, cfg.max_len, 1);
  const auto val = make_chunks(16, cfg.max_len, 2);
  FinetuneOptions opts;
  opts.epochs = 2;
  opts.seed = 3;
  ChunkEncoderModel m1(cfg, 7), m2(cfg, 7);
  const auto r1 = finetune_chunk_encoder(m1, train, val, opts);
  const auto r2 = finetune_chunk_encoder(m2, train, val, opts);
  CHECK(r1.epochs[1].train_loss == r2.epochs[1].train_loss);
  const auto seq = make_seq({9}, cfg.max_len);
  CHECK(m1.extract_cls(seq) == m2.extract_cls(seq));
}

TEST_CASE("embed_corpus emits one vector per chunk in order") {
  Corpus corpus;
  for (int d = 0; d < 3; ++d) {
    Document doc;
    doc.id = "d" + std::to_string(d);
    for (int w = 0; w < 25; ++w) doc.text += "tok" + std::to_string(w % 10) + " ";
    doc.label = d % 2;
    doc.split = d == 2 ? Split::kTest : Split::kTrain;
    corpus.docs.push_back(doc);
  }
  Vocab vocab;
  for (int w = 0; w < 10; ++w) vocab.add("tok" + std::to_string(w));
  auto cfg = small_config();
  cfg.vocab_size = vocab.size();
  ChunkEncoderModel model(cfg, 13);
  const auto store = embed_corpus(model, corpus, vocab, 10, 2, "hash");
  REQUIRE(store.docs.size() == 3);
  CHECK(store.dim == cfg.d_model);
  CHECK(store.source_hash == "hash");
  // 25 words, chunk_len 10, overlap 2 -> stride 8 -> chunks at 0, 8, 16 (24?).
  const auto chunks = chunk_document(corpus.docs[0], 10, 2);
  CHECK(store.docs[0].chunk_count == static_cast<int>(chunks.size()));
  CHECK(store.docs[0].vectors.size() ==
        static_cast<std::size_t>(store.docs[0].chunk_count) * cfg.d_model);
  CHECK(store.total_chunks() == 3 * chunks.size());
}
