#include "ldoc/chunk_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ldoc/io.hpp"

namespace ldoc {

namespace {
constexpr double kInitSigma = 0.02;

int argmax2(const double* logits) {
  // Tie broken toward class 0.
  return logits[1] > logits[0] ? 1 : 0;
}
}  // namespace

ChunkEncoderModel::ChunkEncoderModel(const ChunkEncoderConfig& config,
                                     std::uint64_t seed)
    : config_(config) {
  if (config.heads < 1 || config.d_model % config.heads != 0)
    throw std::invalid_argument("d_model must be divisible by head count");
  if (config.vocab_size < 5)
    throw std::invalid_argument("vocab_size must cover the reserved tokens");
  Rng rng(seed);
  token_emb_ = Tensor::randn({config.vocab_size, config.d_model}, kInitSigma, rng);
  pos_emb_ = Tensor::randn({config.max_len, config.d_model}, kInitSigma, rng);
  layers_.reserve(static_cast<std::size_t>(config.layers));
  for (int l = 0; l < config.layers; ++l)
    layers_.push_back(
        EncoderLayer::init(config.d_model, config.heads, config.d_ff, rng));
  final_ln_g_ = Tensor::full({1, config.d_model}, 1.0);
  final_ln_g_->set_requires_grad(true);
  final_ln_b_ = Tensor::zeros({1, config.d_model}, true);
  cls_w_ = Tensor::randn({config.d_model, 2}, kInitSigma, rng);
  cls_b_ = Tensor::zeros({1, 2}, true);
}

TensorPtr ChunkEncoderModel::encode(Tape* tape, const TokenSequence& seq,
                                    bool train, Rng& rng) const {
  if (seq.ids.size() != static_cast<std::size_t>(config_.max_len))
    throw std::invalid_argument("token sequence length != max_len");
  auto x = add(tape, embedding_lookup(tape, token_emb_, seq.ids), pos_emb_);
  x = dropout(tape, x, config_.dropout, train, rng);
  for (const auto& layer : layers_)
    x = layer.forward(tape, x, seq.attention_mask, train, config_.dropout, rng);
  return layer_norm(tape, x, final_ln_g_, final_ln_b_);
}

TensorPtr ChunkEncoderModel::logits(Tape* tape, const TokenSequence& seq,
                                    bool train, Rng& rng) const {
  auto h0 = slice_rows(tape, encode(tape, seq, train, rng), 0, 1);
  return add(tape, matmul(tape, h0, cls_w_), cls_b_);
}

std::vector<double> ChunkEncoderModel::extract_cls(
    const TokenSequence& seq) const {
  Rng rng(0);  // unused: dropout is off
  auto h = encode(nullptr, seq, false, rng);
  return {h->data.begin(), h->data.begin() + config_.d_model};
}

NamedParams ChunkEncoderModel::named_params() const {
  NamedParams out;
  out.emplace_back("token_emb", token_emb_);
  out.emplace_back("pos_emb", pos_emb_);
  for (std::size_t l = 0; l < layers_.size(); ++l)
    layers_[l].collect("layer" + std::to_string(l), out);
  out.emplace_back("final_ln_g", final_ln_g_);
  out.emplace_back("final_ln_b", final_ln_b_);
  out.emplace_back("cls_w", cls_w_);
  out.emplace_back("cls_b", cls_b_);
  return out;
}

void ChunkEncoderModel::save(const std::string& path) const {
  auto named = named_params();
  // Config rides along as plain tensors so the checkpoint is self-describing.
  named.emplace_back(
      "config",
      Tensor::from({7}, {static_cast<double>(config_.d_model),
                         static_cast<double>(config_.heads),
                         static_cast<double>(config_.layers),
                         static_cast<double>(config_.d_ff),
                         static_cast<double>(config_.max_len),
                         static_cast<double>(config_.vocab_size),
                         config_.dropout}));
  save_checkpoint(path, named);
}

ChunkEncoderModel ChunkEncoderModel::load(const std::string& path) {
  auto named = load_checkpoint(path);
  auto cfg = find_param(named, "config");
  ChunkEncoderModel m;
  m.config_.d_model = static_cast<int>(cfg->data[0]);
  m.config_.heads = static_cast<int>(cfg->data[1]);
  m.config_.layers = static_cast<int>(cfg->data[2]);
  m.config_.d_ff = static_cast<int>(cfg->data[3]);
  m.config_.max_len = static_cast<int>(cfg->data[4]);
  m.config_.vocab_size = static_cast<int>(cfg->data[5]);
  m.config_.dropout = cfg->data[6];
  m.token_emb_ = find_param(named, "token_emb");
  m.pos_emb_ = find_param(named, "pos_emb");
  m.layers_.resize(static_cast<std::size_t>(m.config_.layers));
  for (std::size_t l = 0; l < m.layers_.size(); ++l) {
    m.layers_[l].d_model = m.config_.d_model;
    m.layers_[l].heads = m.config_.heads;
    m.layers_[l].restore("layer" + std::to_string(l), named);
  }
  m.final_ln_g_ = find_param(named, "final_ln_g");
  m.final_ln_b_ = find_param(named, "final_ln_b");
  m.cls_w_ = find_param(named, "cls_w");
  m.cls_b_ = find_param(named, "cls_b");
  for (const auto& [name, t] : m.named_params()) t->set_requires_grad(true);
  return m;
}

TrainReport finetune_chunk_encoder(ChunkEncoderModel& model,
                                   const std::vector<EncodedChunk>& train_set,
                                   const std::vector<EncodedChunk>& val_set,
                                   const FinetuneOptions& opts) {
  if (train_set.empty())
    throw std::invalid_argument("finetune: empty training set");
  if (opts.epochs < 1) throw std::invalid_argument("finetune: epochs must be >= 1");

  TrainReport report;
  bool all_same = true;
  for (const auto& c : train_set) all_same = all_same && c.label == train_set[0].label;
  if (all_same) report.flags.push_back("degenerate label distribution");

  auto params = model.params();
  AdamState adam;
  adam.lr = opts.lr;
  Rng rng(opts.seed);

  auto eval_accuracy = [&](const std::vector<EncodedChunk>& set) {
    if (set.empty()) return 0.0;
    long correct = 0;
#pragma omp parallel for schedule(dynamic, 8) reduction(+ : correct)
    for (long long i = 0; i < static_cast<long long>(set.size()); ++i) {
      Rng local(0);
      auto lg = model.logits(nullptr, set[static_cast<std::size_t>(i)].seq,
                             false, local);
      correct += argmax2(lg->data.data()) == set[static_cast<std::size_t>(i)].label;
    }
    return static_cast<double>(correct) / static_cast<double>(set.size());
  };

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  NamedParams best;
  report.best_val_accuracy = -1.0;

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    // Fisher-Yates with the run RNG keeps epochs replayable.
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);

    double loss_sum = 0.0;
    long correct = 0;
    Tape tape;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(opts.batch_size));
      tape.clear();
      for (auto& p : params) p->zero_grad();
      std::vector<TensorPtr> rows;
      std::vector<int> targets;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        auto lg = model.logits(&tape, ex.seq, true, rng);
        correct += argmax2(lg->data.data()) == ex.label;
        rows.push_back(lg);
        targets.push_back(ex.label);
      }
      auto logits = concat(&tape, rows, 0);
      auto loss = cross_entropy(&tape, logits, targets);
      loss_sum += loss->data[0] * static_cast<double>(end - start);
      tape.backward(loss);
      adam_step(params, adam);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(train_set.size());
    stats.val_accuracy = eval_accuracy(val_set);
    report.epochs.push_back(stats);

    if (stats.val_accuracy > report.best_val_accuracy) {
      report.best_val_accuracy = stats.val_accuracy;
      report.best_epoch = epoch;
      best.clear();
      for (const auto& [name, t] : model.named_params())
        best.emplace_back(name, Tensor::from(t->shape, t->data));
    }
  }

  // Leave the best-validation parameters in place.
  if (!best.empty())
    for (const auto& [name, t] : model.named_params())
      t->data = find_param(best, name)->data;
  return report;
}

EmbeddingStore embed_corpus(const ChunkEncoderModel& model,
                            const Corpus& corpus, const Vocab& vocab,
                            int chunk_len, int overlap,
                            const std::string& source_hash) {
  EmbeddingStore store;
  store.dim = model.config().d_model;
  store.chunk_len = chunk_len;
  store.overlap = overlap;
  store.max_len = model.config().max_len;
  store.source_hash = source_hash;
  store.docs.resize(corpus.docs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < static_cast<long long>(corpus.docs.size()); ++i) {
    const auto& doc = corpus.docs[static_cast<std::size_t>(i)];
    auto chunks = chunk_document(doc, chunk_len, overlap);
    DocEmbedding de;
    de.doc_id = doc.id;
    de.label = doc.label;
    de.split = doc.split;
    de.chunk_count = static_cast<int>(chunks.size());
    de.vectors.reserve(chunks.size() * static_cast<std::size_t>(store.dim));
    for (const auto& chunk : chunks) {
      auto seq = encode_chunk(chunk, vocab, model.config().max_len);
      auto cls = model.extract_cls(seq);
      de.vectors.insert(de.vectors.end(), cls.begin(), cls.end());
    }
    store.docs[static_cast<std::size_t>(i)] = std::move(de);
  }
  return store;
}

}  // namespace ldoc
