#include "ldoc/doc_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ldoc/evalx.hpp"

namespace ldoc {

namespace {
constexpr double kInitSigma = 0.02;
}

InputSource input_source_from_string(const std::string& s) {
  if (s == "alpha") return InputSource::kAlpha;
  if (s == "beta") return InputSource::kBeta;
  if (s == "alpha_nc") return InputSource::kAlphaNoCluster;
  if (s == "beta_nc") return InputSource::kBetaNoCluster;
  throw std::invalid_argument("unknown variant \"" + s + "\"");
}

std::string to_string(InputSource v) {
  switch (v) {
    case InputSource::kAlpha: return "alpha";
    case InputSource::kBeta: return "beta";
    case InputSource::kAlphaNoCluster: return "alpha_nc";
    case InputSource::kBetaNoCluster: return "beta_nc";
  }
  return "?";
}

HeadKind head_from_string(const std::string& s) {
  if (s == "encoder") return HeadKind::kEncoder;
  if (s == "encoder_bilstm") return HeadKind::kEncoderBiLstm;
  if (s == "bigru_x2") return HeadKind::kBiGruX2;
  if (s == "bilstm_bigru") return HeadKind::kBiLstmBiGru;
  throw std::invalid_argument("unknown head \"" + s + "\"");
}

std::string to_string(HeadKind h) {
  switch (h) {
    case HeadKind::kEncoder: return "encoder";
    case HeadKind::kEncoderBiLstm: return "encoder_bilstm";
    case HeadKind::kBiGruX2: return "bigru_x2";
    case HeadKind::kBiLstmBiGru: return "bilstm_bigru";
  }
  return "?";
}

DocModel::DocModel(const DocModelConfig& config, std::uint64_t seed)
    : config_(config) {
  Rng rng(seed);
  cluster_emb_ = Tensor::randn({config.cluster_count + 2, config.d_cluster},
                               kInitSigma, rng);
  proj_w_ = Tensor::randn({config.d_in + config.d_cluster, config.d_enc},
                          kInitSigma, rng);
  proj_b_ = Tensor::zeros({1, config.d_enc}, true);
  pos_emb_ = Tensor::randn({config.max_chunks, config.d_enc}, kInitSigma, rng);
  encoder_ = EncoderLayer::init(config.d_enc, config.heads, config.d_ff, rng);
  switch (config.head) {
    case HeadKind::kEncoder:
      break;
    case HeadKind::kEncoderBiLstm:
      rnn_.push_back(BiRecurrentLayer::init(BiRecurrentLayer::Kind::kLstm,
                                            config.d_enc, config.d_rnn, rng));
      break;
    case HeadKind::kBiGruX2:
      rnn_.push_back(BiRecurrentLayer::init(BiRecurrentLayer::Kind::kGru,
                                            config.d_enc, config.d_rnn, rng));
      rnn_.push_back(BiRecurrentLayer::init(BiRecurrentLayer::Kind::kGru,
                                            2 * config.d_rnn, config.d_rnn, rng));
      break;
    case HeadKind::kBiLstmBiGru:
      rnn_.push_back(BiRecurrentLayer::init(BiRecurrentLayer::Kind::kLstm,
                                            config.d_enc, config.d_rnn, rng));
      rnn_.push_back(BiRecurrentLayer::init(BiRecurrentLayer::Kind::kGru,
                                            2 * config.d_rnn, config.d_rnn, rng));
      break;
  }
  const int d_pool = rnn_.empty() ? config.d_enc : 2 * config.d_rnn;
  final_ln_g_ = Tensor::full({1, d_pool}, 1.0);
  final_ln_g_->set_requires_grad(true);
  final_ln_b_ = Tensor::zeros({1, d_pool}, true);
  cls_w_ = Tensor::randn({d_pool, 2}, kInitSigma, rng);
  cls_b_ = Tensor::zeros({1, 2}, true);
}

TensorPtr DocModel::forward(Tape* tape, const DocExample& doc, bool train,
                            Rng& rng) const {
  int t_real = 0;
  for (int m : doc.mask) t_real += m != 0;
  if (t_real == 0) throw std::invalid_argument("empty document in batch");
  if (t_real > config_.max_chunks)
    throw std::invalid_argument("document exceeds max_chunks");

  // Real chunks occupy the leading slots; padded slots never enter the
  // graph, so padding cannot perturb the logits.
  auto x = Tensor::from(
      {t_real, config_.d_in},
      {doc.embeddings.begin(),
       doc.embeddings.begin() +
           static_cast<std::size_t>(t_real) * config_.d_in});
  std::vector<int> rows(doc.cluster_rows.begin(),
                        doc.cluster_rows.begin() + t_real);
  auto cf = embedding_lookup(tape, cluster_emb_, rows);
  auto h = add(tape, matmul(tape, concat(tape, {x, cf}, 1), proj_w_), proj_b_);
  h = add(tape, h, slice_rows(tape, pos_emb_, 0, t_real));
  h = dropout(tape, h, config_.dropout, train, rng);
  std::vector<int> ones(static_cast<std::size_t>(t_real), 1);
  h = encoder_.forward(tape, h, ones, train, config_.dropout, rng);

  TensorPtr pooled;
  if (rnn_.empty()) {
    pooled = mean_over_mask(tape, h, ones);
  } else {
    TensorPtr seq = h;
    TensorPtr final_state;
    for (const auto& layer : rnn_) {
      auto out = layer.forward(tape, seq);
      seq = out.sequence;
      final_state = out.final_state;
    }
    pooled = final_state;
  }
  pooled = layer_norm(tape, pooled, final_ln_g_, final_ln_b_);
  return add(tape, matmul(tape, pooled, cls_w_), cls_b_);
}

NamedParams DocModel::named_params() const {
  NamedParams out;
  out.emplace_back("cluster_emb", cluster_emb_);
  out.emplace_back("proj_w", proj_w_);
  out.emplace_back("proj_b", proj_b_);
  out.emplace_back("pos_emb", pos_emb_);
  encoder_.collect("encoder", out);
  for (std::size_t l = 0; l < rnn_.size(); ++l)
    rnn_[l].collect("rnn" + std::to_string(l), out);
  out.emplace_back("final_ln_g", final_ln_g_);
  out.emplace_back("final_ln_b", final_ln_b_);
  out.emplace_back("cls_w", cls_w_);
  out.emplace_back("cls_b", cls_b_);
  return out;
}

void DocModel::save(const std::string& path) const {
  auto named = named_params();
  named.emplace_back(
      "config",
      Tensor::from({11}, {static_cast<double>(static_cast<int>(config_.source)),
                          static_cast<double>(static_cast<int>(config_.head)),
                          static_cast<double>(config_.d_in),
                          static_cast<double>(config_.d_cluster),
                          static_cast<double>(config_.d_enc),
                          static_cast<double>(config_.heads),
                          static_cast<double>(config_.d_ff),
                          static_cast<double>(config_.d_rnn),
                          static_cast<double>(config_.max_chunks),
                          static_cast<double>(config_.cluster_count),
                          config_.dropout}));
  save_checkpoint(path, named);
}

DocModel DocModel::load(const std::string& path) {
  auto named = load_checkpoint(path);
  auto cfg = find_param(named, "config");
  DocModelConfig c;
  c.source = static_cast<InputSource>(static_cast<int>(cfg->data[0]));
  c.head = static_cast<HeadKind>(static_cast<int>(cfg->data[1]));
  c.d_in = static_cast<int>(cfg->data[2]);
  c.d_cluster = static_cast<int>(cfg->data[3]);
  c.d_enc = static_cast<int>(cfg->data[4]);
  c.heads = static_cast<int>(cfg->data[5]);
  c.d_ff = static_cast<int>(cfg->data[6]);
  c.d_rnn = static_cast<int>(cfg->data[7]);
  c.max_chunks = static_cast<int>(cfg->data[8]);
  c.cluster_count = static_cast<int>(cfg->data[9]);
  c.dropout = cfg->data[10];
  DocModel m;
  m.config_ = c;
  m.cluster_emb_ = find_param(named, "cluster_emb");
  m.proj_w_ = find_param(named, "proj_w");
  m.proj_b_ = find_param(named, "proj_b");
  m.pos_emb_ = find_param(named, "pos_emb");
  m.encoder_.d_model = c.d_enc;
  m.encoder_.heads = c.heads;
  m.encoder_.restore("encoder", named);
  int n_rnn = 0;
  switch (c.head) {
    case HeadKind::kEncoder: n_rnn = 0; break;
    case HeadKind::kEncoderBiLstm: n_rnn = 1; break;
    default: n_rnn = 2; break;
  }
  for (int l = 0; l < n_rnn; ++l) {
    BiRecurrentLayer layer;
    layer.kind = (c.head == HeadKind::kBiGruX2 ||
                  (c.head == HeadKind::kBiLstmBiGru && l == 1))
                     ? BiRecurrentLayer::Kind::kGru
                     : BiRecurrentLayer::Kind::kLstm;
    layer.d_in = l == 0 ? c.d_enc : 2 * c.d_rnn;
    layer.d_hidden = c.d_rnn;
    layer.restore("rnn" + std::to_string(l), named);
    m.rnn_.push_back(std::move(layer));
  }
  m.final_ln_g_ = find_param(named, "final_ln_g");
  m.final_ln_b_ = find_param(named, "final_ln_b");
  m.cls_w_ = find_param(named, "cls_w");
  m.cls_b_ = find_param(named, "cls_b");
  for (const auto& [name, t] : m.named_params()) t->set_requires_grad(true);
  return m;
}

std::vector<DocExample> build_doc_examples(
    const EmbeddingStore& store, const ClusterModel* cluster_model,
    const std::vector<int>& fit_labels, const PipelineVariant& variant,
    int max_chunks) {
  const bool use_clusters = variant.uses_clusters();
  if (use_clusters) {
    if (!cluster_model)
      throw std::invalid_argument("cluster variant requires a cluster model");
    if (cluster_model->dim != store.dim)
      throw std::invalid_argument(
          "dimension mismatch: store dim " + std::to_string(store.dim) +
          " vs cluster model dim " + std::to_string(cluster_model->dim));
  }

  std::vector<DocExample> out;
  out.reserve(store.docs.size());
  std::size_t fit_cursor = 0;
  for (const auto& d : store.docs) {
    DocExample ex;
    ex.doc_id = d.doc_id;
    ex.label = d.label;
    ex.split = d.split;
    ex.embeddings.assign(
        static_cast<std::size_t>(max_chunks) * store.dim, 0.0);
    ex.mask.assign(static_cast<std::size_t>(max_chunks), 0);
    ex.cluster_rows.assign(static_cast<std::size_t>(max_chunks),
                           kClusterPadRow);

    const int kept = std::min(d.chunk_count, max_chunks);
    const int first = d.chunk_count - kept;  // keep the LAST max_chunks
    for (int t = 0; t < kept; ++t) {
      const int c = first + t;
      std::copy_n(d.chunk(c, store.dim), store.dim,
                  ex.embeddings.begin() + static_cast<std::size_t>(t) * store.dim);
      ex.mask[static_cast<std::size_t>(t)] = 1;
      int cluster_id = -1;
      if (use_clusters) {
        if (d.split == Split::kTest) {
          std::vector<double> vec(d.chunk(c, store.dim),
                                  d.chunk(c, store.dim) + store.dim);
          cluster_id = cluster_model->assign(vec);
        } else {
          cluster_id = fit_labels.at(fit_cursor + static_cast<std::size_t>(c));
        }
      }
      ex.cluster_rows[static_cast<std::size_t>(t)] =
          cluster_id < 0 ? kClusterNoiseRow : cluster_id + 2;
    }
    if (d.split != Split::kTest)
      fit_cursor += static_cast<std::size_t>(d.chunk_count);
    out.push_back(std::move(ex));
  }
  if (use_clusters && fit_cursor != fit_labels.size())
    throw std::invalid_argument(
        "fit label count does not match train+validation chunk count");
  return out;
}

std::vector<DocBatch> make_batches(const std::vector<DocExample>& examples,
                                   int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<DocBatch> batches;
  for (std::size_t i = 0; i < examples.size();
       i += static_cast<std::size_t>(batch_size)) {
    DocBatch b;
    const std::size_t end =
        std::min(examples.size(), i + static_cast<std::size_t>(batch_size));
    b.docs.assign(examples.begin() + static_cast<std::ptrdiff_t>(i),
                  examples.begin() + static_cast<std::ptrdiff_t>(end));
    batches.push_back(std::move(b));
  }
  return batches;
}

namespace {

int argmax2(const double* logits) { return logits[1] > logits[0] ? 1 : 0; }

void eval_metrics(const DocModel& model, const std::vector<DocExample>& set,
                  DocEpochStats& stats) {
  if (set.empty()) return;
  std::vector<int> preds(set.size()), golds(set.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long long i = 0; i < static_cast<long long>(set.size()); ++i) {
    Rng local(0);
    auto lg = model.forward(nullptr, set[static_cast<std::size_t>(i)], false,
                            local);
    preds[static_cast<std::size_t>(i)] = argmax2(lg->data.data());
    golds[static_cast<std::size_t>(i)] = set[static_cast<std::size_t>(i)].label;
  }
  const auto cm = confusion(preds, golds);
  const auto m = macro_metrics(cm);
  stats.val_accuracy = m.accuracy;
  stats.val_macro_precision = m.macro_precision;
  stats.val_macro_recall = m.macro_recall;
}

}  // namespace

DocTrainReport train_doc_model(DocModel& model,
                               const std::vector<DocExample>& train_set,
                               const std::vector<DocExample>& val_set,
                               const DocTrainOptions& opts) {
  if (train_set.empty())
    throw std::invalid_argument("train_doc_model: empty batch stream");
  if (opts.epochs < 1)
    throw std::invalid_argument("train_doc_model: epochs must be >= 1");

  auto params = model.params();
  AdamState adam;
  adam.lr = opts.lr;
  Rng rng(opts.seed);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  DocTrainReport report;
  report.best_val_accuracy = -1.0;
  NamedParams best;

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);

    double loss_sum = 0.0;
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
        rows.push_back(model.forward(&tape, ex, true, rng));
        targets.push_back(ex.label);
      }
      auto loss = cross_entropy(&tape, concat(&tape, rows, 0), targets);
      loss_sum += loss->data[0] * static_cast<double>(end - start);
      tape.backward(loss);
      adam_step(params, adam);
    }

    DocEpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    eval_metrics(model, val_set, stats);
    report.epochs.push_back(stats);
    if (stats.val_accuracy > report.best_val_accuracy) {
      report.best_val_accuracy = stats.val_accuracy;
      report.best_epoch = epoch;
      best.clear();
      for (const auto& [name, t] : model.named_params())
        best.emplace_back(name, Tensor::from(t->shape, t->data));
    }
  }

  if (!best.empty())
    for (const auto& [name, t] : model.named_params())
      t->data = find_param(best, name)->data;
  return report;
}

std::vector<Prediction> predict(const DocModel& model,
                                const std::vector<DocExample>& examples) {
  std::vector<Prediction> out(examples.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long long i = 0; i < static_cast<long long>(examples.size()); ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    Rng local(0);
    auto lg = model.forward(nullptr, ex, false, local);
    const double z0 = lg->data[0], z1 = lg->data[1];
    const double mx = std::max(z0, z1);
    const double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
    Prediction p;
    p.doc_id = ex.doc_id;
    p.label = argmax2(lg->data.data());
    p.p_accepted = e1 / (e0 + e1);
    out[static_cast<std::size_t>(i)] = p;
  }
  return out;
}

}  // namespace ldoc
