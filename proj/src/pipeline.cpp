#include "ldoc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ldoc/io.hpp"
#include "ldoc/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ldoc {

namespace {

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok)
      throw ConfigError("unknown config key \"" +
                        (section.empty() ? key : section + "." + key) + "\"");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& tag) {
  return Rng::mix(seed ^ io::fnv1a64(tag.data(), tag.size()));
}

}  // namespace

std::uint64_t PipelineConfig::stage_seed(const std::string& stage) const {
  if (stage == "synth" && seed_synth) return *seed_synth;
  if (stage == "train_chunk" && seed_chunk) return *seed_chunk;
  if (stage == "reduce" && seed_reducer) return *seed_reducer;
  if (stage == "train_doc" && seed_doc) return *seed_doc;
  return mix_seed(seed, stage);
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "",
             {"artifacts", "seed", "seeds", "corpus", "chunking",
              "chunk_encoder", "reducer", "clusterer", "doc_model", "grid",
              "synth"});
  PipelineConfig c;
  c.raw_json = text;
  get_if(j, "artifacts", c.artifacts);
  get_if(j, "seed", c.seed);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    check_keys(s, "seeds", {"synth", "chunk_encoder", "reducer", "doc_model"});
    if (s.contains("synth")) c.seed_synth = s.at("synth").get<std::uint64_t>();
    if (s.contains("chunk_encoder"))
      c.seed_chunk = s.at("chunk_encoder").get<std::uint64_t>();
    if (s.contains("reducer"))
      c.seed_reducer = s.at("reducer").get<std::uint64_t>();
    if (s.contains("doc_model"))
      c.seed_doc = s.at("doc_model").get<std::uint64_t>();
  }
  if (j.contains("corpus")) {
    const auto& s = j.at("corpus");
    check_keys(s, "corpus", {"path"});
    get_if(s, "path", c.corpus_path);
  }
  if (j.contains("chunking")) {
    const auto& s = j.at("chunking");
    check_keys(s, "chunking", {"chunk_len", "overlap", "max_len"});
    get_if(s, "chunk_len", c.chunk_len);
    get_if(s, "overlap", c.overlap);
    get_if(s, "max_len", c.max_len);
  }
  if (j.contains("chunk_encoder")) {
    const auto& s = j.at("chunk_encoder");
    check_keys(s, "chunk_encoder",
               {"d_model", "heads", "layers", "d_ff", "dropout", "epochs",
                "lr", "batch_size", "vocab_max_size", "vocab_min_freq"});
    get_if(s, "d_model", c.chunk_encoder.d_model);
    get_if(s, "heads", c.chunk_encoder.heads);
    get_if(s, "layers", c.chunk_encoder.layers);
    get_if(s, "d_ff", c.chunk_encoder.d_ff);
    get_if(s, "dropout", c.chunk_encoder.dropout);
    get_if(s, "epochs", c.chunk_epochs);
    get_if(s, "lr", c.chunk_lr);
    get_if(s, "batch_size", c.chunk_batch_size);
    get_if(s, "vocab_max_size", c.vocab_max_size);
    get_if(s, "vocab_min_freq", c.vocab_min_freq);
  }
  if (j.contains("reducer")) {
    const auto& s = j.at("reducer");
    check_keys(s, "reducer",
               {"k", "out_dim", "hidden", "epochs", "negative_rate",
                "samples_per_epoch", "batch_edges", "lr"});
    get_if(s, "k", c.reducer.k);
    get_if(s, "out_dim", c.reducer.out_dim);
    get_if(s, "hidden", c.reducer.hidden);
    get_if(s, "epochs", c.reducer.epochs);
    get_if(s, "negative_rate", c.reducer.negative_rate);
    get_if(s, "samples_per_epoch", c.reducer.samples_per_epoch);
    get_if(s, "batch_edges", c.reducer.batch_edges);
    get_if(s, "lr", c.reducer.lr);
  }
  if (j.contains("clusterer")) {
    const auto& s = j.at("clusterer");
    check_keys(s, "clusterer", {"min_cluster_size", "min_samples"});
    get_if(s, "min_cluster_size", c.clusterer.min_cluster_size);
    get_if(s, "min_samples", c.clusterer.min_samples);
  }
  if (j.contains("doc_model")) {
    const auto& s = j.at("doc_model");
    check_keys(s, "doc_model",
               {"variant", "head", "max_chunks", "d_cluster", "d_enc",
                "heads", "d_ff", "d_rnn", "dropout", "epochs", "lr",
                "batch_size"});
    get_if(s, "variant", c.variant);
    get_if(s, "head", c.head);
    get_if(s, "max_chunks", c.max_chunks);
    get_if(s, "d_cluster", c.d_cluster);
    get_if(s, "d_enc", c.d_enc);
    get_if(s, "heads", c.doc_heads);
    get_if(s, "d_ff", c.doc_d_ff);
    get_if(s, "d_rnn", c.d_rnn);
    get_if(s, "dropout", c.doc_dropout);
    get_if(s, "epochs", c.doc_epochs);
    get_if(s, "lr", c.doc_lr);
    get_if(s, "batch_size", c.doc_batch_size);
  }
  if (j.contains("grid")) {
    for (const auto& e : j.at("grid")) {
      check_keys(e, "grid[]", {"variant", "head", "epochs"});
      GridEntry g;
      get_if(e, "variant", g.variant);
      get_if(e, "head", g.head);
      get_if(e, "epochs", g.epochs);
      c.grid.push_back(g);
    }
  }
  if (c.grid.empty()) {
    // Epoch conventions: 1 for the alpha/beta cluster variants, 3 for the
    // plain encoder and encoder+bilstm heads.
    c.grid = {{"alpha", "encoder", 1},
              {"beta", "encoder", 1},
              {"alpha_nc", "encoder", 3},
              {"alpha", "encoder_bilstm", 3}};
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    check_keys(s, "synth",
               {"train_docs", "val_docs", "test_docs", "words_per_doc",
                "signal_rate", "topic_groups", "words_per_group",
                "section_words", "seed"});
    get_if(s, "train_docs", c.synth.train_docs);
    get_if(s, "val_docs", c.synth.val_docs);
    get_if(s, "test_docs", c.synth.test_docs);
    get_if(s, "words_per_doc", c.synth.words_per_doc);
    get_if(s, "signal_rate", c.synth.signal_rate);
    get_if(s, "topic_groups", c.synth.topic_groups);
    get_if(s, "words_per_group", c.synth.words_per_group);
    get_if(s, "section_words", c.synth.section_words);
    get_if(s, "seed", c.synth.seed);
  }
  // Validate cross-cutting constraints early.
  input_source_from_string(c.variant);
  head_from_string(c.head);
  for (const auto& g : c.grid) {
    input_source_from_string(g.variant);
    head_from_string(g.head);
  }
  if (c.overlap < 0 || c.overlap >= c.chunk_len)
    throw ConfigError("chunking requires 0 <= overlap < chunk_len");
  return c;
}

void PipelineConfig::apply_override(const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " +
                      key_eq_value);
  const std::string path = key_eq_value.substr(0, eq);
  const std::string value = key_eq_value.substr(eq + 1);
  json j = raw_json.empty() ? json::object() : json::parse(raw_json);
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad override key: " + path);
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::exception&) {
        parsed = value;  // plain string
      }
      (*node)[part] = parsed;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
  *this = from_json_text(j.dump());
}

void generate_synthetic(const SyntheticSpec& spec, const std::string& path) {
  if (spec.signal_rate <= 0.0 || spec.signal_rate >= 1.0)
    throw ConfigError("synth signal_rate must be in (0, 1)");
  if (spec.train_docs < 2 || spec.val_docs < 2 || spec.test_docs < 2)
    throw ConfigError("synth requires at least 2 documents per split");
  Rng rng(spec.seed);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write corpus: " + path);

  const std::vector<std::pair<std::string, int>> splits = {
      {"train", spec.train_docs},
      {"validation", spec.val_docs},
      {"test", spec.test_docs}};
  for (const auto& [split, count] : splits) {
    for (int d = 0; d < count; ++d) {
      const int label = d % 2;  // both classes in every split
      std::string text;
      int words = 0;
      while (words < spec.words_per_doc) {
        // One topical section; signal-bearing sections sprinkle the
        // class-indicative token so chunk supervision stays noisy.
        const int group =
            static_cast<int>(rng.uniform_int(
                static_cast<std::uint64_t>(spec.topic_groups)));
        const bool signal = rng.uniform() < spec.signal_rate;
        const int section =
            std::min(spec.section_words, spec.words_per_doc - words);
        for (int w = 0; w < section; ++w) {
          if (signal && rng.uniform() < 0.2) {
            text += label == 1 ? "grantword " : "denyword ";
          } else {
            text += "t" + std::to_string(group) + "w" +
                    std::to_string(rng.uniform_int(
                        static_cast<std::uint64_t>(spec.words_per_group))) +
                    " ";
          }
        }
        words += section;
      }
      json j;
      j["id"] = split + "-" + std::to_string(d);
      j["text"] = text;
      j["label"] = label == 1 ? "accepted" : "rejected";
      j["split"] = split;
      os << j.dump() << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Stage runner

struct Pipeline::Impl {
  json manifest = json::object();
  int lock_fd = -1;
  std::string lock_path;
};

namespace {

const std::vector<std::string> kStageOrder = {
    "synth",   "ingest",  "train_chunk", "embed",
    "reduce",  "cluster", "train_doc",   "evaluate"};

std::string hash_of_json(const json& j) {
  const std::string s = j.dump();
  return io::hex64(io::fnv1a64(s.data(), s.size()));
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  fs::create_directories(config_.artifacts);
  impl_->lock_path = artifact(".lock");
  std::error_code ec;
  if (fs::exists(impl_->lock_path))
    throw ConfigError("artifact directory " + config_.artifacts +
                      " is locked by another pipeline invocation");
  std::ofstream lock(impl_->lock_path);
  lock << "locked\n";
  const std::string mpath = artifact("manifest.json");
  if (fs::exists(mpath)) {
    std::ifstream is(mpath);
    try {
      impl_->manifest = json::parse(is);
    } catch (const json::exception&) {
      impl_->manifest = json::object();
    }
  }
}

Pipeline::~Pipeline() {
  std::error_code ec;
  fs::remove(impl_->lock_path, ec);
}

std::string Pipeline::artifact(const std::string& name) const {
  return (fs::path(config_.artifacts) / name).string();
}

namespace {

struct StageSpec {
  json config_section;
  std::vector<std::string> inputs;   // artifact paths
  std::vector<std::string> outputs;  // artifact paths
};

}  // namespace

// Per-stage config sections and artifact dependencies.
struct StageTable {
  const PipelineConfig& c;
  const Pipeline& p;

  std::string corpus_path() const {
    return c.corpus_path.empty() ? p.artifact("corpus.jsonl") : c.corpus_path;
  }
  bool uses_synth() const { return c.corpus_path.empty(); }

  bool grid_needs(bool reduced, bool clustered) const {
    auto check = [&](const std::string& v) {
      const auto src = input_source_from_string(v);
      PipelineVariant pv{src, HeadKind::kEncoder};
      if (reduced && pv.uses_reduced()) return true;
      if (clustered && pv.uses_clusters()) return true;
      return false;
    };
    if (check(c.variant)) return true;
    for (const auto& g : c.grid)
      if (check(g.variant)) return true;
    return false;
  }

  StageSpec get(const std::string& stage) const {
    StageSpec s;
    if (stage == "synth") {
      s.config_section = {{"train_docs", c.synth.train_docs},
                          {"val_docs", c.synth.val_docs},
                          {"test_docs", c.synth.test_docs},
                          {"words_per_doc", c.synth.words_per_doc},
                          {"signal_rate", c.synth.signal_rate},
                          {"topic_groups", c.synth.topic_groups},
                          {"words_per_group", c.synth.words_per_group},
                          {"section_words", c.synth.section_words},
                          {"seed", c.stage_seed("synth")}};
      if (uses_synth()) s.outputs = {p.artifact("corpus.jsonl")};
    } else if (stage == "ingest") {
      s.config_section = {{"vocab_max_size", c.vocab_max_size},
                          {"vocab_min_freq", c.vocab_min_freq}};
      s.inputs = {corpus_path()};
      s.outputs = {p.artifact("vocab.bin")};
    } else if (stage == "train_chunk") {
      s.config_section = {{"d_model", c.chunk_encoder.d_model},
                          {"heads", c.chunk_encoder.heads},
                          {"layers", c.chunk_encoder.layers},
                          {"d_ff", c.chunk_encoder.d_ff},
                          {"dropout", c.chunk_encoder.dropout},
                          {"chunk_len", c.chunk_len},
                          {"overlap", c.overlap},
                          {"max_len", c.max_len},
                          {"epochs", c.chunk_epochs},
                          {"lr", c.chunk_lr},
                          {"batch_size", c.chunk_batch_size},
                          {"seed", c.stage_seed("train_chunk")}};
      s.inputs = {corpus_path(), p.artifact("vocab.bin")};
      s.outputs = {p.artifact("chunk_encoder.ckpt"),
                   p.artifact("chunk_train_report.json")};
    } else if (stage == "embed") {
      s.config_section = {{"chunk_len", c.chunk_len}, {"overlap", c.overlap}};
      s.inputs = {corpus_path(), p.artifact("vocab.bin"),
                  p.artifact("chunk_encoder.ckpt")};
      s.outputs = {p.artifact("embeddings.bin")};
    } else if (stage == "reduce") {
      s.config_section = {{"k", c.reducer.k},
                          {"out_dim", c.reducer.out_dim},
                          {"hidden", c.reducer.hidden},
                          {"epochs", c.reducer.epochs},
                          {"negative_rate", c.reducer.negative_rate},
                          {"samples_per_epoch", c.reducer.samples_per_epoch},
                          {"batch_edges", c.reducer.batch_edges},
                          {"lr", c.reducer.lr},
                          {"seed", c.stage_seed("reduce")}};
      s.inputs = {p.artifact("embeddings.bin")};
      s.outputs = {p.artifact("pumap.ckpt"),
                   p.artifact("embeddings_reduced.bin")};
    } else if (stage == "cluster") {
      const bool full = grid_needs(false, true) &&
                        (variant_uses_full_clusters());
      const bool reduced = grid_needs(true, true);
      s.config_section = {{"min_cluster_size", c.clusterer.min_cluster_size},
                          {"min_samples", c.clusterer.min_samples},
                          {"full", full},
                          {"reduced", reduced}};
      s.inputs = {p.artifact("embeddings.bin")};
      if (reduced) s.inputs.push_back(p.artifact("embeddings_reduced.bin"));
      if (full) s.outputs.push_back(p.artifact("cluster_full.bin"));
      if (reduced) s.outputs.push_back(p.artifact("cluster_reduced.bin"));
    } else if (stage == "train_doc") {
      s.config_section = doc_section(c.variant, c.head, c.doc_epochs);
      s.inputs = doc_inputs(c.variant);
      s.outputs = {p.artifact("doc_" + c.variant + "_" + c.head + ".ckpt")};
    } else if (stage == "evaluate") {
      json grid = json::array();
      for (const auto& g : c.grid)
        grid.push_back({{"variant", g.variant},
                        {"head", g.head},
                        {"epochs", g.epochs}});
      s.config_section = {{"grid", grid},
                          {"doc", doc_section("", "", 0)},
                          {"seed", c.stage_seed("train_doc")}};
      s.inputs = {p.artifact("embeddings.bin")};
      if (grid_needs(true, false))
        s.inputs.push_back(p.artifact("embeddings_reduced.bin"));
      if (grid_needs(false, true) && variant_uses_full_clusters())
        s.inputs.push_back(p.artifact("cluster_full.bin"));
      if (grid_needs(true, true))
        s.inputs.push_back(p.artifact("cluster_reduced.bin"));
      s.outputs = {p.artifact("results.jsonl"), p.artifact("results.txt")};
    } else {
      throw std::invalid_argument("unknown stage \"" + stage + "\"");
    }
    return s;
  }

  bool variant_uses_full_clusters() const {
    auto is_full_cluster = [](const std::string& v) {
      return input_source_from_string(v) == InputSource::kAlpha;
    };
    if (is_full_cluster(c.variant)) return true;
    for (const auto& g : c.grid)
      if (is_full_cluster(g.variant)) return true;
    return false;
  }

  json doc_section(const std::string& variant, const std::string& head,
                   int epochs) const {
    return {{"variant", variant},
            {"head", head},
            {"max_chunks", c.max_chunks},
            {"d_cluster", c.d_cluster},
            {"d_enc", c.d_enc},
            {"heads", c.doc_heads},
            {"d_ff", c.doc_d_ff},
            {"d_rnn", c.d_rnn},
            {"dropout", c.doc_dropout},
            {"epochs", epochs},
            {"lr", c.doc_lr},
            {"batch_size", c.doc_batch_size},
            {"seed", c.stage_seed("train_doc")}};
  }

  std::vector<std::string> doc_inputs(const std::string& variant) const {
    const auto src = input_source_from_string(variant);
    PipelineVariant pv{src, HeadKind::kEncoder};
    std::vector<std::string> in;
    in.push_back(pv.uses_reduced() ? p.artifact("embeddings_reduced.bin")
                                   : p.artifact("embeddings.bin"));
    if (pv.uses_clusters())
      in.push_back(pv.uses_reduced() ? p.artifact("cluster_reduced.bin")
                                     : p.artifact("cluster_full.bin"));
    return in;
  }
};

namespace {

bool outputs_exist(const StageSpec& s) {
  for (const auto& o : s.outputs)
    if (!fs::exists(o)) return false;
  return true;
}

json input_hashes(const StageSpec& s) {
  json h = json::object();
  for (const auto& in : s.inputs) {
    if (!fs::exists(in)) return json();  // unsatisfiable
    h[in] = io::hex64(io::hash_file(in));
  }
  return h;
}

}  // namespace

void Pipeline::ensure(const std::string& stage) {
  StageTable table{config_, *this};
  for (const auto& st : kStageOrder) {
    if (st == "synth" && !table.uses_synth()) {
      if (!fs::exists(table.corpus_path()))
        throw ConfigError("corpus file not found: " + table.corpus_path());
      if (st == stage) return;
      continue;
    }
    const auto spec = table.get(st);
    const std::string chash = hash_of_json(spec.config_section);
    const auto ihashes = input_hashes(spec);
    bool current = false;
    if (!ihashes.is_null() && outputs_exist(spec) &&
        impl_->manifest.contains(st)) {
      const auto& rec = impl_->manifest.at(st);
      current = rec.value("config_hash", "") == chash &&
                rec.value("inputs", json()) == ihashes;
    }
    if (!current) {
      if (st == "synth") synth();
      else if (st == "ingest") ingest();
      else if (st == "train_chunk") train_chunk();
      else if (st == "embed") embed();
      else if (st == "reduce") reduce();
      else if (st == "cluster") cluster();
      else if (st == "train_doc") train_doc();
      else if (st == "evaluate") evaluate();
    }
    if (st == stage) return;
  }
  throw std::invalid_argument("unknown stage \"" + stage + "\"");
}

void Pipeline::require(const std::string& stage) const {
  StageTable table{config_, *this};
  if (stage == "synth" && !table.uses_synth()) {
    if (!fs::exists(table.corpus_path()))
      throw ConfigError("corpus file not found: " + table.corpus_path());
    return;
  }
  const auto spec = table.get(stage);
  for (const auto& o : spec.outputs)
    if (!fs::exists(o))
      throw ConfigError("missing artifact " + o + " — run stage \"" + stage +
                        "\" first" +
                        (stage == "reduce" ? " (missing reduced embeddings)"
                                           : ""));
  const std::string chash = hash_of_json(spec.config_section);
  const auto ihashes = input_hashes(spec);
  if (impl_->manifest.contains(stage)) {
    const auto& rec = impl_->manifest.at(stage);
    if (rec.value("config_hash", "") != chash ||
        rec.value("inputs", json()) != ihashes)
      throw ConfigError("stale artifact(s) for stage \"" + stage +
                        "\" — re-run stage \"" + stage + "\"");
  }
}

// Records a completed stage and persists the manifest.
static void record_stage(json& manifest, const std::string& mpath,
                         const std::string& stage, const StageSpec& spec) {
  json rec;
  rec["config_hash"] = hash_of_json(spec.config_section);
  rec["inputs"] = input_hashes(spec);
  rec["outputs"] = spec.outputs;
  manifest[stage] = rec;
  std::ofstream os(mpath);
  os << manifest.dump(2) << "\n";
}

void Pipeline::synth() {
  StageTable table{config_, *this};
  if (!table.uses_synth())
    throw ConfigError("an external corpus path is configured; synth is not used");
  SyntheticSpec spec = config_.synth;
  spec.seed = config_.stage_seed("synth");
  generate_synthetic(spec, artifact("corpus.jsonl"));
  record_stage(impl_->manifest, artifact("manifest.json"), "synth",
               table.get("synth"));
}

void Pipeline::ingest() {
  StageTable table{config_, *this};
  const auto corpus = load_corpus(table.corpus_path());
  const auto vocab =
      build_vocab(corpus, config_.vocab_max_size, config_.vocab_min_freq);
  vocab.save(artifact("vocab.bin"));
  record_stage(impl_->manifest, artifact("manifest.json"), "ingest",
               table.get("ingest"));
}

void Pipeline::train_chunk() {
  StageTable table{config_, *this};
  const auto corpus = load_corpus(table.corpus_path());
  const auto vocab = Vocab::load(artifact("vocab.bin"));

  ChunkEncoderConfig cfg = config_.chunk_encoder;
  cfg.max_len = config_.max_len;
  cfg.vocab_size = vocab.size();
  ChunkEncoderModel model(cfg, config_.stage_seed("train_chunk"));

  std::vector<EncodedChunk> train_set, val_set;
  for (const auto& doc : corpus.docs) {
    if (doc.split == Split::kTest) continue;
    for (const auto& chunk :
         chunk_document(doc, config_.chunk_len, config_.overlap)) {
      EncodedChunk ec{encode_chunk(chunk, vocab, cfg.max_len), chunk.label};
      (doc.split == Split::kTrain ? train_set : val_set).push_back(std::move(ec));
    }
  }
  FinetuneOptions opts;
  opts.epochs = config_.chunk_epochs;
  opts.lr = config_.chunk_lr;
  opts.batch_size = config_.chunk_batch_size;
  opts.seed = config_.stage_seed("train_chunk") + 1;
  const auto report = finetune_chunk_encoder(model, train_set, val_set, opts);
  model.save(artifact("chunk_encoder.ckpt"));

  json jr;
  jr["best_epoch"] = report.best_epoch;
  jr["best_val_accuracy"] = report.best_val_accuracy;
  jr["flags"] = report.flags;
  jr["epochs"] = json::array();
  for (const auto& e : report.epochs)
    jr["epochs"].push_back({{"epoch", e.epoch},
                            {"train_loss", e.train_loss},
                            {"train_accuracy", e.train_accuracy},
                            {"val_accuracy", e.val_accuracy}});
  std::ofstream(artifact("chunk_train_report.json")) << jr.dump(2) << "\n";
  record_stage(impl_->manifest, artifact("manifest.json"), "train_chunk",
               table.get("train_chunk"));
}

void Pipeline::embed() {
  StageTable table{config_, *this};
  const auto corpus = load_corpus(table.corpus_path());
  const auto vocab = Vocab::load(artifact("vocab.bin"));
  const std::string ckpt = artifact("chunk_encoder.ckpt");
  if (!fs::exists(ckpt))
    throw ConfigError("missing chunk encoder checkpoint — run train-chunk first");
  const auto model = ChunkEncoderModel::load(ckpt);
  auto store = embed_corpus(model, corpus, vocab, config_.chunk_len,
                            config_.overlap, io::hex64(io::hash_file(ckpt)));
  store.save(artifact("embeddings.bin"));
  record_stage(impl_->manifest, artifact("manifest.json"), "embed",
               table.get("embed"));
}

void Pipeline::reduce() {
  StageTable table{config_, *this};
  auto store = EmbeddingStore::load(artifact("embeddings.bin"));
  UmapConfig cfg = config_.reducer;
  cfg.seed = config_.stage_seed("reduce");
  const auto fit_store =
      filter_splits(store, {Split::kTrain, Split::kValidation});
  const auto model = fit_pumap(fit_store, cfg);
  model.save(artifact("pumap.ckpt"));
  reduce_store(model, store).save(artifact("embeddings_reduced.bin"));
  record_stage(impl_->manifest, artifact("manifest.json"), "reduce",
               table.get("reduce"));
}

void Pipeline::cluster() {
  StageTable table{config_, *this};
  const bool want_full =
      table.grid_needs(false, true) && table.variant_uses_full_clusters();
  const bool want_reduced = table.grid_needs(true, true);
  auto fit_on = [&](const std::string& store_path, const std::string& out) {
    const auto store = filter_splits(EmbeddingStore::load(store_path),
                                     {Split::kTrain, Split::kValidation});
    auto [model, assignment] = fit_hdbscan(store, config_.clusterer);
    model.save(out);
  };
  if (want_full) fit_on(artifact("embeddings.bin"), artifact("cluster_full.bin"));
  if (want_reduced) {
    if (!fs::exists(artifact("embeddings_reduced.bin")))
      throw ConfigError("missing reduced embeddings — run reduce first");
    fit_on(artifact("embeddings_reduced.bin"), artifact("cluster_reduced.bin"));
  }
  record_stage(impl_->manifest, artifact("manifest.json"), "cluster",
               table.get("cluster"));
}

namespace {

struct VariantArtifacts {
  EmbeddingStore store;
  std::optional<ClusterModel> cluster_model;
  std::vector<int> fit_labels;
};

VariantArtifacts load_variant_inputs(const Pipeline& p,
                                     const PipelineVariant& variant) {
  VariantArtifacts va;
  const std::string store_path = variant.uses_reduced()
                                     ? p.artifact("embeddings_reduced.bin")
                                     : p.artifact("embeddings.bin");
  if (!fs::exists(store_path))
    throw ConfigError("missing artifact " + store_path + " — run " +
                      (variant.uses_reduced() ? "reduce" : "embed") +
                      " first");
  va.store = EmbeddingStore::load(store_path);
  if (variant.uses_clusters()) {
    const std::string cpath = variant.uses_reduced()
                                  ? p.artifact("cluster_reduced.bin")
                                  : p.artifact("cluster_full.bin");
    if (!fs::exists(cpath))
      throw ConfigError("missing artifact " + cpath + " — run cluster first");
    va.cluster_model = ClusterModel::load(cpath);
    va.fit_labels = va.cluster_model->labels;
  }
  return va;
}

DocModelConfig doc_config_for(const PipelineConfig& c,
                              const PipelineVariant& variant, int store_dim,
                              int cluster_count) {
  DocModelConfig dc;
  dc.source = variant.source;
  dc.head = variant.head;
  dc.d_in = store_dim;
  dc.d_cluster = c.d_cluster;
  dc.d_enc = c.d_enc;
  dc.heads = c.doc_heads;
  dc.d_ff = c.doc_d_ff;
  dc.d_rnn = c.d_rnn;
  dc.max_chunks = c.max_chunks;
  dc.cluster_count = cluster_count;
  dc.dropout = c.doc_dropout;
  return dc;
}

struct TrainedVariant {
  DocModel model;
  std::vector<DocExample> examples;  // all splits
  DocTrainReport report;
};

TrainedVariant train_variant(const Pipeline& p, const PipelineConfig& c,
                             const PipelineVariant& variant, int epochs,
                             std::uint64_t seed) {
  auto va = load_variant_inputs(p, variant);
  const int cluster_count =
      va.cluster_model
          ? static_cast<int>(va.cluster_model->cluster_radius.size())
          : 0;
  TrainedVariant tv;
  tv.examples = build_doc_examples(
      va.store, va.cluster_model ? &*va.cluster_model : nullptr, va.fit_labels,
      variant, c.max_chunks);
  std::vector<DocExample> train_set, val_set;
  for (const auto& ex : tv.examples) {
    if (ex.split == Split::kTrain) train_set.push_back(ex);
    else if (ex.split == Split::kValidation) val_set.push_back(ex);
  }
  tv.model = DocModel(doc_config_for(c, variant, va.store.dim, cluster_count),
                      seed);
  DocTrainOptions opts;
  opts.epochs = epochs;
  opts.lr = c.doc_lr;
  opts.batch_size = c.doc_batch_size;
  opts.seed = seed + 1;
  tv.report = train_doc_model(tv.model, train_set, val_set, opts);
  return tv;
}

MetricsRow metrics_for(const DocModel& model,
                       const std::vector<DocExample>& examples, Split split,
                       const std::string& variant_name, std::uint64_t seed) {
  std::vector<DocExample> subset;
  for (const auto& ex : examples)
    if (ex.split == split) subset.push_back(ex);
  const auto preds = predict(model, subset);
  std::vector<int> pv, gv;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pv.push_back(preds[i].label);
    gv.push_back(subset[i].label);
  }
  const auto m = macro_metrics(confusion(pv, gv));
  MetricsRow row;
  row.variant = variant_name;
  row.split = to_string(split);
  row.accuracy = m.accuracy;
  row.macro_precision = m.macro_precision;
  row.macro_recall = m.macro_recall;
  row.seed = seed;
  row.flags = m.flags;
  return row;
}

}  // namespace

void Pipeline::train_doc() {
  StageTable table{config_, *this};
  PipelineVariant variant{input_source_from_string(config_.variant),
                          head_from_string(config_.head)};
  const auto seed = config_.stage_seed("train_doc");
  auto tv = train_variant(*this, config_, variant, config_.doc_epochs, seed);
  tv.model.save(
      artifact("doc_" + config_.variant + "_" + config_.head + ".ckpt"));
  record_stage(impl_->manifest, artifact("manifest.json"), "train_doc",
               table.get("train_doc"));
}

std::vector<MetricsRow> Pipeline::evaluate() {
  StageTable table{config_, *this};
  std::vector<MetricsRow> rows;
  json timing = json::array();
  for (std::size_t g = 0; g < config_.grid.size(); ++g) {
    const auto& entry = config_.grid[g];
    PipelineVariant variant{input_source_from_string(entry.variant),
                            head_from_string(entry.head)};
    const auto seed =
        mix_seed(config_.stage_seed("train_doc"), variant.name());
    const auto t0 = std::chrono::steady_clock::now();
    auto tv = train_variant(*this, config_, variant, entry.epochs, seed);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    tv.model.save(artifact("doc_" + variant.name() + ".ckpt"));
    for (Split split : {Split::kValidation, Split::kTest}) {
      auto row = metrics_for(tv.model, tv.examples, split, variant.name(), seed);
      row.wall_clock_s = secs;
      rows.push_back(std::move(row));
    }
    timing.push_back({{"variant", variant.name()}, {"wall_clock_s", secs}});
  }
  // Wall clock goes to a separate file so results.jsonl stays byte-stable
  // across reruns.
  write_results_jsonl(artifact("results.jsonl"), rows);
  std::ofstream(artifact("results.txt")) << render_results_table(rows);
  std::ofstream(artifact("results_timing.json")) << timing.dump(2) << "\n";
  record_stage(impl_->manifest, artifact("manifest.json"), "evaluate",
               table.get("evaluate"));
  return rows;
}

std::vector<MetricsRow> Pipeline::run_all() {
  ensure("evaluate");
  std::ifstream is(artifact("results.jsonl"));
  std::vector<MetricsRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    MetricsRow r;
    r.variant = j.at("variant").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_precision = j.at("mP").get<double>();
    r.macro_recall = j.at("mR").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("flags")) r.flags.push_back(f.get<std::string>());
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> run_experiment(const PipelineConfig& config) {
  Pipeline pipeline(config);
  return pipeline.run_all();
}

}  // namespace ldoc
