#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ldoc {

enum class Split { kTrain, kValidation, kTest };

Split split_from_string(const std::string& s);
std::string to_string(Split s);

struct Document {
  std::string id;
  std::string text;
  int label = 0;  // 0 = rejected, 1 = accepted
  Split split = Split::kTrain;
};

struct Corpus {
  std::vector<Document> docs;

  std::size_t count(Split s) const;
};

struct Chunk {
  std::string doc_id;
  int index = 0;
  std::vector<std::string> words;
  int label = 0;  // inherited from the document
};

// Reserved token ids.
constexpr int kPadId = 0;
constexpr int kClsId = 1;
constexpr int kSepId = 2;
constexpr int kUnkId = 3;

class Vocab {
 public:
  Vocab();

  // Returns the word's id, or kUnkId when unknown.
  int id_of(const std::string& word) const;
  // Inverse mapping (reserved ids map to their bracketed names).
  const std::string& word_of(int id) const;
  int size() const { return static_cast<int>(words_.size()); }

  void add(const std::string& word);

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> words_;
};

struct TokenSequence {
  std::vector<int> ids;            // fixed length max_len
  std::vector<int> attention_mask; // 1 for [CLS]/words/[SEP], 0 for [PAD]
};

// Lowercased word tokens: maximal runs of alphanumeric characters;
// everything else is a separator.
std::vector<std::string> tokenize(const std::string& text);

// JSON-lines corpus: one object per line with keys id, text, label
// ("accepted"|"rejected"), split ("train"|"validation"|"test").
Corpus load_corpus(const std::string& path);

// Overlapping word windows: chunk i starts at i*(chunk_len-overlap); the
// final chunk always contains the document's last word.
std::vector<Chunk> chunk_document(const Document& doc, int chunk_len,
                                  int overlap);

// Frequency-ranked vocabulary over the train+validation splits only.
Vocab build_vocab(const Corpus& corpus, int max_size, int min_freq);

// [CLS] w1..wk [SEP] [PAD]... with k = min(|words|, max_len-2).
TokenSequence encode_chunk(const Chunk& chunk, const Vocab& vocab, int max_len);

}  // namespace ldoc
