#include "ldoc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "ldoc/io.hpp"

namespace ldoc {

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split \"" + s + "\"");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

std::size_t Corpus::count(Split s) const {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.split == s;
  return n;
}

Vocab::Vocab() {
  for (const char* w : {"[PAD]", "[CLS]", "[SEP]", "[UNK]"}) add(w);
}

int Vocab::id_of(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocab::word_of(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("vocab id " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

void Vocab::add(const std::string& word) {
  if (ids_.count(word)) return;
  ids_.emplace(word, size());
  words_.push_back(word);
}

void Vocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write vocab: " + path);
  os.write("LDOCVOC1", 8);
  io::write_u32(os, 1);
  io::write_u64(os, words_.size());
  for (const auto& w : words_) io::write_str(os, w);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open vocab: " + path);
  io::check_magic(is, "LDOCVOC1", "vocab");
  if (io::read_u32(is) != 1) throw std::runtime_error("unsupported vocab version");
  const auto n = io::read_u64(is);
  Vocab v;
  for (std::uint64_t i = 0; i < n; ++i) v.add(io::read_str(is));
  return v;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open corpus file: " + path);
  Corpus corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corpus line " + std::to_string(lineno) +
                               ": invalid JSON (" + e.what() + ")");
    }
    for (const char* key : {"id", "text", "label", "split"})
      if (!j.contains(key))
        throw std::runtime_error("corpus line " + std::to_string(lineno) +
                                 ": missing key \"" + key + "\"");
    Document doc;
    try {
      doc.id = j.at("id").get<std::string>();
      doc.text = j.at("text").get<std::string>();
      const auto label = j.at("label").get<std::string>();
      if (label == "accepted") doc.label = 1;
      else if (label == "rejected") doc.label = 0;
      else
        throw std::runtime_error("unknown label \"" + label + "\"");
      doc.split = split_from_string(j.at("split").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corpus line " + std::to_string(lineno) + ": " +
                               e.what());
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("corpus line " + std::to_string(lineno) + ": " +
                               e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("corpus line " + std::to_string(lineno) + ": " +
                               e.what());
    }
    if (!seen.insert(doc.id).second)
      throw std::runtime_error("corpus line " + std::to_string(lineno) +
                               ": duplicate document id \"" + doc.id + "\"");
    bool blank = true;
    for (unsigned char c : doc.text) blank = blank && std::isspace(c);
    if (blank)
      throw std::runtime_error("corpus line " + std::to_string(lineno) +
                               ": empty text for document \"" + doc.id + "\"");
    corpus.docs.push_back(std::move(doc));
  }
  if (corpus.docs.empty()) throw std::runtime_error("empty corpus: " + path);
  return corpus;
}

std::vector<Chunk> chunk_document(const Document& doc, int chunk_len,
                                  int overlap) {
  if (chunk_len < 1 || overlap < 0 || overlap >= chunk_len)
    throw std::invalid_argument("chunking requires 0 <= overlap < chunk_len");
  const auto words = tokenize(doc.text);
  if (words.empty())
    throw std::invalid_argument("document \"" + doc.id + "\" has no words");
  const int n = static_cast<int>(words.size());
  const int stride = chunk_len - overlap;
  std::vector<Chunk> chunks;
  for (int start = 0;; start += stride) {
    Chunk c;
    c.doc_id = doc.id;
    c.index = static_cast<int>(chunks.size());
    c.label = doc.label;
    const int end = std::min(start + chunk_len, n);
    c.words.assign(words.begin() + start, words.begin() + end);
    chunks.push_back(std::move(c));
    if (start + chunk_len >= n) break;
  }
  return chunks;
}

Vocab build_vocab(const Corpus& corpus, int max_size, int min_freq) {
  if (max_size < 1) throw std::invalid_argument("build_vocab: max_size < 1");
  std::unordered_map<std::string, std::int64_t> freq;
  for (const auto& doc : corpus.docs) {
    if (doc.split == Split::kTest) continue;  // train+validation only
    for (auto& w : tokenize(doc.text)) ++freq[w];
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(),
                                                           freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocab vocab;
  for (const auto& [word, count] : ranked) {
    if (count < min_freq) break;
    if (vocab.size() >= max_size + 4) break;
    vocab.add(word);
  }
  return vocab;
}

TokenSequence encode_chunk(const Chunk& chunk, const Vocab& vocab,
                           int max_len) {
  if (max_len < 3) throw std::invalid_argument("encode_chunk: max_len < 3");
  TokenSequence seq;
  seq.ids.assign(static_cast<std::size_t>(max_len), kPadId);
  seq.attention_mask.assign(static_cast<std::size_t>(max_len), 0);
  const int k =
      std::min<int>(static_cast<int>(chunk.words.size()), max_len - 2);
  seq.ids[0] = kClsId;
  for (int i = 0; i < k; ++i)
    seq.ids[static_cast<std::size_t>(i) + 1] = vocab.id_of(chunk.words[i]);
  seq.ids[static_cast<std::size_t>(k) + 1] = kSepId;
  for (int i = 0; i < k + 2; ++i) seq.attention_mask[i] = 1;
  return seq;
}

}  // namespace ldoc
