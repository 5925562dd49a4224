#include "ldoc/embedding_store.hpp"

#include <fstream>
#include <stdexcept>

#include "ldoc/io.hpp"

namespace ldoc {

namespace {
constexpr char kMagic[] = "LDOCEMB1";
}

std::size_t EmbeddingStore::total_chunks() const {
  std::size_t n = 0;
  for (const auto& d : docs) n += static_cast<std::size_t>(d.chunk_count);
  return n;
}

std::vector<double> EmbeddingStore::points_for(
    const std::vector<Split>& splits) const {
  std::vector<double> out;
  for (const auto& d : docs) {
    bool keep = false;
    for (Split s : splits) keep = keep || d.split == s;
    if (keep) out.insert(out.end(), d.vectors.begin(), d.vectors.end());
  }
  return out;
}

void EmbeddingStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write embedding store: " + path);
  os.write(kMagic, 8);
  io::write_u32(os, 1);  // format version
  io::write_i32(os, dim);
  io::write_i32(os, chunk_len);
  io::write_i32(os, overlap);
  io::write_i32(os, max_len);
  io::write_str(os, source_hash);
  io::write_str(os, reduced_by);
  io::write_u64(os, docs.size());
  for (const auto& d : docs) {
    io::write_str(os, d.doc_id);
    io::write_i32(os, d.label);
    io::write_str(os, to_string(d.split));
    io::write_i32(os, d.chunk_count);
    io::write_f64s(os, d.vectors);
  }
  if (!os) throw std::runtime_error("embedding store write failed: " + path);
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open embedding store: " + path);
  io::check_magic(is, kMagic, "embedding store");
  if (io::read_u32(is) != 1)
    throw std::runtime_error("unsupported embedding store version");
  EmbeddingStore store;
  store.dim = io::read_i32(is);
  store.chunk_len = io::read_i32(is);
  store.overlap = io::read_i32(is);
  store.max_len = io::read_i32(is);
  store.source_hash = io::read_str(is);
  store.reduced_by = io::read_str(is);
  const auto n = io::read_u64(is);
  store.docs.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    DocEmbedding d;
    d.doc_id = io::read_str(is);
    d.label = io::read_i32(is);
    d.split = split_from_string(io::read_str(is));
    d.chunk_count = io::read_i32(is);
    d.vectors = io::read_f64s(is);
    if (d.vectors.size() !=
        static_cast<std::size_t>(d.chunk_count) * store.dim)
      throw std::runtime_error("embedding store: corrupt record for \"" +
                               d.doc_id + "\"");
    store.docs.push_back(std::move(d));
  }
  return store;
}

}  // namespace ldoc
