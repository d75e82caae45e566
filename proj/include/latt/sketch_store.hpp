#pragma once

// Binary persistence of sketches plus an indexed store with constant-time
// query lookups.
//
// SketchFile layout (little-endian):
//   header (17 bytes): magic "LATC", version u32, k u32, n u32, flags u8
//   payload: k*k doubles, row-major
//   footer: CRC32 of header+payload (4 bytes)

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <list>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "latt/attention.hpp"
#include "latt/gru.hpp"

namespace latt {

inline constexpr char kSketchMagic[4] = {'L', 'A', 'T', 'C'};
inline constexpr std::uint32_t kSketchVersion = 1;

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len,
                           std::uint32_t crc = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int j = 0; j < 8; ++j)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc = ~crc;
  for (std::size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return ~crc;
}

struct SketchLoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SketchCrcError : SketchLoadError {
  using SketchLoadError::SketchLoadError;
};
struct SketchMagicError : SketchLoadError {
  using SketchLoadError::SketchLoadError;
};
struct SketchVersionError : SketchLoadError {
  using SketchLoadError::SketchLoadError;
};

namespace detail {
inline void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(v & 0xFF);
  buf.push_back((v >> 8) & 0xFF);
  buf.push_back((v >> 16) & 0xFF);
  buf.push_back((v >> 24) & 0xFF);
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 |
         std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}
}  // namespace detail

inline std::vector<std::uint8_t> encode_sketch_file(const Sketch& s,
                                                    std::uint32_t n) {
  const std::uint32_t k = static_cast<std::uint32_t>(s.k());
  require(k >= 1, "encode_sketch_file: k must be positive");
  std::vector<std::uint8_t> buf;
  buf.reserve(17 + 8ull * k * k + 4);
  buf.insert(buf.end(), kSketchMagic, kSketchMagic + 4);
  detail::put_u32(buf, kSketchVersion);
  detail::put_u32(buf, k);
  detail::put_u32(buf, n);
  buf.push_back(0);  // flags
  for (double v : s.C.a) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int b = 0; b < 8; ++b) buf.push_back((bits >> (8 * b)) & 0xFF);
  }
  detail::put_u32(buf, crc32(buf.data(), buf.size()));
  return buf;
}

struct LoadedSketch {
  Sketch sketch;
  std::uint32_t n = 0;
};

inline LoadedSketch decode_sketch_file(const std::vector<std::uint8_t>& buf) {
  if (buf.size() < 21) throw SketchLoadError("sketch file truncated");
  if (std::memcmp(buf.data(), kSketchMagic, 4) != 0)
    throw SketchMagicError("sketch file: bad magic");
  const std::uint32_t version = detail::get_u32(buf.data() + 4);
  if (version != kSketchVersion)
    throw SketchVersionError("sketch file: unsupported version " +
                             std::to_string(version));
  const std::uint32_t k = detail::get_u32(buf.data() + 8);
  const std::uint32_t n = detail::get_u32(buf.data() + 12);
  const std::size_t expected = 17 + 8ull * k * k + 4;
  if (k < 1 || buf.size() != expected)
    throw SketchLoadError("sketch file: size mismatch");
  const std::uint32_t stored = detail::get_u32(buf.data() + buf.size() - 4);
  if (crc32(buf.data(), buf.size() - 4) != stored)
    throw SketchCrcError("sketch file: CRC mismatch");

  LoadedSketch out;
  out.n = n;
  out.sketch = Sketch(k);
  const std::uint8_t* p = buf.data() + 17;
  for (std::size_t i = 0; i < static_cast<std::size_t>(k) * k; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{p[8 * i + b]} << (8 * b);
    std::memcpy(&out.sketch.C.a[i], &bits, 8);
  }
  return out;
}

inline std::string save_sketch(const Sketch& s, std::uint32_t n,
                               const std::string& doc_id,
                               const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string path =
      (std::filesystem::path(dir) / (doc_id + ".latc")).string();
  auto buf = encode_sketch_file(s, n);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_sketch: cannot write " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), buf.size());
  return path;
}

inline LoadedSketch load_sketch(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SketchLoadError("load_sketch: cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return decode_sketch_file(buf);
}

struct IndexEntry {
  std::string path;  // relative to the store directory
  std::uint32_t n = 0;
  std::uint32_t k = 0;
};

struct StoreIndex {
  std::string dir;
  std::map<std::string, IndexEntry> docs;
};

inline void save_index(const StoreIndex& index) {
  std::ofstream out(std::filesystem::path(index.dir) / "index.tsv");
  for (const auto& [id, e] : index.docs)
    out << id << '\t' << e.path << '\t' << e.n << '\t' << e.k << '\n';
}

inline StoreIndex load_index(const std::string& dir) {
  StoreIndex index;
  index.dir = dir;
  std::ifstream in(std::filesystem::path(dir) / "index.tsv");
  if (!in) throw std::runtime_error("load_index: cannot open index in " + dir);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, path, n, k;
    if (!std::getline(ls, id, '\t') || !std::getline(ls, path, '\t') ||
        !std::getline(ls, n, '\t') || !std::getline(ls, k))
      throw std::runtime_error("load_index: malformed line: " + line);
    IndexEntry e{path, static_cast<std::uint32_t>(std::stoul(n)),
                 static_cast<std::uint32_t>(std::stoul(k))};
    if (!std::filesystem::exists(std::filesystem::path(dir) / e.path))
      throw std::runtime_error("load_index: missing sketch file " + e.path);
    index.docs.emplace(id, std::move(e));
  }
  return index;
}

// Deterministic token -> id mapping for raw text corpora (FNV-1a).
inline int hash_token_id(const std::string& tok, int vocab_size) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : tok) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<int>(h % static_cast<std::uint64_t>(vocab_size));
}

// Document encoder bundle for the store: embedding + GRU derived
// deterministically from a seed.
struct CorpusEncoder {
  int vocab_size = 4096;
  EmbeddingTable emb;
  GRUParams gru;

  static CorpusEncoder make(std::size_t k, std::size_t d, int vocab_size,
                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    CorpusEncoder e;
    e.vocab_size = vocab_size;
    e.emb = make_embedding(vocab_size, d, rng);
    e.gru = make_gru(k, d, rng);
    return e;
  }

  std::vector<int> tokenize(const std::string& text) const {
    std::vector<int> ids;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) ids.push_back(hash_token_id(tok, vocab_size));
    return ids;
  }
};

// One sketch per file, built with the streaming builder; hidden states are
// never kept past the current step.
inline StoreIndex encode_corpus(const std::string& corpus_dir,
                                const CorpusEncoder& enc,
                                const std::string& store_dir,
                                std::ostream& warnings = std::cerr) {
  StoreIndex index;
  index.dir = store_dir;
  std::filesystem::create_directories(store_dir);

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(corpus_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) {
      warnings << "encode_corpus: skipping unreadable file " << file << "\n";
      continue;
    }
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    std::vector<int> tokens = enc.tokenize(text);
    if (tokens.empty())
      warnings << "encode_corpus: empty document " << file
               << " stored as zero sketch\n";

    const std::size_t k = enc.gru.k();
    SketchBuilder builder(k);
    Vec h(k, 0.0), x(enc.emb.dim());
    for (int tok : tokens) {
      const double* src = enc.emb.E.row(tok);
      std::copy(src, src + enc.emb.dim(), x.begin());
      h = gru_step(x, h, enc.gru);
      builder.push(h);
    }
    if (tokens.size() < k)
      warnings << "encode_corpus: document " << file.filename().string()
               << " has n=" << tokens.size() << " < k=" << k
               << "; storing H would be smaller than the sketch\n";

    const std::string doc_id = file.stem().string();
    save_sketch(builder.sketch(), static_cast<std::uint32_t>(tokens.size()),
                doc_id, store_dir);
    index.docs[doc_id] =
        IndexEntry{doc_id + ".latc", static_cast<std::uint32_t>(tokens.size()),
                   static_cast<std::uint32_t>(k)};
  }
  save_index(index);
  return index;
}

// LRU read cache over loaded sketches.
class SketchCache {
 public:
  explicit SketchCache(std::size_t capacity = 1024) : capacity_(capacity) {}

  const Sketch& get(const std::string& path) {
    auto it = map_.find(path);
    if (it != map_.end()) {
      order_.splice(order_.begin(), order_, it->second.order_it);
      return it->second.sketch;
    }
    LoadedSketch loaded = load_sketch(path);
    order_.push_front(path);
    auto [ins, ok] =
        map_.emplace(path, Entry{std::move(loaded.sketch), order_.begin()});
    (void)ok;
    if (map_.size() > capacity_) {
      map_.erase(order_.back());
      order_.pop_back();
    }
    return ins->second.sketch;
  }

  std::size_t size() const { return map_.size(); }

 private:
  struct Entry {
    Sketch sketch;
    std::list<std::string>::iterator order_it;
  };
  std::size_t capacity_;
  std::list<std::string> order_;
  std::unordered_map<std::string, Entry> map_;
};

struct SketchStore {
  StoreIndex index;
  SketchCache cache;

  explicit SketchStore(StoreIndex idx, std::size_t cache_capacity = 1024)
      : index(std::move(idx)), cache(cache_capacity) {}

  // Encodes the query with the given encoder, then answers from the sketch
  // alone: after encoding, the lookup touches only k*k values.
  Vec query(const std::string& doc_id, const std::vector<int>& query_tokens,
            const EmbeddingTable& query_emb, const GRUParams& query_gru) {
    auto it = index.docs.find(doc_id);
    if (it == index.docs.end())
      throw std::runtime_error("query_store: unknown doc_id " + doc_id);
    Vec q = encode_query(query_tokens, query_emb, query_gru);
    const std::string path =
        (std::filesystem::path(index.dir) / it->second.path).string();
    return linear_attention(cache.get(path), q);
  }
};

}  // namespace latt
