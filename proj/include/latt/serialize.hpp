#pragma once

// Binary model checkpoints: parameters plus the vocabulary they were
// trained against. Little-endian, magic "LAQM".

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "latt/cloze.hpp"
#include "latt/model.hpp"

namespace latt {

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf[i]} << (8 * i);
  return v;
}

inline void write_doubles(std::ostream& out, const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &p[i], 8);
    write_u64(out, bits);
  }
}

inline void read_doubles(std::istream& in, double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = read_u64(in);
    std::memcpy(&p[i], &bits, 8);
  }
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  std::string s(read_u64(in), '\0');
  in.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}

}  // namespace detail

inline void save_model(const ModelParams& params, const Vocabulary& vocab,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_model: cannot write " + path);
  out.write("LAQM", 4);
  detail::write_u64(out, 1);  // version
  detail::write_string(out, mode_name(params.mode));
  detail::write_u64(out, params.k);
  detail::write_u64(out, params.d);
  detail::write_u64(out, static_cast<std::uint64_t>(params.vocab_size));
  detail::write_u64(out, static_cast<std::uint64_t>(params.entity_count));

  detail::write_u64(out, static_cast<std::uint64_t>(vocab.tokens.size()));
  for (const auto& t : vocab.tokens) detail::write_string(out, t);
  detail::write_u64(out, static_cast<std::uint64_t>(vocab.entity_begin));
  detail::write_u64(out, static_cast<std::uint64_t>(vocab.entity_count));
  detail::write_u64(out, static_cast<std::uint64_t>(vocab.placeholder));

  ModelParams& mut = const_cast<ModelParams&>(params);
  for (const ParamView& v : param_views(mut)) detail::write_doubles(out, v.p, v.n);
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

struct LoadedModel {
  ModelParams params;
  Vocabulary vocab;
};

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "LAQM", 4) != 0)
    throw std::runtime_error("load_model: bad magic in " + path);
  if (detail::read_u64(in) != 1)
    throw std::runtime_error("load_model: unsupported version in " + path);

  const std::string mode = detail::read_string(in);
  const std::size_t k = detail::read_u64(in);
  const std::size_t d = detail::read_u64(in);
  const int vocab_size = static_cast<int>(detail::read_u64(in));
  const int entity_count = static_cast<int>(detail::read_u64(in));

  LoadedModel out;
  const std::size_t n_tokens = detail::read_u64(in);
  for (std::size_t i = 0; i < n_tokens; ++i)
    out.vocab.add(detail::read_string(in));
  out.vocab.entity_begin = static_cast<int>(detail::read_u64(in));
  out.vocab.entity_count = static_cast<int>(detail::read_u64(in));
  out.vocab.placeholder = static_cast<int>(detail::read_u64(in));

  out.params = make_model(parse_mode(mode), k, d, vocab_size, entity_count, 0);
  for (const ParamView& v : param_views(out.params))
    detail::read_doubles(in, v.p, v.n);
  if (!in) throw std::runtime_error("load_model: truncated file " + path);
  return out;
}

}  // namespace latt
