#pragma once

// Synthetic cloze-QA data generation and line-delimited ingestion.
//
// A document is a shuffled mix of fact triples "Ea Rr Eb" (kept contiguous)
// and single distractor tokens. A query masks the object of one fact with
// the placeholder token; the answer is the masked entity.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "latt/linalg.hpp"

namespace latt {

inline const std::string kPlaceholder = "@blank";

struct Vocabulary {
  std::vector<std::string> tokens;        // id -> string
  std::map<std::string, int> ids;         // string -> id
  int entity_begin = 0;                   // entity ids are [begin, begin+count)
  int entity_count = 0;
  int placeholder = -1;

  int size() const { return static_cast<int>(tokens.size()); }

  int add(const std::string& s) {
    auto it = ids.find(s);
    if (it != ids.end()) return it->second;
    int id = size();
    tokens.push_back(s);
    ids.emplace(s, id);
    return id;
  }

  int lookup(const std::string& s) const {
    auto it = ids.find(s);
    return it == ids.end() ? -1 : it->second;
  }

  bool is_entity(int id) const {
    return id >= entity_begin && id < entity_begin + entity_count;
  }

  // index into the entity sub-vocabulary
  int entity_index(int id) const { return id - entity_begin; }
};

struct ClozeExample {
  std::vector<int> doc_tokens;
  std::vector<int> query_tokens;  // contains exactly one placeholder
  int answer = -1;                // token id from the entity sub-vocabulary
  int doc_id = -1;                // generation provenance, used for split checks
};

struct ClozeDataset {
  std::vector<ClozeExample> examples;
};

struct TrainConfig {
  std::size_t k = 32;
  std::size_t d = 32;
  int n_docs = 2000;        // training documents
  int doc_len = 60;         // approximate tokens per document
  int queries_per_doc = 4;  // m
  int entities = 20;
  int relations = 10;
  int distractor_vocab = 50;
  int epochs = 12;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::string mode = "softmax";  // none | softmax | linear | gated
};

struct GeneratedData {
  ClozeDataset train;
  ClozeDataset valid;
  Vocabulary vocab;
};

inline GeneratedData generate_synthetic_cloze(const TrainConfig& cfg,
                                              std::uint64_t seed) {
  require(cfg.entities >= 4, "generate_synthetic_cloze: need at least 4 entities");
  const int facts_per_doc = std::max(cfg.queries_per_doc, 6);
  require(cfg.doc_len >= 3 * facts_per_doc,
          "generate_synthetic_cloze: doc_len too small for the fact count");
  require(cfg.entities * cfg.relations >= facts_per_doc,
          "generate_synthetic_cloze: too few entities/relations for distinct facts");

  GeneratedData out;
  Vocabulary& v = out.vocab;
  v.entity_begin = 0;
  v.entity_count = cfg.entities;
  for (int i = 0; i < cfg.entities; ++i) v.add("E" + std::to_string(i));
  for (int i = 0; i < cfg.relations; ++i) v.add("R" + std::to_string(i));
  for (int i = 0; i < cfg.distractor_vocab; ++i) v.add("w" + std::to_string(i));
  v.placeholder = v.add(kPlaceholder);

  std::mt19937_64 rng(seed);
  const int valid_docs = std::max(1, cfg.n_docs / 10);
  const int total_docs = cfg.n_docs + valid_docs;

  std::uniform_int_distribution<int> ent(0, cfg.entities - 1);
  std::uniform_int_distribution<int> rel(0, cfg.relations - 1);
  std::uniform_int_distribution<int> distract(0, cfg.distractor_vocab - 1);

  for (int doc = 0; doc < total_docs; ++doc) {
    // Facts with distinct (subject, relation) keys so each query has a
    // unique answer within its document.
    std::vector<std::array<int, 3>> facts;
    std::vector<std::pair<int, int>> used;
    while (static_cast<int>(facts.size()) < facts_per_doc) {
      int s = ent(rng), r = rel(rng), o = ent(rng);
      if (std::find(used.begin(), used.end(), std::make_pair(s, r)) != used.end())
        continue;
      used.emplace_back(s, r);
      facts.push_back({s, r, o});
    }

    // Units: each fact is one contiguous unit, each distractor one token.
    const int n_distractors = cfg.doc_len - 3 * facts_per_doc;
    std::vector<std::vector<int>> units;
    for (const auto& f : facts)
      units.push_back({v.entity_begin + f[0], v.entity_count + f[1],
                       v.entity_begin + f[2]});
    const int distractor_begin = cfg.entities + cfg.relations;
    for (int i = 0; i < n_distractors; ++i)
      units.push_back({distractor_begin + distract(rng)});
    std::shuffle(units.begin(), units.end(), rng);

    std::vector<int> doc_tokens;
    doc_tokens.reserve(cfg.doc_len);
    for (const auto& u : units)
      doc_tokens.insert(doc_tokens.end(), u.begin(), u.end());

    // m queries over distinct facts of this document.
    std::vector<int> fact_order(facts.size());
    for (std::size_t i = 0; i < fact_order.size(); ++i) fact_order[i] = static_cast<int>(i);
    std::shuffle(fact_order.begin(), fact_order.end(), rng);

    ClozeDataset& split = doc < cfg.n_docs ? out.train : out.valid;
    for (int qi = 0; qi < cfg.queries_per_doc; ++qi) {
      const auto& f = facts[fact_order[qi]];
      ClozeExample ex;
      ex.doc_tokens = doc_tokens;
      ex.query_tokens = {v.entity_begin + f[0], v.entity_count + f[1],
                         v.placeholder};
      ex.answer = v.entity_begin + f[2];
      ex.doc_id = doc;
      split.examples.push_back(std::move(ex));
    }
  }
  return out;
}

inline std::vector<std::string> split_whitespace(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

struct IngestedData {
  ClozeDataset dataset;
  Vocabulary vocab;
};

// One record per line: document \t query (with "@blank") \t answer token.
// The vocabulary is built from the corpus; answer tokens form the entity
// sub-vocabulary (remapped so entity ids are contiguous).
inline IngestedData ingest_examples(std::istream& in,
                                    std::ostream& warnings = std::cerr) {
  struct RawRecord {
    std::vector<std::string> doc, query;
    std::string answer;
  };
  std::vector<RawRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3)
      throw std::runtime_error("ingest: line " + std::to_string(lineno) +
                               ": expected 3 tab-separated fields, got " +
                               std::to_string(fields.size()));
    RawRecord r;
    r.doc = split_whitespace(fields[0]);
    r.query = split_whitespace(fields[1]);
    r.answer = fields[2];
    // trim whitespace around answer
    {
      auto toks = split_whitespace(r.answer);
      if (toks.size() != 1)
        throw std::runtime_error("ingest: line " + std::to_string(lineno) +
                                 ": answer must be a single token");
      r.answer = toks[0];
    }
    int placeholders = 0;
    for (const auto& t : r.query)
      if (t == kPlaceholder) ++placeholders;
    if (placeholders != 1)
      throw std::runtime_error("ingest: line " + std::to_string(lineno) +
                               ": query must contain exactly one \"" +
                               kPlaceholder + "\", found " +
                               std::to_string(placeholders));
    if (std::find(r.doc.begin(), r.doc.end(), r.answer) == r.doc.end())
      warnings << "ingest: line " << lineno
               << ": answer not present in document (kept)\n";
    records.push_back(std::move(r));
  }

  IngestedData out;
  Vocabulary& v = out.vocab;
  // Entities first so their ids are contiguous from 0.
  v.entity_begin = 0;
  for (const auto& r : records)
    if (v.lookup(r.answer) < 0) v.add(r.answer);
  v.entity_count = v.size();
  v.placeholder = v.add(kPlaceholder);
  for (const auto& r : records) {
    for (const auto& t : r.doc) v.add(t);
    for (const auto& t : r.query) v.add(t);
  }

  int doc_id = 0;
  for (const auto& r : records) {
    ClozeExample ex;
    for (const auto& t : r.doc) ex.doc_tokens.push_back(v.lookup(t));
    for (const auto& t : r.query) ex.query_tokens.push_back(v.lookup(t));
    ex.answer = v.lookup(r.answer);
    ex.doc_id = doc_id++;
    out.dataset.examples.push_back(std::move(ex));
  }
  return out;
}

inline IngestedData ingest_examples_file(const std::string& path,
                                         std::ostream& warnings = std::cerr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest: cannot open " + path);
  return ingest_examples(in, warnings);
}

}  // namespace latt
