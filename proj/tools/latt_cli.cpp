// Command-line front end: corpus encoding, sketch queries, training,
// evaluation, benchmarks and the verification selftest.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latt/bench.hpp"
#include "latt/cloze.hpp"
#include "latt/config.hpp"
#include "latt/model.hpp"
#include "latt/selftest.hpp"
#include "latt/serialize.hpp"
#include "latt/sketch_store.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

struct EncoderSettings {
  std::size_t k = 32;
  std::size_t d = 32;
  int vocab = 4096;
  std::uint64_t seed = 1;
};

void write_encoder_settings(const std::string& store_dir,
                            const EncoderSettings& s) {
  std::ofstream out(std::filesystem::path(store_dir) / "encoder.cfg");
  out << "k = " << s.k << "\nd = " << s.d << "\nvocab = " << s.vocab
      << "\nseed = " << s.seed << "\n";
}

EncoderSettings read_encoder_settings(const std::string& store_dir) {
  latt::Config cfg = latt::Config::parse_file(
      (std::filesystem::path(store_dir) / "encoder.cfg").string());
  EncoderSettings s;
  s.k = static_cast<std::size_t>(cfg.get_int("k", 32));
  s.d = static_cast<std::size_t>(cfg.get_int("d", 32));
  s.vocab = static_cast<int>(cfg.get_int("vocab", 4096));
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  return s;
}

// Query encoder parameters are derived from the store seed but disjoint
// from the document encoder's.
latt::CorpusEncoder make_query_encoder(const EncoderSettings& s) {
  return latt::CorpusEncoder::make(s.k, s.d, s.vocab,
                                   s.seed ^ 0xC0FFEEULL);
}

int cmd_encode(const std::string& corpus_dir, const std::string& store_dir,
               const EncoderSettings& settings) {
  latt::CorpusEncoder enc =
      latt::CorpusEncoder::make(settings.k, settings.d, settings.vocab,
                                settings.seed);
  latt::StoreIndex index = latt::encode_corpus(corpus_dir, enc, store_dir);
  write_encoder_settings(store_dir, settings);
  std::cout << "encoded " << index.docs.size() << " documents into "
            << store_dir << "\n";
  return kExitOk;
}

int cmd_query(const std::string& store_dir, const std::string& doc_id,
              const std::vector<std::string>& words) {
  EncoderSettings settings = read_encoder_settings(store_dir);
  latt::CorpusEncoder qenc = make_query_encoder(settings);
  std::string text;
  for (const auto& w : words) text += w + " ";
  std::vector<int> tokens = qenc.tokenize(text);
  if (tokens.empty()) {
    std::cerr << "query: empty query\n";
    return kExitValidation;
  }
  latt::SketchStore store(latt::load_index(store_dir));
  latt::Vec r = store.query(doc_id, tokens, qenc.emb, qenc.gru);
  for (std::size_t i = 0; i < r.size(); ++i)
    std::cout << (i ? " " : "") << r[i];
  std::cout << "\n";
  return kExitOk;
}

latt::TrainConfig train_config_from_file(const std::string& path) {
  latt::Config cfg = latt::Config::parse_file(path);
  latt::TrainConfig tc;
  tc.k = static_cast<std::size_t>(cfg.get_int("k", 32));
  tc.d = static_cast<std::size_t>(cfg.get_int("d", 32));
  tc.n_docs = static_cast<int>(cfg.get_int("n_docs", 2000));
  tc.doc_len = static_cast<int>(cfg.get_int("doc_len", 60));
  tc.queries_per_doc = static_cast<int>(cfg.get_int("m", 4));
  tc.entities = static_cast<int>(cfg.get_int("entities", 20));
  tc.relations = static_cast<int>(cfg.get_int("relations", 10));
  tc.distractor_vocab = static_cast<int>(cfg.get_int("distractors", 50));
  tc.epochs = static_cast<int>(cfg.get_int("epochs", 12));
  tc.batch_size = static_cast<int>(cfg.get_int("batch", 32));
  tc.lr = cfg.get_double("lr", 1e-3);
  tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  tc.mode = cfg.get_string("mode", "softmax");
  return tc;
}

int cmd_train(const std::string& config_path, const std::string& save_path,
              const std::string& mode_override, long seed_override,
              long k_override) {
  latt::TrainConfig tc = train_config_from_file(config_path);
  if (!mode_override.empty()) tc.mode = mode_override;
  if (seed_override >= 0) tc.seed = static_cast<std::uint64_t>(seed_override);
  if (k_override > 0) tc.k = static_cast<std::size_t>(k_override);
  latt::GeneratedData data = latt::generate_synthetic_cloze(tc, tc.seed);
  latt::TrainResult result = latt::train(tc, data, &std::cout);
  if (!save_path.empty()) {
    latt::save_model(result.params, data.vocab, save_path);
    std::cerr << "saved model to " << save_path << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& params_path, const std::string& dataset_path) {
  latt::LoadedModel model = latt::load_model(params_path);
  std::ifstream in(dataset_path);
  if (!in) {
    std::cerr << "eval: cannot open " << dataset_path << "\n";
    return kExitValidation;
  }

  std::size_t total = 0, correct = 0, skipped = 0, unknown_tokens = 0;
  std::string line;
  int lineno = 0;
  auto to_ids = [&](const std::vector<std::string>& toks) {
    std::vector<int> ids;
    for (const auto& t : toks) {
      int id = model.vocab.lookup(t);
      if (id < 0) {
        ++unknown_tokens;
        id = 0;
      }
      ids.push_back(id);
    }
    return ids;
  };
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
    if (fields.size() != 3) {
      std::cerr << "eval: line " << lineno << ": expected 3 fields\n";
      return kExitValidation;
    }
    latt::ClozeExample ex;
    ex.doc_tokens = to_ids(latt::split_whitespace(fields[0]));
    ex.query_tokens = to_ids(latt::split_whitespace(fields[1]));
    int answer = model.vocab.lookup(latt::trim(fields[2]));
    if (answer < 0 || !model.vocab.is_entity(answer)) {
      std::cerr << "eval: line " << lineno
                << ": answer is not a known entity, skipping\n";
      ++skipped;
      continue;
    }
    ex.answer = answer;
    latt::Vec logits = latt::model_forward(model.params, ex);
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;
    if (static_cast<int>(best) == model.vocab.entity_index(answer)) ++correct;
    ++total;
  }
  if (unknown_tokens)
    std::cerr << "eval: " << unknown_tokens
              << " unknown tokens mapped to id 0\n";
  if (total == 0) {
    std::cerr << "eval: no usable examples (" << skipped << " skipped)\n";
    return kExitValidation;
  }
  std::cout << "accuracy " << static_cast<double>(correct) / total << " ("
            << correct << "/" << total << ", " << skipped << " skipped)\n";
  return kExitOk;
}

int cmd_bench(const std::string& config_path) {
  latt::Config cfg = latt::Config::parse_file(config_path);
  latt::BenchConfig bc;
  auto to_sizes = [](const std::vector<long>& v) {
    std::vector<std::size_t> out;
    for (long x : v) out.push_back(static_cast<std::size_t>(x));
    return out;
  };
  bc.ks = to_sizes(cfg.get_int_list("ks", {32, 100}));
  bc.ns = to_sizes(cfg.get_int_list("ns", {250, 1000, 4000}));
  bc.m = static_cast<std::size_t>(cfg.get_int("m", 10000));
  bc.trials = static_cast<std::size_t>(cfg.get_int("trials", 5));
  bc.warmup = static_cast<std::size_t>(cfg.get_int("warmup", 2));
  bc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  const std::string kind = cfg.get_string("kind", "lookup");
  std::vector<latt::BenchRecord> records;
  if (kind == "lookup" || kind == "both") {
    auto r = latt::bench_lookup(bc);
    records.insert(records.end(), r.begin(), r.end());
  }
  if (kind == "encoding" || kind == "both") {
    auto r = latt::bench_encoding(bc);
    records.insert(records.end(), r.begin(), r.end());
  }
  if (records.empty()) {
    std::cerr << "bench: unknown kind \"" << kind
              << "\" (expected lookup, encoding or both)\n";
    return kExitUsage;
  }
  latt::write_csv(std::cout, records);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear attention sketches: encode, query, train, bench"};
  app.require_subcommand(1);

  std::string corpus_dir, store_dir, doc_id, config_path, save_path;
  std::string params_path, dataset_path, mode_override;
  std::vector<std::string> query_words;
  long seed = -1, k = -1;
  EncoderSettings enc_settings;

  auto* encode = app.add_subcommand("encode", "encode a corpus into a sketch store");
  encode->add_option("corpus", corpus_dir, "directory of token files")->required();
  encode->add_option("store", store_dir, "output store directory")->required();
  encode->add_option("--k", enc_settings.k, "hidden size");
  encode->add_option("--d", enc_settings.d, "embedding size");
  encode->add_option("--vocab", enc_settings.vocab, "hashed vocabulary size");
  encode->add_option("--seed", enc_settings.seed, "encoder parameter seed");

  auto* query = app.add_subcommand("query", "run an attention lookup against a store");
  query->add_option("store", store_dir, "store directory")->required();
  query->add_option("doc_id", doc_id, "document id")->required();
  query->add_option("words", query_words, "query tokens")->required();

  auto* train = app.add_subcommand("train", "train a cloze-QA model");
  train->add_option("config", config_path, "key = value config file")->required();
  train->add_option("--save", save_path, "write the trained model here");
  train->add_option("--mode", mode_override, "attention mode override")
      ->check(CLI::IsMember({"none", "softmax", "linear", "gated"}));
  train->add_option("--seed", seed, "seed override");
  train->add_option("--k", k, "hidden size override");

  auto* eval = app.add_subcommand("eval", "evaluate a saved model on a dataset");
  eval->add_option("params", params_path, "model file from train --save")->required();
  eval->add_option("dataset", dataset_path, "tab-separated cloze dataset")->required();

  auto* bench = app.add_subcommand("bench", "run the complexity benchmarks");
  bench->add_option("config", config_path, "key = value config file")->required();

  std::uint64_t selftest_seed = 7;
  auto* selftest = app.add_subcommand("selftest", "run the verification suites");
  selftest->add_option("--seed", selftest_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (encode->parsed()) return cmd_encode(corpus_dir, store_dir, enc_settings);
    if (query->parsed()) return cmd_query(store_dir, doc_id, query_words);
    if (train->parsed())
      return cmd_train(config_path, save_path, mode_override, seed, k);
    if (eval->parsed()) return cmd_eval(params_path, dataset_path);
    if (bench->parsed()) return cmd_bench(config_path);
    if (selftest->parsed())
      return latt::run_selftest(std::cout, selftest_seed) ? kExitOk
                                                          : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
