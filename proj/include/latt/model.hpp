#pragma once

// The four cloze-QA model variants (no attention / softmax / linear /
// gated linear), cross-entropy loss, ADAM, training loop and evaluation.
// The variants share one architecture and differ only in how R(D,Q) is
// computed; the answer head is an affine map on [R; q].

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "latt/attention.hpp"
#include "latt/cloze.hpp"
#include "latt/gru.hpp"

namespace latt {

enum class AttentionMode { none, softmax, linear, gated };

inline AttentionMode parse_mode(const std::string& s) {
  if (s == "none") return AttentionMode::none;
  if (s == "softmax") return AttentionMode::softmax;
  if (s == "linear") return AttentionMode::linear;
  if (s == "gated" || s == "gated-linear") return AttentionMode::gated;
  throw std::invalid_argument("unknown attention mode: " + s);
}

inline std::string mode_name(AttentionMode m) {
  switch (m) {
    case AttentionMode::none: return "none";
    case AttentionMode::softmax: return "softmax";
    case AttentionMode::linear: return "linear";
    case AttentionMode::gated: return "gated";
  }
  return "?";
}

struct ModelParams {
  std::size_t k = 0, d = 0;
  int vocab_size = 0;
  int entity_count = 0;
  AttentionMode mode = AttentionMode::softmax;

  EmbeddingTable doc_emb, query_emb;
  GRUParams doc_gru, query_gru;
  GateParams gate;  // used by the gated variant only
  Mat head_W;       // entity_count x 2k
  Vec head_b;       // entity_count
};

inline ModelParams make_model(AttentionMode mode, std::size_t k, std::size_t d,
                              int vocab_size, int entity_count,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.k = k;
  p.d = d;
  p.vocab_size = vocab_size;
  p.entity_count = entity_count;
  p.mode = mode;
  p.doc_emb = make_embedding(vocab_size, d, rng);
  p.query_emb = make_embedding(vocab_size, d, rng);
  p.doc_gru = make_gru(k, d, rng);
  p.query_gru = make_gru(k, d, rng);
  p.gate.W = uniform_mat(k, k, k, rng);
  // bias the gate open (sigmoid(2) ~ 0.88) so the gated variant starts out
  // close to plain accumulation and learns what to filter, instead of
  // starting half-closed; same idea as LSTM forget-bias init
  p.gate.b = Vec(k, 2.0);
  p.head_W = uniform_mat(entity_count, 2 * k, 2 * k, rng);
  p.head_b = Vec(entity_count, 0.0);
  return p;
}

struct ModelForwardCache {
  EncoderOutput doc;
  std::vector<GRUStepCache> query_cache;
  Vec q;
  Vec R;
  Vec att_weights;  // softmax variant
  StepTape tape;    // gated variant
  Vec features;     // [R; q] or [q; q]
};

inline Vec model_forward(const ModelParams& p, const ClozeExample& ex,
                         ModelForwardCache* cache = nullptr) {
  ModelForwardCache local;
  ModelForwardCache& c = cache ? *cache : local;

  c.q = encode_query(ex.query_tokens, p.query_emb, p.query_gru,
                     cache ? &c.query_cache : nullptr);

  Vec R;
  switch (p.mode) {
    case AttentionMode::none:
      R = c.q;  // features become [q; q]; document is never encoded
      break;
    case AttentionMode::softmax: {
      c.doc = encode_document(ex.doc_tokens, p.doc_emb, p.doc_gru);
      c.att_weights = softmax(matvec(c.doc.states.H, c.q));
      R = matvec_t(c.doc.states.H, c.att_weights);
      break;
    }
    case AttentionMode::linear: {
      c.doc = encode_document(ex.doc_tokens, p.doc_emb, p.doc_gru);
      R = linear_attention(build_sketch_stream(c.doc.states), c.q);
      break;
    }
    case AttentionMode::gated: {
      c.doc = encode_document(ex.doc_tokens, p.doc_emb, p.doc_gru);
      GatedForwardResult r = gated_linear_forward(c.doc.states, p.gate, c.q);
      R = std::move(r.R);
      c.tape = std::move(r.tape);
      break;
    }
  }
  c.R = R;

  c.features.resize(2 * p.k);
  std::copy(R.begin(), R.end(), c.features.begin());
  std::copy(c.q.begin(), c.q.end(), c.features.begin() + p.k);

  Vec logits = matvec(p.head_W, c.features);
  for (int i = 0; i < p.entity_count; ++i) logits[i] += p.head_b[i];
  return logits;
}

inline double cross_entropy_loss(const Vec& logits, int answer_index) {
  require(answer_index >= 0 &&
              static_cast<std::size_t>(answer_index) < logits.size(),
          "cross_entropy_loss: answer index out of range");
  Vec p = softmax(logits);
  return -std::log(p[answer_index]);
}

struct ModelGrads {
  Mat d_doc_emb, d_query_emb;
  GRUGrads d_doc_gru, d_query_gru;
  Mat d_gate_W;
  Vec d_gate_b;
  Mat d_head_W;
  Vec d_head_b;

  explicit ModelGrads(const ModelParams& p)
      : d_doc_emb(p.doc_emb.E.rows, p.doc_emb.E.cols),
        d_query_emb(p.query_emb.E.rows, p.query_emb.E.cols),
        d_doc_gru(p.doc_gru), d_query_gru(p.query_gru),
        d_gate_W(p.gate.W.rows, p.gate.W.cols), d_gate_b(p.gate.b.size(), 0.0),
        d_head_W(p.head_W.rows, p.head_W.cols), d_head_b(p.head_b.size(), 0.0) {}
};

// Accumulates gradients of the cross-entropy loss into `grads`; returns the loss.
inline double model_backward(const ModelParams& p, const ClozeExample& ex,
                             int answer_index, const ModelForwardCache& c,
                             const Vec& logits, ModelGrads& grads) {
  const std::size_t k = p.k;
  Vec dlogits = softmax(logits);
  const double loss = -std::log(dlogits[answer_index]);
  dlogits[answer_index] -= 1.0;

  Vec dfeat(2 * k, 0.0);
  for (int i = 0; i < p.entity_count; ++i) {
    grads.d_head_b[i] += dlogits[i];
    for (std::size_t j = 0; j < 2 * k; ++j) {
      grads.d_head_W(i, j) += dlogits[i] * c.features[j];
      dfeat[j] += p.head_W(i, j) * dlogits[i];
    }
  }

  Vec dR(dfeat.begin(), dfeat.begin() + k);
  Vec dq(dfeat.begin() + k, dfeat.end());

  Mat dH;
  switch (p.mode) {
    case AttentionMode::none:
      // features were [q; q]
      for (std::size_t i = 0; i < k; ++i) dq[i] += dR[i];
      break;
    case AttentionMode::softmax: {
      const Mat& H = c.doc.states.H;
      const Vec& a = c.att_weights;
      Vec da = matvec(H, dR);
      double common = dot(a, da);
      Vec dz(a.size());
      for (std::size_t t = 0; t < a.size(); ++t)
        dz[t] = a[t] * (da[t] - common);
      dH = Mat(H.rows, k);
      for (std::size_t t = 0; t < H.rows; ++t)
        for (std::size_t j = 0; j < k; ++j)
          dH(t, j) = a[t] * dR[j] + dz[t] * c.q[j];
      axpy_into(1.0, matvec_t(H, dz), dq);
      break;
    }
    case AttentionMode::linear: {
      std::vector<Vec> rows(c.doc.states.n());
      for (std::size_t t = 0; t < rows.size(); ++t)
        rows[t].assign(c.doc.states.H.row(t), c.doc.states.H.row(t) + k);
      AttentionGrads g = linear_attention_backward(rows, c.q, dR);
      dH = std::move(g.dH);
      axpy_into(1.0, g.dq, dq);
      break;
    }
    case AttentionMode::gated: {
      AttentionGrads g = gated_linear_backward(c.tape, c.q, dR, p.gate);
      dH = std::move(g.dH);
      axpy_into(1.0, g.dq, dq);
      for (std::size_t i = 0; i < g.dW.a.size(); ++i)
        grads.d_gate_W.a[i] += g.dW.a[i];
      for (std::size_t i = 0; i < k; ++i) grads.d_gate_b[i] += g.db[i];
      break;
    }
  }

  if (p.mode != AttentionMode::none && !ex.doc_tokens.empty())
    gru_backward(c.doc.cache, dH, ex.doc_tokens, p.doc_gru, grads.d_doc_gru,
                 grads.d_doc_emb);

  Mat dq_states(ex.query_tokens.size(), k);
  for (std::size_t j = 0; j < k; ++j)
    dq_states(ex.query_tokens.size() - 1, j) = dq[j];
  gru_backward(c.query_cache, dq_states, ex.query_tokens, p.query_gru,
               grads.d_query_gru, grads.d_query_emb);
  return loss;
}

// ---- flattened parameter access for the optimizer ----

struct ParamView {
  double* p;
  std::size_t n;
};

namespace detail {
inline void push_gru(std::vector<ParamView>& v, GRUParams& g) {
  for (Mat* m : {&g.Wz, &g.Uz, &g.Wr, &g.Ur, &g.Wh, &g.Uh})
    v.push_back({m->a.data(), m->a.size()});
  for (Vec* b : {&g.bz, &g.br, &g.bh}) v.push_back({b->data(), b->size()});
}
inline void push_gru(std::vector<ParamView>& v, GRUGrads& g) {
  for (Mat* m : {&g.dWz, &g.dUz, &g.dWr, &g.dUr, &g.dWh, &g.dUh})
    v.push_back({m->a.data(), m->a.size()});
  for (Vec* b : {&g.dbz, &g.dbr, &g.dbh}) v.push_back({b->data(), b->size()});
}
}  // namespace detail

inline std::vector<ParamView> param_views(ModelParams& p) {
  std::vector<ParamView> v;
  v.push_back({p.doc_emb.E.a.data(), p.doc_emb.E.a.size()});
  v.push_back({p.query_emb.E.a.data(), p.query_emb.E.a.size()});
  detail::push_gru(v, p.doc_gru);
  detail::push_gru(v, p.query_gru);
  v.push_back({p.gate.W.a.data(), p.gate.W.a.size()});
  v.push_back({p.gate.b.data(), p.gate.b.size()});
  v.push_back({p.head_W.a.data(), p.head_W.a.size()});
  v.push_back({p.head_b.data(), p.head_b.size()});
  return v;
}

inline std::vector<ParamView> grad_views(ModelGrads& g) {
  std::vector<ParamView> v;
  v.push_back({g.d_doc_emb.a.data(), g.d_doc_emb.a.size()});
  v.push_back({g.d_query_emb.a.data(), g.d_query_emb.a.size()});
  detail::push_gru(v, g.d_doc_gru);
  detail::push_gru(v, g.d_query_gru);
  v.push_back({g.d_gate_W.a.data(), g.d_gate_W.a.size()});
  v.push_back({g.d_gate_b.data(), g.d_gate_b.size()});
  v.push_back({g.d_head_W.a.data(), g.d_head_W.a.size()});
  v.push_back({g.d_head_b.data(), g.d_head_b.size()});
  return v;
}

inline void zero_grads(std::vector<ParamView>& views) {
  for (auto& v : views) std::fill(v.p, v.p + v.n, 0.0);
}

inline double global_grad_norm(const std::vector<ParamView>& views) {
  double s = 0.0;
  for (const auto& v : views)
    for (std::size_t i = 0; i < v.n; ++i) s += v.p[i] * v.p[i];
  return std::sqrt(s);
}

inline void clip_grads(std::vector<ParamView>& views, double max_norm) {
  double norm = global_grad_norm(views);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& v : views)
      for (std::size_t i = 0; i < v.n; ++i) v.p[i] *= s;
  }
}

struct AdamState {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;
  std::vector<Vec> m, v;

  void init(const std::vector<ParamView>& views) {
    m.clear();
    v.clear();
    for (const auto& pv : views) {
      m.emplace_back(pv.n, 0.0);
      v.emplace_back(pv.n, 0.0);
    }
    step = 0;
  }
};

inline void adam_step(std::vector<ParamView>& params,
                      const std::vector<ParamView>& grads, AdamState& st) {
  require(params.size() == grads.size() && params.size() == st.m.size(),
          "adam_step: view count mismatch");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, st.step);
  const double bc2 = 1.0 - std::pow(st.beta2, st.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].p;
    const double* g = grads[i].p;
    Vec& m = st.m[i];
    Vec& v = st.v[i];
    for (std::size_t j = 0; j < params[i].n; ++j) {
      m[j] = st.beta1 * m[j] + (1.0 - st.beta1) * g[j];
      v[j] = st.beta2 * v[j] + (1.0 - st.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

// ---- training loop ----

inline double evaluate(const ModelParams& p, const Vocabulary& vocab,
                       const ClozeDataset& data) {
  if (data.examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data.examples) {
    Vec logits = model_forward(p, ex);
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
      if (logits[i] > logits[best]) best = i;
    if (static_cast<int>(best) == vocab.entity_index(ex.answer)) ++correct;
  }
  return static_cast<double>(correct) / data.examples.size();
}

struct EpochRecord {
  int epoch = 0;
  std::string mode;
  std::uint64_t seed = 0;
  double train_loss = 0.0;
  double valid_acc = 0.0;
  long wall_ms = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;
};

inline void write_log_line(std::ostream& out, const EpochRecord& r) {
  out << "{\"epoch\":" << r.epoch << ",\"mode\":\"" << r.mode
      << "\",\"seed\":" << r.seed << ",\"train_loss\":" << r.train_loss
      << ",\"valid_acc\":" << r.valid_acc << ",\"wall_ms\":" << r.wall_ms
      << "}\n";
}

inline TrainResult train(const TrainConfig& cfg, const GeneratedData& data,
                         std::ostream* log_out = nullptr) {
  ModelParams params =
      make_model(parse_mode(cfg.mode), cfg.k, cfg.d, data.vocab.size(),
                 data.vocab.entity_count, cfg.seed);
  ModelGrads grads(params);
  auto pviews = param_views(params);
  auto gviews = grad_views(grads);
  AdamState adam;
  adam.lr = cfg.lr;
  adam.init(pviews);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(data.train.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      zero_grads(gviews);
      for (std::size_t i = start; i < end; ++i) {
        const ClozeExample& ex = data.train.examples[order[i]];
        ModelForwardCache cache;
        Vec logits = model_forward(params, ex, &cache);
        double loss =
            model_backward(params, ex, data.vocab.entity_index(ex.answer),
                           cache, logits, grads);
        if (!std::isfinite(loss))
          throw std::runtime_error("train: divergence detected (loss is not finite) at epoch " +
                                   std::to_string(epoch));
        loss_sum += loss;
        ++seen;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& v : gviews)
        for (std::size_t j = 0; j < v.n; ++j) v.p[j] *= inv;
      clip_grads(gviews, 5.0);
      adam_step(pviews, gviews, adam);
    }
    const double acc = evaluate(params, data.vocab, data.valid);
    const auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec{epoch, cfg.mode, cfg.seed, loss_sum / std::max<std::size_t>(1, seen),
                    acc,
                    static_cast<long>(std::chrono::duration_cast<
                                          std::chrono::milliseconds>(t1 - t0)
                                          .count())};
    if (log_out) write_log_line(*log_out, rec);
    result.log.push_back(rec);
  }
  result.params = std::move(params);
  return result;
}

inline TrainResult train(const TrainConfig& cfg, std::ostream* log_out = nullptr) {
  GeneratedData data = generate_synthetic_cloze(cfg, cfg.seed);
  return train(cfg, data, log_out);
}

}  // namespace latt
