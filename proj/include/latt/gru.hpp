#pragma once

// Token embedding and single-layer GRU encoders with manual backward passes.
// Document and query encoders use disjoint parameter sets.

#include <cstdint>
#include <random>
#include <vector>

#include "latt/attention.hpp"
#include "latt/linalg.hpp"

namespace latt {

struct EmbeddingTable {
  Mat E;  // V x d
  std::size_t vocab() const { return E.rows; }
  std::size_t dim() const { return E.cols; }
};

struct GRUParams {
  // input-to-hidden (k x d), hidden-to-hidden (k x k), bias (k)
  Mat Wz, Uz;
  Vec bz;
  Mat Wr, Ur;
  Vec br;
  Mat Wh, Uh;
  Vec bh;

  std::size_t k() const { return Wz.rows; }
  std::size_t d() const { return Wz.cols; }
};

inline Mat uniform_mat(std::size_t rows, std::size_t cols, std::size_t fan_in,
                       std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-s, s);
  Mat m(rows, cols);
  for (double& v : m.a) v = dist(rng);
  return m;
}

inline GRUParams make_gru(std::size_t k, std::size_t d, std::mt19937_64& rng) {
  GRUParams p;
  p.Wz = uniform_mat(k, d, d, rng);
  p.Uz = uniform_mat(k, k, k, rng);
  p.bz = Vec(k, 0.0);
  p.Wr = uniform_mat(k, d, d, rng);
  p.Ur = uniform_mat(k, k, k, rng);
  p.br = Vec(k, 0.0);
  p.Wh = uniform_mat(k, d, d, rng);
  p.Uh = uniform_mat(k, k, k, rng);
  p.bh = Vec(k, 0.0);
  return p;
}

inline EmbeddingTable make_embedding(std::size_t vocab, std::size_t d,
                                     std::mt19937_64& rng) {
  return EmbeddingTable{uniform_mat(vocab, d, d, rng)};
}

inline Mat embed(const std::vector<int>& tokens, const EmbeddingTable& table) {
  Mat out(tokens.size(), table.dim());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    require(tokens[t] >= 0 &&
                static_cast<std::size_t>(tokens[t]) < table.vocab(),
            "embed: token id out of range");
    const double* src = table.E.row(tokens[t]);
    std::copy(src, src + table.dim(), out.row(t));
  }
  return out;
}

struct GRUStepCache {
  Vec x, h_prev, z, r, hcand;
};

// z = sig(Wz x + Uz h + bz); r = sig(Wr x + Ur h + br);
// hcand = tanh(Wh x + Uh (r.h) + bh); h' = (1-z).h + z.hcand
inline Vec gru_step(const Vec& x, const Vec& h_prev, const GRUParams& p,
                    GRUStepCache* cache = nullptr) {
  const std::size_t k = p.k();
  require(x.size() == p.d() && h_prev.size() == k, "gru_step: dimension mismatch");

  Vec z = matvec(p.Wz, x);
  axpy_into(1.0, matvec(p.Uz, h_prev), z);
  for (std::size_t i = 0; i < k; ++i) z[i] = sigmoid(z[i] + p.bz[i]);

  Vec r = matvec(p.Wr, x);
  axpy_into(1.0, matvec(p.Ur, h_prev), r);
  for (std::size_t i = 0; i < k; ++i) r[i] = sigmoid(r[i] + p.br[i]);

  Vec rh = elementwise_mul(r, h_prev);
  Vec hcand = matvec(p.Wh, x);
  axpy_into(1.0, matvec(p.Uh, rh), hcand);
  for (std::size_t i = 0; i < k; ++i) hcand[i] = std::tanh(hcand[i] + p.bh[i]);

  Vec h(k);
  for (std::size_t i = 0; i < k; ++i)
    h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hcand[i];

  if (cache) *cache = GRUStepCache{x, h_prev, std::move(z), std::move(r), std::move(hcand)};
  return h;
}

struct EncoderOutput {
  HiddenStates states;             // one row per token
  std::vector<GRUStepCache> cache; // per-step activations for backward
};

inline EncoderOutput encode_document(const std::vector<int>& tokens,
                                     const EmbeddingTable& table,
                                     const GRUParams& p) {
  const std::size_t k = p.k();
  EncoderOutput out;
  out.states.H = Mat(tokens.size(), k);
  out.cache.resize(tokens.size());
  Vec h(k, 0.0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    Vec x(table.dim());
    require(tokens[t] >= 0 &&
                static_cast<std::size_t>(tokens[t]) < table.vocab(),
            "encode_document: token id out of range");
    const double* src = table.E.row(tokens[t]);
    std::copy(src, src + table.dim(), x.begin());
    h = gru_step(x, h, p, &out.cache[t]);
    std::copy(h.begin(), h.end(), out.states.H.row(t));
  }
  return out;
}

inline Vec encode_query(const std::vector<int>& tokens,
                        const EmbeddingTable& table, const GRUParams& p,
                        std::vector<GRUStepCache>* cache = nullptr) {
  require(!tokens.empty(), "encode_query: empty query");
  if (cache) cache->resize(tokens.size());
  Vec h(p.k(), 0.0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    Vec x(table.dim());
    require(tokens[t] >= 0 &&
                static_cast<std::size_t>(tokens[t]) < table.vocab(),
            "encode_query: token id out of range");
    const double* src = table.E.row(tokens[t]);
    std::copy(src, src + table.dim(), x.begin());
    h = gru_step(x, h, p, cache ? &(*cache)[t] : nullptr);
  }
  return h;
}

struct GRUGrads {
  Mat dWz, dUz;
  Vec dbz;
  Mat dWr, dUr;
  Vec dbr;
  Mat dWh, dUh;
  Vec dbh;

  explicit GRUGrads(const GRUParams& p)
      : dWz(p.Wz.rows, p.Wz.cols), dUz(p.Uz.rows, p.Uz.cols), dbz(p.bz.size(), 0.0),
        dWr(p.Wr.rows, p.Wr.cols), dUr(p.Ur.rows, p.Ur.cols), dbr(p.br.size(), 0.0),
        dWh(p.Wh.rows, p.Wh.cols), dUh(p.Uh.rows, p.Uh.cols), dbh(p.bh.size(), 0.0) {}
};

// Backward through a GRU chain. dstates holds the upstream gradient on each
// hidden state (one row per step). Embedding gradients are accumulated into
// dE (V x d) at the rows of the tokens actually seen. Returns dh_0.
inline Vec gru_backward(const std::vector<GRUStepCache>& cache,
                        const Mat& dstates, const std::vector<int>& tokens,
                        const GRUParams& p, GRUGrads& grads, Mat& dE) {
  const std::size_t n = cache.size();
  const std::size_t k = p.k();
  require(dstates.rows == n && dstates.cols == k,
          "gru_backward: gradient shape mismatch");
  require(tokens.size() == n, "gru_backward: token/cache length mismatch");

  Vec carry(k, 0.0);
  for (std::size_t rt = n; rt-- > 0;) {
    const GRUStepCache& c = cache[rt];
    Vec dh(k);
    for (std::size_t i = 0; i < k; ++i) dh[i] = dstates(rt, i) + carry[i];

    Vec dz(k), dhcand(k), dh_prev(k);
    for (std::size_t i = 0; i < k; ++i) {
      dz[i] = dh[i] * (c.hcand[i] - c.h_prev[i]);
      dhcand[i] = dh[i] * c.z[i];
      dh_prev[i] = dh[i] * (1.0 - c.z[i]);
    }

    Vec dpre_h(k);
    for (std::size_t i = 0; i < k; ++i)
      dpre_h[i] = dhcand[i] * (1.0 - c.hcand[i] * c.hcand[i]);

    Vec rh = elementwise_mul(c.r, c.h_prev);
    Vec drh(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      grads.dbh[i] += dpre_h[i];
      for (std::size_t j = 0; j < p.d(); ++j) grads.dWh(i, j) += dpre_h[i] * c.x[j];
      for (std::size_t j = 0; j < k; ++j) {
        grads.dUh(i, j) += dpre_h[i] * rh[j];
        drh[j] += p.Uh(i, j) * dpre_h[i];
      }
    }

    Vec dr(k), dpre_r(k), dpre_z(k);
    for (std::size_t i = 0; i < k; ++i) {
      dr[i] = drh[i] * c.h_prev[i];
      dh_prev[i] += drh[i] * c.r[i];
      dpre_r[i] = dr[i] * c.r[i] * (1.0 - c.r[i]);
      dpre_z[i] = dz[i] * c.z[i] * (1.0 - c.z[i]);
    }

    Vec dx(p.d(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      grads.dbr[i] += dpre_r[i];
      grads.dbz[i] += dpre_z[i];
      for (std::size_t j = 0; j < p.d(); ++j) {
        grads.dWr(i, j) += dpre_r[i] * c.x[j];
        grads.dWz(i, j) += dpre_z[i] * c.x[j];
        dx[j] += p.Wr(i, j) * dpre_r[i] + p.Wz(i, j) * dpre_z[i] +
                 p.Wh(i, j) * dpre_h[i];
      }
      for (std::size_t j = 0; j < k; ++j) {
        grads.dUr(i, j) += dpre_r[i] * c.h_prev[j];
        grads.dUz(i, j) += dpre_z[i] * c.h_prev[j];
        dh_prev[j] += p.Ur(i, j) * dpre_r[i] + p.Uz(i, j) * dpre_z[i];
      }
    }

    for (std::size_t j = 0; j < p.d(); ++j) dE(tokens[rt], j) += dx[j];
    carry = std::move(dh_prev);
  }
  return carry;
}

}  // namespace latt
