#pragma once

// The four attention mechanisms: softmax, basic linear (covariance sketch),
// gated linear, and the generalized gated family with reversible sketch
// recomputation in the backward pass.

#include <cstddef>
#include <functional>
#include <vector>

#include "latt/linalg.hpp"

namespace latt {

// Floor on the decay factor alpha so the reverse recomputation
// (division by alpha at every step) stays well conditioned.
inline constexpr double kAlphaMin = 1e-3;

// Rows are the per-timestep hidden states h_t; n x k.
struct HiddenStates {
  Mat H;
  std::size_t n() const { return H.rows; }
  std::size_t k() const { return H.cols; }
};

// k x k non-centered covariance sketch of a hidden-state stream.
// Builders keep C bitwise symmetric by computing the upper triangle
// and mirroring it.
struct Sketch {
  Mat C;

  Sketch() = default;
  explicit Sketch(std::size_t k) : C(k, k) {}
  explicit Sketch(Mat m) : C(std::move(m)) {
    require(C.rows == C.cols, "Sketch: matrix must be square");
  }

  std::size_t k() const { return C.rows; }

  // C += w * h h^T, mirrored.
  void add_scaled_outer(double w, const Vec& h) {
    require(h.size() == k(), "Sketch: vector dimension mismatch");
    for (std::size_t i = 0; i < k(); ++i) {
      for (std::size_t j = i; j < k(); ++j) {
        C(i, j) += w * h[i] * h[j];
        C(j, i) = C(i, j);
      }
    }
  }

  void scale_in_place(double s) {
    for (double& v : C.a) v *= s;
  }
};

struct GateParams {
  Mat W;  // k x k
  Vec b;  // k
};

struct TapeStep {
  Vec h;
  Vec f;
  double alpha = 1.0;
  double beta = 1.0;
};

// Forward-pass record (h_t, f_t, alpha_t, beta_t) per timestep; everything
// the backward pass needs to re-derive the intermediate sketches.
using StepTape = std::vector<TapeStep>;

struct AttentionGrads {
  Mat dH;   // n x k
  Vec dq;   // k
  Mat dW;   // k x k, gated only
  Vec db;   // k, gated only
};

// R(D,Q) = H^T softmax(H q)
inline Vec softmax_attention(const HiddenStates& hs, const Vec& q) {
  require(q.size() == hs.k(), "softmax_attention: dimension mismatch");
  Vec weights = softmax(matvec(hs.H, q));
  return matvec_t(hs.H, weights);
}

inline Sketch build_sketch_batch(const HiddenStates& hs) {
  Sketch s(hs.k());
  for (std::size_t t = 0; t < hs.n(); ++t) {
    const double* h = hs.H.row(t);
    for (std::size_t i = 0; i < hs.k(); ++i)
      for (std::size_t j = i; j < hs.k(); ++j) {
        s.C(i, j) += h[i] * h[j];
        s.C(j, i) = s.C(i, j);
      }
  }
  return s;
}

// Incremental builder: consumes one state at a time, O(k^2) working memory.
class SketchBuilder {
 public:
  explicit SketchBuilder(std::size_t k) : sketch_(k) {}

  void push(const Vec& h) {
    require(h.size() == sketch_.k(), "SketchBuilder: dimension mismatch");
    sketch_.add_scaled_outer(1.0, h);
  }

  const Sketch& sketch() const { return sketch_; }
  Sketch take() { return std::move(sketch_); }

 private:
  Sketch sketch_;
};

inline Sketch build_sketch_stream(const std::vector<Vec>& hs, std::size_t k) {
  SketchBuilder b(k);
  for (const Vec& h : hs) b.push(h);
  return b.take();
}

inline Sketch build_sketch_stream(const HiddenStates& hs) {
  SketchBuilder b(hs.k());
  Vec h(hs.k());
  for (std::size_t t = 0; t < hs.n(); ++t) {
    std::copy(hs.H.row(t), hs.H.row(t) + hs.k(), h.begin());
    b.push(h);
  }
  return b.take();
}

// R = C q; cost O(k^2), independent of the stream length.
inline Vec linear_attention(const Sketch& c, const Vec& q) {
  require(q.size() == c.k(), "linear_attention: dimension mismatch");
  return matvec(c.C, q);
}

// Backward for R = C q with C = sum_t h_t h_t^T, streamed over the states.
// dh_t = q (h_t . gR) + gR (h_t . q); dq = C gR accumulated as sum h_t (h_t . gR).
inline AttentionGrads linear_attention_backward(const std::vector<Vec>& hs,
                                                const Vec& q,
                                                const Vec& grad_R) {
  const std::size_t k = q.size();
  require(grad_R.size() == k, "linear_attention_backward: dimension mismatch");
  AttentionGrads g;
  g.dH = Mat(hs.size(), k);
  g.dq = Vec(k, 0.0);
  for (std::size_t t = 0; t < hs.size(); ++t) {
    const Vec& h = hs[t];
    require(h.size() == k, "linear_attention_backward: dimension mismatch");
    const double hg = dot(h, grad_R);
    const double hq = dot(h, q);
    double* dh = g.dH.row(t);
    for (std::size_t i = 0; i < k; ++i) {
      dh[i] = q[i] * hg + grad_R[i] * hq;
      g.dq[i] += h[i] * hg;
    }
  }
  return g;
}

// f = sigmoid(W h + b) (.) h
inline Vec gate_features(const Vec& h, const GateParams& gp) {
  require(gp.W.cols == h.size() && gp.b.size() == h.size(),
          "gate_features: dimension mismatch");
  Vec s = matvec(gp.W, h);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = sigmoid(s[i] + gp.b[i]);
  return elementwise_mul(s, h);
}

// C_{t+1} = alpha C_t + beta f f^T
inline Sketch gated_update(const Sketch& c, double alpha, double beta,
                           const Vec& f) {
  require(alpha >= kAlphaMin, "gated_update: alpha below reversibility floor");
  Sketch out = c;
  out.scale_in_place(alpha);
  out.add_scaled_outer(beta, f);
  return out;
}

// Exact algebraic inverse of gated_update: C_t = (C_{t+1} - beta f f^T) / alpha.
inline Sketch reverse_update(const Sketch& c_next, double alpha, double beta,
                             const Vec& f) {
  require(alpha >= kAlphaMin, "reverse_update: alpha below reversibility floor");
  Sketch out = c_next;
  out.add_scaled_outer(-beta, f);
  out.scale_in_place(1.0 / alpha);
  return out;
}

// General gated family: the gate sees (h_{t+1}, C_t h_{t+1}) and decides
// (alpha, beta, f). The sigmoid instance below ignores the sketch input.
struct GateDecision {
  double alpha = 1.0;
  double beta = 1.0;
  Vec f;
};

using GateFn =
    std::function<GateDecision(const Vec& h, const Vec& sketch_times_h)>;

struct GatedForwardResult {
  Vec R;
  StepTape tape;
  Sketch sketch;  // final C_n
};

inline GatedForwardResult gated_forward_general(const HiddenStates& hs,
                                                const GateFn& gate,
                                                const Vec& q) {
  require(q.size() == hs.k(), "gated_forward_general: dimension mismatch");
  GatedForwardResult out;
  out.sketch = Sketch(hs.k());
  out.tape.reserve(hs.n());
  Vec h(hs.k());
  for (std::size_t t = 0; t < hs.n(); ++t) {
    std::copy(hs.H.row(t), hs.H.row(t) + hs.k(), h.begin());
    GateDecision d = gate(h, matvec(out.sketch.C, h));
    require(d.alpha >= kAlphaMin,
            "gated_forward_general: alpha below reversibility floor");
    out.sketch.scale_in_place(d.alpha);
    out.sketch.add_scaled_outer(d.beta, d.f);
    out.tape.push_back({h, std::move(d.f), d.alpha, d.beta});
  }
  out.R = matvec(out.sketch.C, q);
  return out;
}

// Gated linear attention: alpha = beta = 1, f = sigmoid(W h + b) (.) h.
inline GatedForwardResult gated_linear_forward(const HiddenStates& hs,
                                               const GateParams& gp,
                                               const Vec& q) {
  return gated_forward_general(
      hs,
      [&gp](const Vec& h, const Vec&) {
        return GateDecision{1.0, 1.0, gate_features(h, gp)};
      },
      q);
}

// Backward through R = C_n q where C_n was built by gated updates.
// The contribution of f_t carries the product of the later alphas; the
// intermediate sketches are recomputed backwards via reverse_update
// instead of being stored.
inline AttentionGrads gated_linear_backward(const StepTape& tape, const Vec& q,
                                            const Vec& grad_R,
                                            const GateParams& gp) {
  const std::size_t k = q.size();
  require(grad_R.size() == k, "gated_linear_backward: dimension mismatch");
  require(gp.W.rows == k && gp.W.cols == k && gp.b.size() == k,
          "gated_linear_backward: gate parameter shape mismatch");
  const std::size_t n = tape.size();

  // Rebuild C_n from the tape in O(k^2) memory, then walk it backwards.
  Sketch c(k);
  for (const TapeStep& st : tape) {
    require(st.h.size() == k && st.f.size() == k,
            "gated_linear_backward: tape dimension mismatch");
    c.scale_in_place(st.alpha);
    c.add_scaled_outer(st.beta, st.f);
  }

  AttentionGrads g;
  g.dH = Mat(n, k);
  g.dq = matvec(c.C, grad_R);
  g.dW = Mat(k, k);
  g.db = Vec(k, 0.0);

  double alpha_suffix = 1.0;  // product of alpha_{t+1} .. alpha_n
  for (std::size_t rt = n; rt-- > 0;) {
    const TapeStep& st = tape[rt];
    c = reverse_update(c, st.alpha, st.beta, st.f);

    const double w = alpha_suffix * st.beta;
    const double fg = dot(st.f, grad_R);
    const double fq = dot(st.f, q);
    Vec df(k);
    for (std::size_t i = 0; i < k; ++i)
      df[i] = w * (q[i] * fg + grad_R[i] * fq);

    // Chain through f = s (.) h with s = sigmoid(W h + b).
    Vec pre = matvec(gp.W, st.h);
    Vec s(k);
    for (std::size_t i = 0; i < k; ++i) s[i] = sigmoid(pre[i] + gp.b[i]);

    Vec gpre(k);  // df (.) h (.) s (.) (1 - s)
    for (std::size_t i = 0; i < k; ++i)
      gpre[i] = df[i] * st.h[i] * s[i] * (1.0 - s[i]);

    double* dh = g.dH.row(rt);
    for (std::size_t i = 0; i < k; ++i) dh[i] = df[i] * s[i];
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) {
        g.dW(i, j) += gpre[i] * st.h[j];
        dh[j] += gp.W(i, j) * gpre[i];
      }
    }
    for (std::size_t i = 0; i < k; ++i) g.db[i] += gpre[i];

    alpha_suffix *= st.alpha;
  }
  return g;
}

}  // namespace latt
