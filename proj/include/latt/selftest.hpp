#pragma once

// Self-contained verification suites: kernel equivalences, reversibility,
// and finite-difference gradient checks. Used by the `selftest` CLI
// subcommand.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <string>

#include "latt/attention.hpp"
#include "latt/gru.hpp"
#include "latt/model.hpp"

namespace latt {

// Central finite difference of f with respect to param[i], all i.
// Returns the max relative error against the provided analytic gradient,
// with a denominator floor to avoid blowing up near-zero entries.
inline double fd_max_rel_error(const std::function<double()>& f, double* param,
                               const double* analytic, std::size_t n,
                               double step = 1e-5, double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = param[i];
    param[i] = saved + step;
    const double fp = f();
    param[i] = saved - step;
    const double fm = f();
    param[i] = saved;
    const double num = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::abs(num), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(num - analytic[i]) / denom);
  }
  return worst;
}

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace selftest_detail {

inline Mat random_mat(std::size_t r, std::size_t c, std::mt19937_64& rng,
                      double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(r, c);
  for (double& v : m.a) v = dist(rng);
  return m;
}

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                      double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline std::string fmt_e(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

}  // namespace selftest_detail

inline SuiteResult selftest_kernel_equivalence(std::uint64_t seed = 7) {
  using namespace selftest_detail;
  std::mt19937_64 rng(seed);
  double worst_rel = 0.0, worst_abs = 0.0;
  for (int it = 0; it < 200; ++it) {
    const std::size_t n = 1 + rng() % 64, k = 1 + rng() % 32;
    HiddenStates hs{random_mat(n, k, rng)};
    Vec q = random_vec(k, rng);
    Sketch batch = build_sketch_batch(hs);
    Sketch stream = build_sketch_stream(hs);
    Vec r1 = linear_attention(batch, q);
    Vec r2 = matvec_t(hs.H, matvec(hs.H, q));  // H^T (H q)
    for (std::size_t i = 0; i < k; ++i) {
      const double denom = std::max(std::abs(r2[i]), 1e-30);
      worst_rel = std::max(worst_rel, std::abs(r1[i] - r2[i]) / denom);
    }
    for (std::size_t i = 0; i < batch.C.a.size(); ++i)
      worst_abs = std::max(worst_abs, std::abs(batch.C.a[i] - stream.C.a[i]));
  }
  const bool ok = worst_rel < 1e-10 && worst_abs < 1e-12;
  return {"kernel-equivalence", ok,
          "max rel " + selftest_detail::fmt_e(worst_rel) + ", stream/batch abs " +
              selftest_detail::fmt_e(worst_abs)};
}

// Runs a forward chain, reverses it, and reports the worst per-entry
// reconstruction error across all intermediate sketches.
inline double reverse_chain_error(std::size_t n, std::size_t k,
                                  double alpha_lo, double alpha_hi,
                                  std::uint64_t seed) {
  using namespace selftest_detail;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> alpha_dist(alpha_lo, alpha_hi);
  std::uniform_real_distribution<double> beta_dist(0.0, 1.0);

  StepTape tape;
  std::vector<Sketch> forward_states;  // oracle only
  Sketch c(k);
  for (std::size_t t = 0; t < n; ++t) {
    Vec h = random_vec(k, rng);
    double norm = std::sqrt(dot(h, h));
    if (norm > 1.0)
      for (double& v : h) v /= norm;
    const double a = alpha_dist(rng), b = beta_dist(rng);
    forward_states.push_back(c);
    c = gated_update(c, a, b, h);
    tape.push_back({h, h, a, b});
  }

  double worst = 0.0;
  Sketch back = c;
  for (std::size_t t = n; t-- > 0;) {
    back = reverse_update(back, tape[t].alpha, tape[t].beta, tape[t].f);
    for (std::size_t i = 0; i < back.C.a.size(); ++i)
      worst = std::max(worst,
                       std::abs(back.C.a[i] - forward_states[t].C.a[i]));
  }
  return worst;
}

// The no-decay chain is exactly invertible up to additive roundoff; decaying
// chains amplify roundoff by the product of 1/alpha, so the tolerance for
// the 64-step decaying chain is correspondingly looser.
inline SuiteResult selftest_reversibility(std::uint64_t seed = 7) {
  const double plain = reverse_chain_error(256, 16, 1.0, 1.0, seed);
  const double decayed = reverse_chain_error(64, 16, 0.5, 1.0, seed);
  const bool ok = plain < 1e-8 && decayed < 1e-5;
  return {"reversibility", ok,
          "256-step no-decay err " + selftest_detail::fmt_e(plain) +
              ", 64-step decaying err " + selftest_detail::fmt_e(decayed)};
}

inline SuiteResult selftest_gradients(std::uint64_t seed = 7, int instances = 10) {
  using namespace selftest_detail;
  std::mt19937_64 rng(seed);
  double worst = 0.0;

  // linear attention backward vs finite differences on L = gR . (C q)
  for (int it = 0; it < instances; ++it) {
    const std::size_t n = 2 + rng() % 5, k = 2 + rng() % 3;
    std::vector<Vec> hsv;
    for (std::size_t t = 0; t < n; ++t) hsv.push_back(random_vec(k, rng));
    Vec q = random_vec(k, rng), gR = random_vec(k, rng);
    AttentionGrads g = linear_attention_backward(hsv, q, gR);
    auto loss = [&]() {
      Sketch c(k);
      for (const Vec& h : hsv) c.add_scaled_outer(1.0, h);
      return dot(gR, linear_attention(c, q));
    };
    for (std::size_t t = 0; t < n; ++t)
      worst = std::max(worst, fd_max_rel_error(loss, hsv[t].data(),
                                               g.dH.row(t), k));
    worst = std::max(worst, fd_max_rel_error(loss, q.data(), g.dq.data(), k));
  }

  // gated linear backward
  for (int it = 0; it < instances; ++it) {
    const std::size_t n = 2 + rng() % 4, k = 2 + rng() % 3;
    HiddenStates hs{random_mat(n, k, rng)};
    GateParams gp{random_mat(k, k, rng), random_vec(k, rng)};
    Vec q = random_vec(k, rng), gR = random_vec(k, rng);
    auto loss = [&]() {
      return dot(gR, gated_linear_forward(hs, gp, q).R);
    };
    GatedForwardResult fwd = gated_linear_forward(hs, gp, q);
    AttentionGrads g = gated_linear_backward(fwd.tape, q, gR, gp);
    for (std::size_t t = 0; t < n; ++t)
      worst = std::max(worst,
                       fd_max_rel_error(loss, hs.H.row(t), g.dH.row(t), k));
    worst = std::max(worst, fd_max_rel_error(loss, q.data(), g.dq.data(), k));
    worst = std::max(worst, fd_max_rel_error(loss, gp.W.a.data(), g.dW.a.data(),
                                             k * k));
    worst = std::max(worst, fd_max_rel_error(loss, gp.b.data(), g.db.data(), k));
  }

  const bool ok = worst < 1e-4;
  return {"gradients", ok, "max rel error vs finite differences " + selftest_detail::fmt_e(worst)};
}

inline bool run_selftest(std::ostream& out, std::uint64_t seed = 7) {
  bool all = true;
  for (const SuiteResult& r :
       {selftest_kernel_equivalence(seed), selftest_reversibility(seed),
        selftest_gradients(seed)}) {
    out << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail
        << ")\n";
    all = all && r.passed;
  }
  return all;
}

}  // namespace latt
