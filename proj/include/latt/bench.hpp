#pragma once

// Benchmark harness for the lookup/encoding complexity contract:
// softmax lookups scale with n, sketch lookups do not, and encoding with
// sketch updates costs one extra outer product per token.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "latt/attention.hpp"
#include "latt/gru.hpp"

namespace latt {

struct BenchConfig {
  std::vector<std::size_t> ks = {32, 100};
  std::vector<std::size_t> ns = {250, 1000, 4000};
  std::size_t m = 10000;  // lookups per measurement
  std::size_t trials = 7;
  std::size_t warmup = 2;
  std::uint64_t seed = 1;
};

struct BenchRecord {
  std::string mechanism;
  std::size_t n = 0, k = 0, m = 0;
  double lookup_ns = 0.0;  // median per-lookup wall time
  double encode_ns = 0.0;  // building the representation once
  std::size_t repr_bytes = 0;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

namespace detail {

inline Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Mat m(rows, cols);
  for (double& v : m.a) v = dist(rng);
  return m;
}

inline Vec random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vec v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline double now_ns() {
  return std::chrono::duration<double, std::nano>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace detail

// Keeps results observable so the timed loops cannot be optimized away.
inline volatile double bench_sink = 0.0;

// Times `m` lookups and returns the per-lookup time; repeats the block
// until the measured span comfortably exceeds timer resolution.
template <typename LookupFn>
double time_lookups(LookupFn&& lookup, std::size_t m) {
  constexpr double kMinSpanNs = 2e6;
  std::size_t reps = 1;
  for (;;) {
    const double t0 = detail::now_ns();
    for (std::size_t r = 0; r < reps; ++r)
      for (std::size_t i = 0; i < m; ++i) lookup(i);
    const double span = detail::now_ns() - t0;
    if (span >= kMinSpanNs) return span / static_cast<double>(reps * m);
    reps *= 4;
  }
}

inline std::vector<BenchRecord> bench_lookup(const BenchConfig& cfg) {
  require(cfg.trials >= 5, "bench_lookup: need at least 5 trials");
  std::vector<BenchRecord> records;
  const std::size_t n_queries = 16;  // distinct query vectors, cycled

  for (std::size_t k : cfg.ks) {
    for (std::size_t n : cfg.ns) {
      std::mt19937_64 rng(cfg.seed);  // same seed: same data across (n, k)
      HiddenStates hs{detail::random_mat(n, k, rng)};
      std::vector<Vec> queries;
      for (std::size_t i = 0; i < n_queries; ++i)
        queries.push_back(detail::random_vec(k, rng));

      // softmax mechanism: stores H, each lookup is H^T softmax(H q)
      {
        BenchRecord rec{"softmax", n, k, cfg.m, 0.0, 0.0, 8 * n * k};
        const double e0 = detail::now_ns();
        Mat stored = hs.H;
        rec.encode_ns = detail::now_ns() - e0;
        bench_sink = bench_sink + (stored(0, 0));
        std::vector<double> samples;
        for (std::size_t t = 0; t < cfg.warmup + cfg.trials; ++t) {
          double per = time_lookups(
              [&](std::size_t i) {
                Vec r = softmax_attention(hs, queries[i % n_queries]);
                bench_sink = bench_sink + (r[0]);
              },
              cfg.m);
          if (t >= cfg.warmup) samples.push_back(per);
        }
        rec.lookup_ns = median(samples);
        records.push_back(rec);
      }

      // linear mechanism: stores C, each lookup is C q
      {
        BenchRecord rec{"linear", n, k, cfg.m, 0.0, 0.0, 8 * k * k};
        const double e0 = detail::now_ns();
        Sketch sketch = build_sketch_batch(hs);
        rec.encode_ns = detail::now_ns() - e0;
        bench_sink = bench_sink + (sketch.C(0, 0));
        std::vector<double> samples;
        for (std::size_t t = 0; t < cfg.warmup + cfg.trials; ++t) {
          double per = time_lookups(
              [&](std::size_t i) {
                Vec r = linear_attention(sketch, queries[i % n_queries]);
                bench_sink = bench_sink + (r[0]);
              },
              cfg.m);
          if (t >= cfg.warmup) samples.push_back(per);
        }
        rec.lookup_ns = median(samples);
        records.push_back(rec);
      }
    }
  }
  return records;
}

// Per-token encoding cost with and without the streaming sketch update.
// The overhead ratio with/without estimates (lambda+1)/lambda for the
// encoding complexity comparison.
inline std::vector<BenchRecord> bench_encoding(const BenchConfig& cfg) {
  std::vector<BenchRecord> records;
  for (std::size_t k : cfg.ks) {
    std::mt19937_64 setup(cfg.seed);
    GRUParams gru = make_gru(k, k, setup);
    for (std::size_t n : cfg.ns) {
      std::mt19937_64 rng(cfg.seed);
      std::vector<Vec> inputs;
      for (std::size_t t = 0; t < n; ++t)
        inputs.push_back(detail::random_vec(k, rng));

      auto run = [&](bool with_sketch) {
        std::vector<double> samples;
        for (std::size_t t = 0; t < cfg.warmup + cfg.trials; ++t) {
          const double t0 = detail::now_ns();
          Vec h(k, 0.0);
          SketchBuilder builder(k);
          for (const Vec& x : inputs) {
            h = gru_step(x, h, gru);
            if (with_sketch) builder.push(h);
          }
          bench_sink = bench_sink + (h[0] + (with_sketch ? builder.sketch().C(0, 0) : 0.0));
          const double span = detail::now_ns() - t0;
          if (t >= cfg.warmup) samples.push_back(span);
        }
        return median(samples);
      };

      records.push_back(
          {"softmax", n, k, 1, 0.0, run(false), 8 * n * k});
      records.push_back({"linear", n, k, 1, 0.0, run(true), 8 * k * k});
    }
  }
  return records;
}

inline void write_csv(std::ostream& out, const std::vector<BenchRecord>& recs) {
  out << "mechanism,n,k,m,lookup_ns,encode_ns,repr_bytes\n";
  for (const auto& r : recs)
    out << r.mechanism << ',' << r.n << ',' << r.k << ',' << r.m << ','
        << r.lookup_ns << ',' << r.encode_ns << ',' << r.repr_bytes << '\n';
}

// Least-squares slope of log(time) against log(n); ~1 for linear growth.
inline double fit_loglog_exponent(const std::vector<double>& ns,
                                  const std::vector<double>& times) {
  require(ns.size() == times.size() && ns.size() >= 2,
          "fit_loglog_exponent: need at least 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double x = std::log(ns[i]);
    const double y = std::log(times[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace latt
