#pragma once

// Minimal deterministic dense linear algebra over doubles.
// All loops accumulate left to right; no parallel reductions, so results
// are bitwise reproducible across runs.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace latt {

using Vec = std::vector<double>;

// const char* so the happy path allocates nothing (hot loops validate too)
inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // row-major

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  const double* row(std::size_t i) const { return a.data() + i * cols; }
  double* row(std::size_t i) { return a.data() + i * cols; }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool operator==(const Mat& o) const {
    return rows == o.rows && cols == o.cols && a == o.a;
  }
};

inline double dot(const Vec& u, const Vec& v) {
  require(u.size() == v.size(), "dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline Vec matvec(const Mat& m, const Vec& v) {
  require(m.cols == v.size(), "matvec: dimension mismatch");
  Vec out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += r[j] * v[j];
    out[i] = s;
  }
  return out;
}

// M^T v without materializing the transpose.
inline Vec matvec_t(const Mat& m, const Vec& v) {
  require(m.rows == v.size(), "matvec_t: dimension mismatch");
  Vec out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    const double vi = v[i];
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += r[j] * vi;
  }
  return out;
}

inline Mat outer(const Vec& u, const Vec& v) {
  Mat out(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out(i, j) = u[i] * v[j];
  return out;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  require(a.cols == b.rows, "matmul: dimension mismatch");
  Mat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      const double* br = b.row(k);
      double* orow = out.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * br[j];
    }
  }
  return out;
}

inline Mat transpose(const Mat& m) {
  Mat out(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

// s*X + Y
inline Mat axpy(double s, const Mat& x, const Mat& y) {
  require(x.rows == y.rows && x.cols == y.cols, "axpy: dimension mismatch");
  Mat out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.a.size(); ++i) out.a[i] = s * x.a[i] + y.a[i];
  return out;
}

inline Vec softmax(const Vec& x) {
  require(!x.empty(), "softmax: empty input");
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  Vec out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec sigmoid(const Vec& x) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

inline Vec elementwise_mul(const Vec& u, const Vec& v) {
  require(u.size() == v.size(), "elementwise_mul: dimension mismatch");
  Vec out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] * v[i];
  return out;
}

inline Vec add(const Vec& u, const Vec& v) {
  require(u.size() == v.size(), "add: dimension mismatch");
  Vec out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + v[i];
  return out;
}

inline Vec scale(double s, const Vec& u) {
  Vec out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = s * u[i];
  return out;
}

inline void axpy_into(double s, const Vec& x, Vec& y) {
  require(x.size() == y.size(), "axpy_into: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

}  // namespace latt
