#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "latt/linalg.hpp"

using namespace latt;

namespace {

Mat random_mat(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Mat m(r, c);
  for (double& v : m.a) v = dist(rng);
  return m;
}

Vec random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Vec v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("matvec basics") {
  CHECK(matvec(Mat::identity(3), Vec{1, 2, 3}) == Vec{1, 2, 3});
  CHECK(matvec(Mat(2, 2), Vec{5, 7}) == Vec{0, 0});

  Mat m(2, 2);
  m(0, 0) = 1; m(0, 1) = 2; m(1, 0) = 3; m(1, 1) = 4;
  CHECK(matvec(m, Vec{1, 1}) == Vec{3, 7});

  CHECK_THROWS_AS(matvec(m, Vec{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("outer products") {
  Mat e = outer(Vec{1, 0}, Vec{1, 0});
  CHECK(e(0, 0) == 1.0);
  CHECK(e(0, 1) == 0.0);
  CHECK(e(1, 0) == 0.0);
  CHECK(e(1, 1) == 0.0);

  Mat z = outer(Vec{0, 0}, Vec{3, 4, 5});
  for (double v : z.a) CHECK(v == 0.0);

  Mat m = outer(Vec{1, 2}, Vec{3, 4});
  CHECK(m(0, 0) == 3.0);
  CHECK(m(0, 1) == 4.0);
  CHECK(m(1, 0) == 6.0);
  CHECK(m(1, 1) == 8.0);

  // self outer product is exactly symmetric
  std::mt19937_64 rng(3);
  Vec u = random_vec(7, rng);
  Mat s = outer(u, u);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) CHECK(s(i, j) == s(j, i));
}

TEST_CASE("softmax") {
  CHECK(softmax(Vec{42.0}) == Vec{1.0});
  CHECK(softmax(Vec{-1e300}) == Vec{1.0});
  {
    Vec s = softmax(Vec{0, 0});
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  {
    // reference computed with the bare formula at long-double precision
    Vec s = softmax(Vec{1, 2, 3});
    CHECK(s[0] == doctest::Approx(0.09003057317038046).epsilon(1e-13));
    CHECK(s[1] == doctest::Approx(0.24472847105479767).epsilon(1e-13));
    CHECK(s[2] == doctest::Approx(0.66524095577482184).epsilon(1e-13));
  }
  CHECK_THROWS_AS(softmax(Vec{}), std::invalid_argument);

  // large magnitudes stay finite thanks to max subtraction
  Vec s = softmax(Vec{1000, 1001});
  CHECK(std::isfinite(s[0]));
  double sum = s[0] + s[1];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and stays in (0,1]") {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 100; ++it) {
    Vec x = random_vec(1 + rng() % 32, rng);
    Vec s = softmax(x);
    double sum = 0;
    for (double v : s) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("sigmoid and elementwise") {
  CHECK(sigmoid(Vec{0}) == Vec{0.5});
  CHECK(elementwise_mul(Vec{1, 2}, Vec{0, 5}) == Vec{0, 10});
  CHECK_THROWS_AS(elementwise_mul(Vec{1}, Vec{1, 2}), std::invalid_argument);
}

TEST_CASE("matmul and transpose") {
  std::mt19937_64 rng(5);
  Mat m = random_mat(4, 6, rng);
  CHECK(matmul(Mat::identity(4), m) == m);
  CHECK(transpose(transpose(m)) == m);

  // matvec(matmul(A,B), v) == matvec(A, matvec(B, v))
  for (int it = 0; it < 50; ++it) {
    std::size_t a = 1 + rng() % 16, b = 1 + rng() % 16, c = 1 + rng() % 16;
    Mat A = random_mat(a, b, rng), B = random_mat(b, c, rng);
    Vec v = random_vec(c, rng);
    Vec lhs = matvec(matmul(A, B), v);
    Vec rhs = matvec(A, matvec(B, v));
    for (std::size_t i = 0; i < a; ++i) {
      double denom = std::max(std::abs(rhs[i]), 1e-30);
      CHECK(std::abs(lhs[i] - rhs[i]) / denom < 1e-10);
    }
  }

  CHECK_THROWS_AS(matmul(Mat(2, 3), Mat(2, 3)), std::invalid_argument);
}

TEST_CASE("axpy") {
  Mat x(2, 2, 1.0), y(2, 2, 3.0);
  Mat r = axpy(2.0, x, y);
  for (double v : r.a) CHECK(v == 5.0);
  CHECK_THROWS_AS(axpy(1.0, Mat(2, 2), Mat(3, 3)), std::invalid_argument);
}

TEST_CASE("operations are deterministic") {
  std::mt19937_64 rng(17);
  Mat a = random_mat(8, 8, rng);
  Vec v = random_vec(8, rng);
  CHECK(matvec(a, v) == matvec(a, v));
  CHECK(softmax(v) == softmax(v));
  CHECK(matmul(a, a) == matmul(a, a));
}
