#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "latt/gru.hpp"
#include "test_util.hpp"

using namespace latt;
using latt_test::fd_check;
using latt_test::random_mat;
using latt_test::random_vec;

namespace {

GRUParams random_gru(std::size_t k, std::size_t d, std::mt19937_64& rng) {
  GRUParams p;
  p.Wz = random_mat(k, d, rng); p.Uz = random_mat(k, k, rng); p.bz = random_vec(k, rng);
  p.Wr = random_mat(k, d, rng); p.Ur = random_mat(k, k, rng); p.br = random_vec(k, rng);
  p.Wh = random_mat(k, d, rng); p.Uh = random_mat(k, k, rng); p.bh = random_vec(k, rng);
  return p;
}

}  // namespace

TEST_CASE("embed") {
  std::mt19937_64 rng(1);
  EmbeddingTable table{random_mat(5, 3, rng)};

  Mat empty = embed({}, table);
  CHECK(empty.rows == 0);
  CHECK(empty.cols == 3);

  Mat two = embed({3, 3}, table);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(two(0, j) == table.E(3, j));
    CHECK(two(1, j) == two(0, j));
  }

  EmbeddingTable onehot{Mat::identity(4)};
  Mat ind = embed({2, 0}, onehot);
  CHECK(ind(0, 2) == 1.0);
  CHECK(ind(0, 0) == 0.0);
  CHECK(ind(1, 0) == 1.0);

  CHECK_THROWS_AS(embed({5}, table), std::invalid_argument);
  CHECK_THROWS_AS(embed({-1}, table), std::invalid_argument);
}

TEST_CASE("gru_step: zero params give zero state") {
  GRUParams p;
  p.Wz = Mat(3, 2); p.Uz = Mat(3, 3); p.bz = Vec(3, 0.0);
  p.Wr = Mat(3, 2); p.Ur = Mat(3, 3); p.br = Vec(3, 0.0);
  p.Wh = Mat(3, 2); p.Uh = Mat(3, 3); p.bh = Vec(3, 0.0);
  Vec h = gru_step(Vec{1.0, -2.0}, Vec(3, 0.0), p);
  for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("gru_step: carry gate holds the previous state") {
  std::mt19937_64 rng(2);
  GRUParams p = random_gru(3, 2, rng);
  p.bz = Vec(3, -30.0);  // z ~ 0 regardless of input
  p.Wz = Mat(3, 2);
  p.Uz = Mat(3, 3);
  Vec h_prev = random_vec(3, rng);
  Vec h = gru_step(random_vec(2, rng), h_prev, p);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(h[i] - h_prev[i]) < 1e-9);
}

TEST_CASE("gru_step matches the step-by-step oracle") {
  std::mt19937_64 rng(3);
  const std::size_t k = 3, d = 2;
  GRUParams p = random_gru(k, d, rng);
  Vec x = random_vec(d, rng), h_prev = random_vec(k, rng);

  // independent elementwise evaluation
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  Vec expect(k);
  for (std::size_t i = 0; i < k; ++i) {
    double zpre = p.bz[i], rpre = p.br[i];
    for (std::size_t j = 0; j < d; ++j) {
      zpre += p.Wz(i, j) * x[j];
      rpre += p.Wr(i, j) * x[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      zpre += p.Uz(i, j) * h_prev[j];
      rpre += p.Ur(i, j) * h_prev[j];
    }
    double z = sig(zpre), r_unused = sig(rpre);
    (void)r_unused;
    double hpre = p.bh[i];
    for (std::size_t j = 0; j < d; ++j) hpre += p.Wh(i, j) * x[j];
    for (std::size_t j = 0; j < k; ++j) {
      double rj_pre = p.br[j];
      for (std::size_t jj = 0; jj < d; ++jj) rj_pre += p.Wr(j, jj) * x[jj];
      for (std::size_t jj = 0; jj < k; ++jj) rj_pre += p.Ur(j, jj) * h_prev[jj];
      hpre += p.Uh(i, j) * sig(rj_pre) * h_prev[j];
    }
    expect[i] = (1.0 - z) * h_prev[i] + z * std::tanh(hpre);
  }

  Vec got = gru_step(x, h_prev, p);
  for (std::size_t i = 0; i < k; ++i)
    CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("encode_document basics") {
  std::mt19937_64 rng(4);
  EmbeddingTable table{random_mat(6, 2, rng)};
  GRUParams p = random_gru(3, 2, rng);

  EncoderOutput empty = encode_document({}, table, p);
  CHECK(empty.states.n() == 0);

  EncoderOutput one = encode_document({4}, table, p);
  Vec x(table.E.row(4), table.E.row(4) + 2);
  Vec expect = gru_step(x, Vec(3, 0.0), p);
  for (std::size_t j = 0; j < 3; ++j) CHECK(one.states.H(0, j) == expect[j]);
}

TEST_CASE("query encoder state approaches a fixed point on repeated input") {
  std::mt19937_64 rng(5);
  EmbeddingTable table{random_mat(4, 3, rng)};
  GRUParams p = make_gru(4, 3, rng);

  std::vector<int> tokens(60, 2);
  EncoderOutput out = encode_document(tokens, table, p);
  // step-to-step movement shrinks over the last 10 steps
  std::vector<double> deltas;
  for (std::size_t t = 49; t < 59; ++t) {
    double d2 = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      double diff = out.states.H(t + 1, j) - out.states.H(t, j);
      d2 += diff * diff;
    }
    deltas.push_back(std::sqrt(d2));
  }
  for (std::size_t i = 1; i < deltas.size(); ++i)
    CHECK(deltas[i] <= deltas[i - 1] + 1e-12);

  CHECK_THROWS_AS(encode_query({}, table, p), std::invalid_argument);
}

TEST_CASE("document and query encoders are isolated") {
  std::mt19937_64 rng(6);
  EmbeddingTable doc_emb{random_mat(6, 2, rng)};
  GRUParams doc_p = random_gru(3, 2, rng);
  GRUParams query_p = random_gru(3, 2, rng);

  std::vector<int> tokens{1, 4, 2};
  EncoderOutput before = encode_document(tokens, doc_emb, doc_p);
  query_p.Wz(0, 0) += 100.0;  // mutate the query encoder only
  EncoderOutput after = encode_document(tokens, doc_emb, doc_p);
  CHECK(before.states.H == after.states.H);
}

TEST_CASE("state entries stay in (-1, 1) from a zero start") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 20; ++it) {
    EmbeddingTable table{random_mat(8, 4, rng)};
    GRUParams p = random_gru(5, 4, rng);
    std::vector<int> tokens;
    for (int t = 0; t < 30; ++t) tokens.push_back(static_cast<int>(rng() % 8));
    EncoderOutput out = encode_document(tokens, table, p);
    for (double v : out.states.H.a) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("deterministic initialization and encoding") {
  std::mt19937_64 rng_a(42), rng_b(42);
  GRUParams a = make_gru(4, 3, rng_a), b = make_gru(4, 3, rng_b);
  CHECK(a.Wz == b.Wz);
  CHECK(a.Uh == b.Uh);
  CHECK(a.bz == b.bz);

  EmbeddingTable ta = make_embedding(5, 3, rng_a), tb = make_embedding(5, 3, rng_b);
  CHECK(ta.E == tb.E);
  std::vector<int> tokens{0, 3, 1, 4};
  CHECK(encode_document(tokens, ta, a).states.H ==
        encode_document(tokens, tb, b).states.H);
}

TEST_CASE("gru_backward: zero upstream gives zero grads, dE sparsity") {
  std::mt19937_64 rng(8);
  EmbeddingTable table{random_mat(6, 2, rng)};
  GRUParams p = random_gru(3, 2, rng);
  std::vector<int> tokens{1, 4};
  EncoderOutput out = encode_document(tokens, table, p);

  GRUGrads grads(p);
  Mat dE(6, 2);
  Vec dh0 = gru_backward(out.cache, Mat(2, 3), tokens, p, grads, dE);
  for (double v : grads.dWz.a) CHECK(v == 0.0);
  for (double v : grads.dUh.a) CHECK(v == 0.0);
  for (double v : dh0) CHECK(v == 0.0);
  for (double v : dE.a) CHECK(v == 0.0);

  // nonzero upstream: gradient reaches only the rows of seen tokens
  Mat up(2, 3, 1.0);
  gru_backward(out.cache, up, tokens, p, grads, dE);
  bool row1 = false, row4 = false;
  for (std::size_t j = 0; j < 2; ++j) {
    row1 = row1 || dE(1, j) != 0.0;
    row4 = row4 || dE(4, j) != 0.0;
  }
  CHECK(row1);
  CHECK(row4);
  for (int row : {0, 2, 3, 5})
    for (std::size_t j = 0; j < 2; ++j) CHECK(dE(row, j) == 0.0);
}

TEST_CASE("gru_backward matches finite differences") {
  std::mt19937_64 rng(9);
  for (int it = 0; it < 50; ++it) {
    const std::size_t k = 2, d = 2, n = 3;
    EmbeddingTable table{random_mat(4, d, rng)};
    GRUParams p = random_gru(k, d, rng);
    std::vector<int> tokens;
    for (std::size_t t = 0; t < n; ++t) tokens.push_back(static_cast<int>(rng() % 4));
    Mat upstream = random_mat(n, k, rng);

    auto loss = [&]() {
      EncoderOutput out = encode_document(tokens, table, p);
      double s = 0;
      for (std::size_t i = 0; i < out.states.H.a.size(); ++i)
        s += upstream.a[i] * out.states.H.a[i];
      return s;
    };

    EncoderOutput out = encode_document(tokens, table, p);
    GRUGrads grads(p);
    Mat dE(4, d);
    gru_backward(out.cache, upstream, tokens, p, grads, dE);

    CHECK(fd_check(loss, p.Wz.a.data(), grads.dWz.a.data(), k * d) < 1e-4);
    CHECK(fd_check(loss, p.Uz.a.data(), grads.dUz.a.data(), k * k) < 1e-4);
    CHECK(fd_check(loss, p.Wr.a.data(), grads.dWr.a.data(), k * d) < 1e-4);
    CHECK(fd_check(loss, p.Ur.a.data(), grads.dUr.a.data(), k * k) < 1e-4);
    CHECK(fd_check(loss, p.Wh.a.data(), grads.dWh.a.data(), k * d) < 1e-4);
    CHECK(fd_check(loss, p.Uh.a.data(), grads.dUh.a.data(), k * k) < 1e-4);
    CHECK(fd_check(loss, p.bz.data(), grads.dbz.data(), k) < 1e-4);
    CHECK(fd_check(loss, p.br.data(), grads.dbr.data(), k) < 1e-4);
    CHECK(fd_check(loss, p.bh.data(), grads.dbh.data(), k) < 1e-4);
    CHECK(fd_check(loss, table.E.a.data(), dE.a.data(), 4 * d) < 1e-4);
  }
}
