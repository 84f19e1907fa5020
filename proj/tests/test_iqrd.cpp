#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stridx/error.hpp"
#include "stridx/iqrd.hpp"
#include "stridx/linalg.hpp"

using stridx::DenseMatrix;
using stridx::MemoizedFactor;
using stridx::RFactor;
using stridx::Vector;

namespace {

double gram_gap(const DenseMatrix& x, const RFactor& r) {
  auto gx = oracle::gram(x);
  auto gr = oracle::gram_of_r(r);
  return oracle::gram_distance(gx, gr) / std::max(oracle::gram_scale(gx), 1.0);
}

DenseMatrix slice_rows(const DenseMatrix& x, std::size_t begin, std::size_t end) {
  DenseMatrix out(end - begin, x.cols());
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i - begin, j) = x(i, j);
  }
  return out;
}

}  // namespace

TEST_CASE("single-chunk parallel factorization equals the direct factorization") {
  std::mt19937_64 rng(5);
  auto x = oracle::random_matrix(rng, 32, 4);
  auto direct = stridx::householder_qrd(x);
  auto chunked = stridx::parallel_qrd(x, 64);  // one chunk covers everything
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(chunked.at(i, j) == direct.at(i, j));
  }
}

TEST_CASE("four-chunk merge tree preserves the Gram product") {
  std::mt19937_64 rng(9);
  auto x = oracle::random_matrix(rng, 64, 4);
  auto r = stridx::parallel_qrd(x, 16);
  CHECK(gram_gap(x, r) <= 1e-9);
}

TEST_CASE("chunked factorization feeds the solver as well as the direct one") {
  std::mt19937_64 rng(13);
  auto x = oracle::random_matrix(rng, 1000, 16, 0.0, 1.0);
  auto yv = oracle::random_vector(rng, 1000);
  Vector xty(16);
  for (std::size_t i = 0; i < 1000; ++i) {
    for (std::size_t j = 0; j < 16; ++j) xty[j] += x(i, j) * yv[i];
  }
  auto beta_chunked = stridx::solve_beta(stridx::parallel_qrd(x, 250), xty);
  auto want = oracle::normal_equation_solve(x, yv);
  CHECK(oracle::rel_vec_err(beta_chunked.data(), want) <= 1e-8);
}

TEST_CASE("chunk size does not change the factor beyond rounding") {
  std::mt19937_64 rng(17);
  auto x = oracle::random_matrix(rng, 512, 8);
  auto full = stridx::householder_qrd(x);
  auto gfull = oracle::gram_of_r(full);
  for (std::size_t chunk : {8u, 32u, 100u, 512u}) {
    auto r = stridx::parallel_qrd(x, chunk);
    CHECK(oracle::gram_distance(gfull, oracle::gram_of_r(r)) <=
          1e-9 * oracle::gram_scale(gfull));
  }
}

TEST_CASE("worker threads produce the same factor as the sequential path") {
  std::mt19937_64 rng(19);
  auto x = oracle::random_matrix(rng, 256, 6);
  auto seq = stridx::parallel_qrd(x, 32, 1);
  auto par = stridx::parallel_qrd(x, 32, 4);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(par.at(i, j) == doctest::Approx(seq.at(i, j)).epsilon(1e-13));
    }
  }
}

TEST_CASE("short chunk tails fold into the previous chunk") {
  std::mt19937_64 rng(21);
  auto x = oracle::random_matrix(rng, 65, 8);  // 65 = 8*8 + 1 trailing row
  auto r = stridx::parallel_qrd(x, 8);
  CHECK(gram_gap(x, r) <= 1e-9);
}

TEST_CASE("absorbing an empty delta is a bit-identical epoch bump") {
  std::mt19937_64 rng(23);
  auto x = oracle::random_matrix(rng, 20, 3);
  MemoizedFactor memo{stridx::householder_qrd(x), 20, 4};
  auto bumped = stridx::absorb(memo, DenseMatrix());
  CHECK(bumped.epoch == 5);
  CHECK(bumped.trained_rows == 20);
  CHECK(bumped.r.data() == memo.r.data());
}

TEST_CASE("absorbing the second half of a matrix matches factoring the whole") {
  auto x = DenseMatrix::from_rows({{1, 2},
                                   {0, 1},
                                   {2, 0},
                                   {1, 1},
                                   {3, 1},
                                   {1, 4},
                                   {2, 2},
                                   {0, 3}});
  auto first = slice_rows(x, 0, 4);
  auto second = slice_rows(x, 4, 8);
  MemoizedFactor memo{stridx::householder_qrd(first), 4, 0};
  auto grown = stridx::absorb(memo, second);
  CHECK(grown.trained_rows == 8);
  CHECK(grown.epoch == 1);
  CHECK(gram_gap(x, grown.r) <= 1e-10);
}

TEST_CASE("absorb handles deltas narrower and wider than the factor dimension") {
  std::mt19937_64 rng(29);
  auto x = oracle::random_matrix(rng, 300, 12);
  auto memo = MemoizedFactor::empty(12);
  std::size_t pos = 0;
  // Mixed batch sizes: some below the dimension (direct stacking) and some
  // above it (inner reduction first).
  for (std::size_t batch : {5u, 3u, 40u, 12u, 140u, 100u}) {
    memo = stridx::absorb(memo, slice_rows(x, pos, pos + batch));
    pos += batch;
  }
  CHECK(pos == 300);
  CHECK(memo.trained_rows == 300);
  CHECK(memo.epoch == 6);
  CHECK(gram_gap(x, memo.r) <= 1e-9);
}

TEST_CASE("memoized growth reproduces the one-shot solution") {
  std::mt19937_64 rng(31);
  const std::size_t p = 6;
  auto x = oracle::random_matrix(rng, 400, p, 0.0, 1.0);
  auto yv = oracle::random_vector(rng, 400, 0.0, 100.0);

  auto memo = MemoizedFactor::empty(p);
  Vector xty(p);
  std::size_t pos = 0;
  while (pos < 400) {
    std::size_t end = std::min<std::size_t>(400, pos + 64);
    auto xd = slice_rows(x, pos, end);
    Vector yd(end - pos);
    for (std::size_t i = pos; i < end; ++i) yd[i - pos] = yv[i];
    memo = stridx::absorb(memo, xd);
    xty = stridx::xty_accumulate(xty, xd, yd);
    pos = end;
  }
  auto beta = stridx::solve_beta(memo.r, xty);
  auto want = oracle::normal_equation_solve(x, yv);
  CHECK(oracle::rel_vec_err(beta.data(), want) <= 1e-8);
}

TEST_CASE("factor footprint depends on dimension only") {
  auto memo = MemoizedFactor::empty(96);
  CHECK(memo.footprint_bytes() == 96 * 96 * 8);
  CHECK(memo.footprint_bytes() == 73728);
  std::mt19937_64 rng(37);
  memo = stridx::absorb(memo, oracle::random_matrix(rng, 500, 96));
  CHECK(memo.footprint_bytes() == 73728);  // unchanged by 500 absorbed rows
}

TEST_CASE("absorb cost does not grow with the rows already summarized") {
  using clock = std::chrono::steady_clock;
  const std::size_t p = 16;
  std::mt19937_64 rng(41);
  auto delta = oracle::random_matrix(rng, 256, p);

  // A factor that has summarized 1e6 rows is still p x p; absorbing into it
  // must cost the same as absorbing into a nearly-empty one.
  MemoizedFactor small{stridx::householder_qrd(oracle::random_matrix(rng, p, p)),
                       p, 1};
  MemoizedFactor big = small;
  big.trained_rows = 1'000'000;

  auto time_absorb = [&](const MemoizedFactor& memo) {
    auto t0 = clock::now();
    for (int rep = 0; rep < 50; ++rep) {
      auto out = stridx::absorb(memo, delta);
      if (out.trained_rows == 0) FAIL("unreachable");
    }
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  double t_small = time_absorb(small);
  double t_big = time_absorb(big);
  CHECK(t_big <= 3.0 * t_small + 0.01);  // identical work modulo timer noise
}

TEST_CASE("merging a zero factor is the identity") {
  std::mt19937_64 rng(43);
  auto x = oracle::random_matrix(rng, 30, 5);
  MemoizedFactor memo{stridx::householder_qrd(x), 30, 2};
  auto merged = stridx::merge_factors(memo, MemoizedFactor::empty(5));
  CHECK(merged.trained_rows == 30);
  auto g0 = oracle::gram_of_r(memo.r);
  auto g1 = oracle::gram_of_r(merged.r);
  CHECK(oracle::gram_distance(g0, g1) <= 1e-12 * oracle::gram_scale(g0));
}

TEST_CASE("merging disjoint halves equals factoring the union") {
  std::mt19937_64 rng(47);
  auto x = oracle::random_matrix(rng, 80, 7);
  MemoizedFactor a{stridx::householder_qrd(slice_rows(x, 0, 48)), 48, 3};
  MemoizedFactor b{stridx::householder_qrd(slice_rows(x, 48, 80)), 32, 9};
  auto merged = stridx::merge_factors(a, b);
  CHECK(merged.trained_rows == 80);
  CHECK(merged.epoch == 10);
  CHECK(gram_gap(x, merged.r) <= 1e-10);

  // Merge order cannot matter at the Gram level.
  auto flipped = stridx::merge_factors(b, a);
  CHECK(oracle::gram_distance(oracle::gram_of_r(merged.r), oracle::gram_of_r(flipped.r)) <=
        1e-12 * oracle::gram_scale(oracle::gram_of_r(merged.r)));
}

TEST_CASE("moment vector accumulation matches direct products") {
  Vector prev{1.0, 2.0};
  auto xd = DenseMatrix::from_rows({{1, 0}, {0, 2}});
  Vector yd{3.0, 4.0};
  auto out = stridx::xty_accumulate(prev, xd, yd);
  CHECK(out[0] == doctest::Approx(4.0));
  CHECK(out[1] == doctest::Approx(10.0));

  // Empty delta: unchanged.
  auto same = stridx::xty_accumulate(prev, DenseMatrix(), Vector());
  CHECK(same[0] == 1.0);
  CHECK(same[1] == 2.0);

  // Two batches equal one batch.
  std::mt19937_64 rng(53);
  auto x = oracle::random_matrix(rng, 40, 5);
  auto yv = oracle::random_vector(rng, 40);
  Vector y0(20), y1(20), yall(40);
  for (std::size_t i = 0; i < 40; ++i) {
    yall[i] = yv[i];
    if (i < 20) y0[i] = yv[i];
    else y1[i - 20] = yv[i];
  }
  auto split = stridx::xty_accumulate(
      stridx::xty_accumulate(Vector(5), slice_rows(x, 0, 20), y0), slice_rows(x, 20, 40), y1);
  auto whole = stridx::xty_accumulate(Vector(5), x, yall);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(split[j] == doctest::Approx(whole[j]).epsilon(1e-12));
  }
}

TEST_CASE("streaming fold equals a one-shot factorization") {
  std::mt19937_64 rng(59);
  auto x = oracle::random_matrix(rng, 3000, 10);
  stridx::StreamingQrd stream(10, 64);
  for (std::size_t i = 0; i < x.rows(); i += 500) {
    stream.push_rows(slice_rows(x, i, std::min<std::size_t>(x.rows(), i + 500)));
  }
  CHECK(stream.rows_folded() == 3000);
  auto r = stream.finish();
  CHECK(gram_gap(x, r) <= 1e-9);
  CHECK_THROWS_AS(stream.finish(), stridx::ShapeError);
}

TEST_CASE("streaming fold of fewer rows than columns still squares up") {
  auto x = DenseMatrix::from_rows({{1, 2, 3}});
  stridx::StreamingQrd stream(3);
  stream.push_rows(x);
  auto r = stream.finish();
  CHECK(r.dim() == 3);
  CHECK(gram_gap(x, r) <= 1e-12);
}

TEST_CASE("dimension mismatches are rejected") {
  auto memo = MemoizedFactor::empty(4);
  std::mt19937_64 rng(61);
  CHECK_THROWS_AS(stridx::absorb(memo, oracle::random_matrix(rng, 3, 5)), stridx::ShapeError);
  CHECK_THROWS_AS(stridx::merge_factors(memo, MemoizedFactor::empty(5)), stridx::ShapeError);
  CHECK_THROWS_AS(stridx::xty_accumulate(Vector(4), oracle::random_matrix(rng, 2, 5), Vector(2)),
                  stridx::ShapeError);
  CHECK_THROWS_AS(stridx::parallel_qrd(oracle::random_matrix(rng, 20, 5), 3),
                  stridx::ShapeError);
}
