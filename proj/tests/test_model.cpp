#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "stridx/error.hpp"
#include "stridx/iqrd.hpp"
#include "stridx/keycodec.hpp"
#include "stridx/linalg.hpp"
#include "stridx/model.hpp"

using stridx::LinearModel;
using stridx::Vector;

namespace {

// Full training pipeline over a sorted key array whose positions are the
// array indices: encode, factorize, solve, refit bounds.
LinearModel train_on(const std::vector<std::string>& sorted_keys, std::size_t key_len) {
  std::vector<stridx::EncodedKey> encoded;
  std::vector<std::uint64_t> positions;
  for (std::size_t i = 0; i < sorted_keys.size(); ++i) {
    encoded.push_back(stridx::encode(sorted_keys[i], key_len));
    positions.push_back(i);
  }
  auto [x, y] = stridx::matricize(encoded, positions);
  auto r = stridx::parallel_qrd(x);
  Vector xty = stridx::xty_accumulate(stridx::Vector(key_len + 1), x, y);
  LinearModel m;
  try {
    m.beta = stridx::solve_beta(r, xty);
  } catch (const stridx::SingularError&) {
    // Degenerate design: constant model at the mean position, as the
    // training path does.
    m.beta = stridx::Vector(key_len + 1);
    m.beta[key_len] = (static_cast<double>(sorted_keys.size()) - 1.0) / 2.0;
  }
  m.epoch = 1;
  stridx::fit_bounds(m, sorted_keys);
  return m;
}

}  // namespace

TEST_CASE("rounding goes half away from zero") {
  CHECK(stridx::round_half_away(2.5) == 3);
  CHECK(stridx::round_half_away(-2.5) == -3);
  CHECK(stridx::round_half_away(2.4) == 2);
  CHECK(stridx::round_half_away(-0.4) == 0);
  CHECK(stridx::round_half_away(0.0) == 0);
}

TEST_CASE("a constant model predicts its intercept everywhere") {
  LinearModel m;
  m.beta = stridx::Vector(4);  // key_len 3 + intercept
  m.beta[3] = 42.0;
  CHECK(stridx::predict(m, "abc") == 42.0);
  CHECK(stridx::predict(m, "zz") == 42.0);
}

TEST_CASE("an exactly linear layout fits with zero-width bounds") {
  // Keys whose single byte steps uniformly: position is affine in the byte.
  std::vector<std::string> keys;
  for (char c = 'a'; c <= 'z'; ++c) keys.push_back(std::string(1, c));
  auto m = train_on(keys, 1);
  CHECK(m.err_min == 0);
  CHECK(m.err_max == 0);
  CHECK(m.mean_abs_err <= 1e-6);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    CHECK(stridx::round_half_away(stridx::predict(m, keys[i])) == static_cast<std::int64_t>(i));
  }
}

TEST_CASE("bounds bracket every trained key on random corpora") {
  std::mt19937_64 rng(11);
  std::set<std::string> uniq;
  while (uniq.size() < 1000) uniq.insert(oracle::random_key(rng, 8));
  std::vector<std::string> keys(uniq.begin(), uniq.end());
  auto m = train_on(keys, 8);
  CHECK(m.err_min <= 0);
  CHECK(m.err_max >= 0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto slot = stridx::round_half_away(stridx::predict(m, keys[i]));
    CHECK(slot + m.err_min <= static_cast<std::int64_t>(i));
    CHECK(slot + m.err_max >= static_cast<std::int64_t>(i));
  }
}

TEST_CASE("a singleton training set keeps zero inside the bounds") {
  std::vector<std::string> keys{"lonely"};
  auto m = train_on(keys, 6);
  CHECK(m.err_min <= 0);
  CHECK(m.err_max >= 0);
}

TEST_CASE("adversarial duplicate features still yield covering bounds") {
  // All keys share the same first byte and differ only past the feature
  // width, so every feature vector is identical: the model cannot separate
  // them and the bounds must absorb the entire spread.
  std::vector<std::string> keys;
  for (int i = 0; i < 32; ++i) {
    keys.push_back("pfx" + std::string(1, static_cast<char>('a' + i)));
  }
  std::sort(keys.begin(), keys.end());
  std::vector<stridx::EncodedKey> encoded;
  std::vector<std::uint64_t> positions;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    encoded.push_back(stridx::encode(keys[i], 3));
    positions.push_back(i);
  }
  auto [x, y] = stridx::matricize(encoded, positions);
  LinearModel m;
  // The design matrix is rank-1 here, so solve the degenerate system as the
  // trainer would: fall back to an intercept-only model at the mean.
  m.beta = stridx::Vector(4);
  m.beta[3] = 15.5;
  m.epoch = 1;
  stridx::fit_bounds(m, keys);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto slot = stridx::round_half_away(stridx::predict(m, keys[i]));
    CHECK(slot + m.err_min <= static_cast<std::int64_t>(i));
    CHECK(slot + m.err_max >= static_cast<std::int64_t>(i));
  }
}

TEST_CASE("restricted search finds every key in a large corpus") {
  std::mt19937_64 rng(13);
  std::set<std::string> uniq;
  while (uniq.size() < 100000) uniq.insert(oracle::random_key(rng, 10));
  std::vector<std::string> keys(uniq.begin(), uniq.end());
  auto m = train_on(keys, 10);
  const auto n = static_cast<std::int64_t>(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto slot = stridx::round_half_away(stridx::predict(m, keys[i]));
    auto lo = std::clamp<std::int64_t>(slot + m.err_min, 0, n - 1);
    auto hi = std::clamp<std::int64_t>(slot + m.err_max, 0, n - 1);
    // The true position must sit inside the clamped window.
    CHECK(lo <= static_cast<std::int64_t>(i));
    CHECK(hi >= static_cast<std::int64_t>(i));
  }
}

TEST_CASE("bounds over explicit rows merge partial snapshots") {
  std::vector<std::string> keys{"aa", "bb", "cc", "dd"};
  LinearModel m;
  m.beta = stridx::Vector(3);
  m.beta[2] = 1.0;  // constant prediction of 1
  stridx::fit_bounds(m, keys, {0, 1, 2, 3});
  CHECK(m.err_min == -1);
  CHECK(m.err_max == 2);
}

TEST_CASE("fitting over an empty snapshot is rejected") {
  LinearModel m;
  m.beta = stridx::Vector(3);
  std::vector<std::string> none;
  CHECK_THROWS_AS(stridx::fit_bounds(m, none), stridx::EmptyTrainingSetError);
}

TEST_CASE("epochs only ever move forward through the training pipeline") {
  std::mt19937_64 rng(17);
  auto memo = stridx::MemoizedFactor::empty(3);
  std::uint64_t last = memo.epoch;
  for (int rep = 0; rep < 5; ++rep) {
    memo = stridx::absorb(memo, oracle::random_matrix(rng, 4, 3));
    CHECK(memo.epoch > last);
    last = memo.epoch;
  }
}
