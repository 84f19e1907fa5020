#include "stridx/model.hpp"

#include <cmath>
#include <string>

#include "stridx/error.hpp"

namespace stridx {

namespace {

void fit_over(LinearModel& m, const std::vector<std::string>& keys,
              const std::uint64_t* positions) {
  if (keys.empty()) throw EmptyTrainingSetError("fit_bounds: no training keys");
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const std::uint64_t pos = positions == nullptr ? i : positions[i];
    const double pred = predict(m, keys[i]);
    const std::int64_t off = static_cast<std::int64_t>(pos) - round_half_away(pred);
    if (off < lo) lo = off;
    if (off > hi) hi = off;
    abs_sum += std::fabs(static_cast<double>(pos) - pred);
  }
  m.err_min = lo;
  m.err_max = hi;
  m.mean_abs_err = abs_sum / static_cast<double>(keys.size());
}

}  // namespace

std::int64_t round_half_away(double v) noexcept { return std::llround(v); }

double predict(const LinearModel& m, std::string_view key) {
  const std::size_t key_len = m.key_len();
  const std::size_t copy = key.size() < key_len ? key.size() : key_len;
  const double* beta = m.beta.data().data();
  double acc = beta[key_len];  // intercept; zero-padded byte slots contribute nothing
  for (std::size_t i = 0; i < copy; ++i) {
    acc += beta[i] * static_cast<double>(static_cast<unsigned char>(key[i]));
  }
  return acc;
}

void fit_bounds(LinearModel& m, const std::vector<std::string>& keys) {
  fit_over(m, keys, nullptr);
}

void fit_bounds(LinearModel& m, const std::vector<std::string>& keys,
                const std::vector<std::uint64_t>& positions) {
  if (keys.size() != positions.size()) {
    throw ShapeError("fit_bounds: " + std::to_string(keys.size()) + " keys vs " +
                     std::to_string(positions.size()) + " positions");
  }
  fit_over(m, keys, positions.data());
}

}  // namespace stridx
