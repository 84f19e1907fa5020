#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "stridx/matrix.hpp"

namespace stridx {

// Per-leaf linear position model. The error bounds bracket every trained
// key's true slot relative to its rounded prediction, so a lookup only ever
// scans [round(pred) + err_min, round(pred) + err_max]. Both bounds always
// include zero; a perfect fit yields [0, 0].
struct LinearModel {
  Vector beta;  // key_len byte weights plus trailing intercept weight
  std::int64_t err_min = 0;
  std::int64_t err_max = 0;
  double mean_abs_err = 0.0;
  std::uint64_t epoch = 0;

  std::size_t key_len() const noexcept { return beta.size() == 0 ? 0 : beta.size() - 1; }
};

// Rounds half away from zero: 2.5 -> 3, -2.5 -> -3.
std::int64_t round_half_away(double v) noexcept;

// Raw position estimate for a key; feature width is implied by beta.
double predict(const LinearModel& m, std::string_view key);

// Recomputes the error bounds and mean absolute error over an exhaustive
// training snapshot whose positions are the array indices 0..n-1. Throws
// EmptyTrainingSetError when n == 0.
void fit_bounds(LinearModel& m, const std::vector<std::string>& keys);

// Same, but over explicit (key, position) rows — used when only a subset of
// rows is re-examined and the caller merges the result with prior bounds.
void fit_bounds(LinearModel& m, const std::vector<std::string>& keys,
                const std::vector<std::uint64_t>& positions);

}  // namespace stridx
