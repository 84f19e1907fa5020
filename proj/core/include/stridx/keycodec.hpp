#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stridx/matrix.hpp"

namespace stridx {

// A key mapped to model features: one double per byte slot plus a trailing
// constant-one intercept feature.
struct EncodedKey {
  std::vector<double> features;  // key_len + 1 entries
  std::string raw;
};

// Encodes a key into key_len byte features (values 0..255) plus the intercept.
// Keys shorter than key_len are zero-padded; longer keys are truncated
// silently. Embedded NUL bytes are ordinary byte values. Throws EmptyKeyError
// for a zero-length key.
EncodedKey encode(std::string_view key, std::size_t key_len);

// Writes the feature row for a key into `out` (key_len + 1 doubles) without
// allocating. Same padding/truncation rules as encode().
void encode_into(std::string_view key, std::size_t key_len, double* out);

// Assembles the design matrix and target vector for a training snapshot.
// Throws EmptyTrainingSetError when no keys are given and ShapeError when the
// position count disagrees.
std::pair<DenseMatrix, Vector> matricize(const std::vector<EncodedKey>& keys,
                                         const std::vector<std::uint64_t>& positions);

}  // namespace stridx
