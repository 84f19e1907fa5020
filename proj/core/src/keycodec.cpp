#include "stridx/keycodec.hpp"

#include <string>

#include "stridx/error.hpp"

namespace stridx {

void encode_into(std::string_view key, std::size_t key_len, double* out) {
  if (key.empty()) throw EmptyKeyError("encode: empty key");
  const std::size_t copy = key.size() < key_len ? key.size() : key_len;
  for (std::size_t i = 0; i < copy; ++i) {
    out[i] = static_cast<double>(static_cast<unsigned char>(key[i]));
  }
  for (std::size_t i = copy; i < key_len; ++i) out[i] = 0.0;
  out[key_len] = 1.0;
}

EncodedKey encode(std::string_view key, std::size_t key_len) {
  EncodedKey e;
  e.features.resize(key_len + 1);
  encode_into(key, key_len, e.features.data());
  e.raw.assign(key);
  return e;
}

std::pair<DenseMatrix, Vector> matricize(const std::vector<EncodedKey>& keys,
                                         const std::vector<std::uint64_t>& positions) {
  if (keys.empty()) throw EmptyTrainingSetError("matricize: no training keys");
  if (keys.size() != positions.size()) {
    throw ShapeError("matricize: " + std::to_string(keys.size()) + " keys vs " +
                     std::to_string(positions.size()) + " positions");
  }
  const std::size_t p = keys.front().features.size();
  DenseMatrix x(keys.size(), p);
  Vector y(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].features.size() != p) {
      throw ShapeError("matricize: inconsistent feature lengths");
    }
    double* row = x.row_ptr(i);
    for (std::size_t j = 0; j < p; ++j) row[j] = keys[i].features[j];
    y[i] = static_cast<double>(positions[i]);
  }
  x.check_finite("matricize");
  return {std::move(x), std::move(y)};
}

}  // namespace stridx
