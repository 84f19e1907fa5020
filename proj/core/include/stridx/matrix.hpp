#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "stridx/error.hpp"

namespace stridx {

// Row-major dense real matrix. All stored values are finite; factories and
// operations that promise success validate this.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  // Zero matrix of the given shape. Throws ShapeError on a zero dimension.
  DenseMatrix(std::size_t rows, std::size_t cols);
  // Builds from nested lists; all rows must have equal length.
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  // Throws NumericalError if any entry is not finite.
  void check_finite(const char* context) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Fixed-length real vector with finite entries.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n) : data_(n, 0.0) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  static Vector from(std::vector<double> values);

  std::size_t size() const noexcept { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  void check_finite(const char* context) const;

 private:
  std::vector<double> data_;
};

// Square upper-triangular factor of a QR decomposition. Entries below the
// diagonal are exact zeros by construction; the footprint depends only on the
// dimension, never on how many rows were folded into the factor.
class RFactor {
 public:
  // Zero factor (the additive identity under Gram accumulation).
  explicit RFactor(std::size_t dim);
  // Validates squareness, finiteness, and exact lower-triangle zeros.
  static RFactor from_upper(const DenseMatrix& m);

  std::size_t dim() const noexcept { return dim_; }
  double at(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
  const std::vector<double>& data() const noexcept { return data_; }
  DenseMatrix to_matrix() const;

  // Bytes held by the factor's payload: dim^2 * sizeof(double).
  std::size_t footprint_bytes() const noexcept { return dim_ * dim_ * sizeof(double); }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

}  // namespace stridx
