#include "stridx/matrix.hpp"

#include <cmath>
#include <string>

namespace stridx {

namespace {

void throw_non_finite(const char* context) {
  throw NumericalError(std::string(context) + ": non-finite value");
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("DenseMatrix: dimensions must be positive, got " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0 || rows.begin()->size() == 0) {
    throw ShapeError("DenseMatrix::from_rows: empty input");
  }
  DenseMatrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != m.cols()) {
      throw ShapeError("DenseMatrix::from_rows: ragged rows");
    }
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  m.check_finite("DenseMatrix::from_rows");
  return m;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::check_finite(const char* context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw_non_finite(context);
  }
}

Vector Vector::from(std::vector<double> values) {
  Vector v;
  v.data_ = std::move(values);
  v.check_finite("Vector::from");
  return v;
}

void Vector::check_finite(const char* context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw_non_finite(context);
  }
}

RFactor::RFactor(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {
  if (dim == 0) throw ShapeError("RFactor: dimension must be positive");
}

RFactor RFactor::from_upper(const DenseMatrix& m) {
  if (m.rows() != m.cols()) {
    throw ShapeError("RFactor::from_upper: matrix must be square");
  }
  m.check_finite("RFactor::from_upper");
  RFactor r(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j < i && m(i, j) != 0.0) {
        throw ShapeError("RFactor::from_upper: nonzero below diagonal");
      }
      r.at(i, j) = m(i, j);
    }
  }
  return r;
}

DenseMatrix RFactor::to_matrix() const {
  DenseMatrix m(dim_, dim_);
  m.data() = data_;
  return m;
}

}  // namespace stridx
