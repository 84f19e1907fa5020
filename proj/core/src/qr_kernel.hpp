#pragma once

#include <cstddef>
#include <vector>

#include "stridx/matrix.hpp"

namespace stridx::detail {

// Column-major scratch buffer for in-place Householder passes. Rows can be
// appended below the current fill point without moving existing columns, so a
// triangular factor can sit in the top rows while fresh rows stack beneath it.
struct ColMajorWorkspace {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t capacity_rows = 0;
  std::vector<double> data;  // data[j * capacity_rows + i]

  void reset(std::size_t capacity, std::size_t ncols);
  double* col(std::size_t j) { return data.data() + j * capacity_rows; }
  const double* col(std::size_t j) const { return data.data() + j * capacity_rows; }
  void append_row(const double* row);          // `cols` contiguous doubles
  void append_zero_rows(std::size_t n);
  void load_rows(const DenseMatrix& m, std::size_t row_begin, std::size_t row_end);
};

// Triangularizes the first `w.rows` rows in place; afterwards the top
// cols x cols block is upper triangular with exact zeros below the diagonal
// and unchanged Gram product. Works for any row count, including rows < cols
// (callers wanting a square factor stack zero rows first).
void householder_in_place(ColMajorWorkspace& w);

// Copies the top cols x cols block out as an RFactor.
RFactor extract_upper(const ColMajorWorkspace& w);

}  // namespace stridx::detail
