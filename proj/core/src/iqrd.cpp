#include "stridx/iqrd.hpp"

#include <algorithm>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qr_kernel.hpp"
#include "stridx/error.hpp"
#include "stridx/linalg.hpp"

namespace stridx {

namespace {

// Triangularizes [top; m[row_begin:row_end)] where `top` may be a factor or
// empty (dim rows of zeros are stacked when `top` is null so the result is
// always square).
RFactor factor_stacked(const RFactor* top, const DenseMatrix& m, std::size_t row_begin,
                       std::size_t row_end, std::size_t dim) {
  detail::ColMajorWorkspace w;
  w.reset(dim + (row_end - row_begin), dim);
  if (top != nullptr) {
    for (std::size_t i = 0; i < dim; ++i) w.append_row(&top->data()[i * dim]);
  } else {
    w.append_zero_rows(dim);
  }
  w.load_rows(m, row_begin, row_end);
  detail::householder_in_place(w);
  return detail::extract_upper(w);
}

// Plain factorization of a row range that is at least square.
RFactor factor_range(const DenseMatrix& m, std::size_t row_begin, std::size_t row_end) {
  detail::ColMajorWorkspace w;
  w.reset(row_end - row_begin, m.cols());
  w.load_rows(m, row_begin, row_end);
  detail::householder_in_place(w);
  return detail::extract_upper(w);
}

RFactor factor_pair(const RFactor& a, const RFactor& b) {
  detail::ColMajorWorkspace w;
  const std::size_t dim = a.dim();
  w.reset(2 * dim, dim);
  for (std::size_t i = 0; i < dim; ++i) w.append_row(&a.data()[i * dim]);
  for (std::size_t i = 0; i < dim; ++i) w.append_row(&b.data()[i * dim]);
  detail::householder_in_place(w);
  return detail::extract_upper(w);
}

std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t rows,
                                                              std::size_t cols,
                                                              std::size_t chunk_rows) {
  if (chunk_rows == 0) chunk_rows = 4 * cols;
  if (chunk_rows < cols) {
    throw ShapeError("parallel_qrd: chunk_rows " + std::to_string(chunk_rows) +
                     " shorter than column count " + std::to_string(cols));
  }
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t begin = 0;
  while (begin < rows) {
    std::size_t end = std::min(rows, begin + chunk_rows);
    // A trailing remnant shorter than the column count cannot stand alone;
    // fold it into the previous chunk.
    if (rows - end < cols && end < rows) end = rows;
    ranges.emplace_back(begin, end);
    begin = end;
  }
  return ranges;
}

}  // namespace

RFactor parallel_qrd(const DenseMatrix& x, std::size_t chunk_rows, unsigned threads) {
  if (x.rows() == 0 || x.cols() == 0) {
    throw ShapeError("parallel_qrd: empty input");
  }
  x.check_finite("parallel_qrd");
  const std::size_t p = x.cols();
  if (x.rows() < p) {
    // Too short to chunk: stack beneath a zero triangle so the factor stays
    // square while preserving the Gram product.
    return factor_stacked(nullptr, x, 0, x.rows(), p);
  }
  auto ranges = chunk_ranges(x.rows(), p, chunk_rows);
  std::vector<RFactor> factors(ranges.size(), RFactor(p));
  if (threads <= 1 || ranges.size() == 1) {
    for (std::size_t c = 0; c < ranges.size(); ++c) {
      factors[c] = factor_range(x, ranges[c].first, ranges[c].second);
    }
  } else {
    const unsigned workers = std::min<unsigned>(threads, ranges.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < ranges.size(); c += workers) {
          factors[c] = factor_range(x, ranges[c].first, ranges[c].second);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  // Pairwise merge rounds: adjacent factors stack into one until a single
  // factor summarizes every chunk.
  while (factors.size() > 1) {
    std::vector<RFactor> next;
    next.reserve((factors.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < factors.size(); i += 2) {
      next.push_back(factor_pair(factors[i], factors[i + 1]));
    }
    if (factors.size() % 2 == 1) next.push_back(std::move(factors.back()));
    factors = std::move(next);
  }
  return std::move(factors.front());
}

MemoizedFactor absorb(const MemoizedFactor& memo, const DenseMatrix& x_delta,
                      std::size_t chunk_rows, unsigned threads) {
  const std::size_t p = memo.r.dim();
  if (x_delta.rows() == 0) {
    return {memo.r, memo.trained_rows, memo.epoch + 1};
  }
  if (x_delta.cols() != p) {
    throw ShapeError("absorb: delta has " + std::to_string(x_delta.cols()) +
                     " columns, factor dimension is " + std::to_string(p));
  }
  x_delta.check_finite("absorb");
  RFactor merged(p);
  if (x_delta.rows() < p) {
    // The delta is shorter than the factor; stacking it directly under R is
    // cheaper than reducing it first.
    merged = factor_stacked(&memo.r, x_delta, 0, x_delta.rows(), p);
  } else {
    RFactor delta_r = parallel_qrd(x_delta, chunk_rows, threads);
    detail::ColMajorWorkspace w;
    w.reset(2 * p, p);
    for (std::size_t i = 0; i < p; ++i) w.append_row(&memo.r.data()[i * p]);
    for (std::size_t i = 0; i < p; ++i) w.append_row(&delta_r.data()[i * p]);
    detail::householder_in_place(w);
    merged = detail::extract_upper(w);
  }
  return {std::move(merged), memo.trained_rows + x_delta.rows(), memo.epoch + 1};
}

MemoizedFactor merge_factors(const MemoizedFactor& a, const MemoizedFactor& b) {
  if (a.r.dim() != b.r.dim()) {
    throw ShapeError("merge_factors: dimension mismatch, " + std::to_string(a.r.dim()) +
                     " vs " + std::to_string(b.r.dim()));
  }
  return {factor_pair(a.r, b.r), a.trained_rows + b.trained_rows,
          std::max(a.epoch, b.epoch) + 1};
}

Vector xty_accumulate(const Vector& prev, const DenseMatrix& x_delta, const Vector& y_delta) {
  if (x_delta.rows() == 0) return prev;
  if (x_delta.cols() != prev.size()) {
    throw ShapeError("xty_accumulate: delta has " + std::to_string(x_delta.cols()) +
                     " columns, moment vector has " + std::to_string(prev.size()));
  }
  if (x_delta.rows() != y_delta.size()) {
    throw ShapeError("xty_accumulate: " + std::to_string(x_delta.rows()) + " delta rows vs " +
                     std::to_string(y_delta.size()) + " targets");
  }
  x_delta.check_finite("xty_accumulate");
  y_delta.check_finite("xty_accumulate");
  Vector out = prev;
  for (std::size_t i = 0; i < x_delta.rows(); ++i) {
    const double* row = x_delta.row_ptr(i);
    const double y = y_delta[i];
    for (std::size_t j = 0; j < prev.size(); ++j) out[j] += row[j] * y;
  }
  out.check_finite("xty_accumulate result");
  return out;
}

StreamingQrd::StreamingQrd(std::size_t cols, std::size_t buffer_rows)
    : work_(std::make_unique<detail::ColMajorWorkspace>()), cols_(cols) {
  if (cols == 0) throw ShapeError("StreamingQrd: column count must be positive");
  if (buffer_rows == 0) buffer_rows = 4 * cols;
  work_->reset(cols + buffer_rows, cols);
  work_->append_zero_rows(cols);  // running factor starts as the zero triangle
}

StreamingQrd::~StreamingQrd() = default;
StreamingQrd::StreamingQrd(StreamingQrd&&) noexcept = default;
StreamingQrd& StreamingQrd::operator=(StreamingQrd&&) noexcept = default;

void StreamingQrd::compact() {
  detail::householder_in_place(*work_);
  work_->rows = cols_;  // everything below the triangle is spent
}

void StreamingQrd::push_row(const double* row) {
  if (finished_) throw ShapeError("StreamingQrd: push after finish");
  if (work_->rows == work_->capacity_rows) compact();
  work_->append_row(row);
  ++folded_;
}

void StreamingQrd::push_rows(const DenseMatrix& block) {
  if (block.rows() == 0) return;
  if (block.cols() != cols_) {
    throw ShapeError("StreamingQrd: block has " + std::to_string(block.cols()) +
                     " columns, expected " + std::to_string(cols_));
  }
  block.check_finite("StreamingQrd::push_rows");
  for (std::size_t i = 0; i < block.rows(); ++i) push_row(block.row_ptr(i));
}

RFactor StreamingQrd::finish() {
  if (finished_) throw ShapeError("StreamingQrd: finish called twice");
  finished_ = true;
  if (work_->rows > cols_) detail::householder_in_place(*work_);
  return detail::extract_upper(*work_);
}

}  // namespace stridx
