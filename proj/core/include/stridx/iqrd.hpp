#pragma once

#include <cstdint>
#include <memory>

#include "stridx/matrix.hpp"

namespace stridx {

namespace detail {
struct ColMajorWorkspace;
}

// Triangular factor plus bookkeeping for a training set that is only ever
// extended. The factor summarizes every row seen so far in cols^2 doubles, so
// refreshing a model after an append touches the new rows only — never the
// historical ones.
struct MemoizedFactor {
  RFactor r;
  std::uint64_t trained_rows = 0;
  std::uint64_t epoch = 0;

  static MemoizedFactor empty(std::size_t dim) { return {RFactor(dim), 0, 0}; }
  std::size_t footprint_bytes() const noexcept { return r.footprint_bytes(); }
};

// QR factor of a tall matrix computed as a binary merge tree over vertical
// chunks: each chunk is triangularized independently, then factors are merged
// pairwise until one remains. chunk_rows == 0 selects 4 * cols. Chunks are
// never shorter than cols; a short trailing chunk is folded into its
// neighbor. With threads > 1 the per-chunk factorizations run concurrently.
RFactor parallel_qrd(const DenseMatrix& x, std::size_t chunk_rows = 0, unsigned threads = 1);

// Extends a factor with freshly appended rows by triangularizing the stacked
// pair [R; delta]. Cost is O((delta_rows + dim) * dim^2) regardless of how
// many rows the factor already summarizes. When delta_rows >= dim the delta
// is itself reduced to a triangle first (optionally in parallel chunks).
// An empty delta returns a bit-identical factor with only the epoch bumped.
MemoizedFactor absorb(const MemoizedFactor& memo, const DenseMatrix& x_delta,
                      std::size_t chunk_rows = 0, unsigned threads = 1);

// Combines the factors of two disjoint row sets into the factor of their
// union by triangularizing [R_a; R_b]. Row counts add; the epoch advances
// past both inputs.
MemoizedFactor merge_factors(const MemoizedFactor& a, const MemoizedFactor& b);

// Moment-vector update matching absorb: prev + X_delta^T * y_delta. An empty
// delta returns prev unchanged.
Vector xty_accumulate(const Vector& prev, const DenseMatrix& x_delta, const Vector& y_delta);

// Folds an unbounded row stream into a triangular factor using bounded
// memory: rows stack beneath the running factor and are triangularized
// whenever the buffer fills. Equivalent to a QR pass over the whole stream.
class StreamingQrd {
 public:
  // buffer_rows == 0 selects 4 * cols of stacking room per pass.
  explicit StreamingQrd(std::size_t cols, std::size_t buffer_rows = 0);
  ~StreamingQrd();
  StreamingQrd(StreamingQrd&&) noexcept;
  StreamingQrd& operator=(StreamingQrd&&) noexcept;

  void push_row(const double* row);  // `cols` contiguous doubles
  void push_rows(const DenseMatrix& block);
  std::uint64_t rows_folded() const noexcept { return folded_; }
  // Finalizes and returns the factor; the instance cannot be reused.
  RFactor finish();

 private:
  void compact();

  std::unique_ptr<detail::ColMajorWorkspace> work_;
  std::size_t cols_ = 0;
  std::uint64_t folded_ = 0;
  bool finished_ = false;
};

}  // namespace stridx
