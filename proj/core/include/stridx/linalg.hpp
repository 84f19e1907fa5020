#pragma once

#include <cstdint>

#include "stridx/matrix.hpp"

namespace stridx {

// Householder triangularization of a tall matrix (rows >= cols). Only the
// upper-triangular factor is formed; the orthogonal factor is never
// materialized. The result satisfies R^T R == X^T X up to rounding, which is
// the only property downstream consumers rely on. Degenerate columns whose
// remaining tail norm is below 1e-300 are left untouched instead of producing
// a non-finite reflector.
RFactor householder_qrd(const DenseMatrix& x);

// Inverse of an upper-triangular factor by back-substitution. Throws
// SingularError naming the first offending diagonal index when
// |R[i,i]| < 1e-12 * max_k |R[k,k]| (or when the whole diagonal is zero).
DenseMatrix upper_tri_inverse(const RFactor& r);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
Vector matvec(const DenseMatrix& a, const Vector& v);

// Least-squares coefficients from a triangular factor and the accumulated
// moment vector: beta = R^{-1} R^{-T} (X^T Y). Deliberately composed from the
// primitive operators above so every training path exercises the same chain.
Vector solve_beta(const RFactor& r, const Vector& xty);

// Number of Householder factorizations executed by the calling thread since
// it started. Lets callers prove which threads perform factorization work.
std::uint64_t thread_factorization_count() noexcept;

}  // namespace stridx
