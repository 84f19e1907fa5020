#include "stridx/linalg.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "qr_kernel.hpp"
#include "stridx/error.hpp"

namespace stridx {

namespace {

thread_local std::uint64_t tl_factorizations = 0;

constexpr double kDegenerateColumnNorm = 1e-300;
constexpr double kSingularDiagRatio = 1e-12;

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

}  // namespace

namespace detail {

void ColMajorWorkspace::reset(std::size_t capacity, std::size_t ncols) {
  rows = 0;
  cols = ncols;
  capacity_rows = capacity;
  data.assign(capacity * ncols, 0.0);
}

void ColMajorWorkspace::append_row(const double* row) {
  for (std::size_t j = 0; j < cols; ++j) data[j * capacity_rows + rows] = row[j];
  ++rows;
}

void ColMajorWorkspace::append_zero_rows(std::size_t n) {
  for (std::size_t j = 0; j < cols; ++j) {
    double* c = col(j) + rows;
    for (std::size_t k = 0; k < n; ++k) c[k] = 0.0;
  }
  rows += n;
}

void ColMajorWorkspace::load_rows(const DenseMatrix& m, std::size_t row_begin,
                                  std::size_t row_end) {
  for (std::size_t j = 0; j < cols; ++j) {
    double* c = col(j) + rows;
    for (std::size_t i = row_begin; i < row_end; ++i) c[i - row_begin] = m(i, j);
  }
  rows += row_end - row_begin;
}

void householder_in_place(ColMajorWorkspace& w) {
  ++tl_factorizations;
  const std::size_t m = w.rows;
  const std::size_t p = w.cols;
  std::vector<double> ref(m);
  // Every column gets a reflector, including the last one: without it the
  // trailing diagonal entry would keep the raw column value and the Gram
  // identity would break for the final coordinate.
  for (std::size_t i = 0; i < p && i < m; ++i) {
    double* ci = w.col(i);
    const std::size_t tail = m - i;
    double norm2 = dot(ci + i, ci + i, tail);
    double norm = std::sqrt(norm2);
    if (norm < kDegenerateColumnNorm) continue;
    const double alpha = ci[i] > 0.0 ? -norm : norm;
    for (std::size_t k = 0; k < tail; ++k) ref[k] = ci[i + k];
    ref[0] -= alpha;
    const double gamma = -2.0 / dot(ref.data(), ref.data(), tail);
    // The pivot column maps to alpha * e1 exactly; writing that directly
    // keeps the sub-diagonal zeros exact so the block can be restacked.
    ci[i] = alpha;
    for (std::size_t k = 1; k < tail; ++k) ci[i + k] = 0.0;
    for (std::size_t j = i + 1; j < p; ++j) {
      double* cj = w.col(j) + i;
      const double a = gamma * dot(ref.data(), cj, tail);
      axpy(tail, a, ref.data(), cj);
    }
  }
}

RFactor extract_upper(const ColMajorWorkspace& w) {
  RFactor r(w.cols);
  const std::size_t limit = w.rows < w.cols ? w.rows : w.cols;
  for (std::size_t j = 0; j < w.cols; ++j) {
    const double* c = w.col(j);
    for (std::size_t i = 0; i <= j && i < limit; ++i) r.at(i, j) = c[i];
  }
  return r;
}

}  // namespace detail

RFactor householder_qrd(const DenseMatrix& x) {
  if (x.rows() < x.cols()) {
    throw ShapeError("householder_qrd: need rows >= cols, got " + std::to_string(x.rows()) +
                     "x" + std::to_string(x.cols()));
  }
  x.check_finite("householder_qrd");
  detail::ColMajorWorkspace w;
  w.reset(x.rows(), x.cols());
  w.load_rows(x, 0, x.rows());
  detail::householder_in_place(w);
  RFactor r = detail::extract_upper(w);
  r.to_matrix().check_finite("householder_qrd result");
  return r;
}

DenseMatrix upper_tri_inverse(const RFactor& r) {
  const std::size_t p = r.dim();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, std::fabs(r.at(i, i)));
  if (max_diag == 0.0) {
    throw SingularError("upper_tri_inverse: zero diagonal", 0);
  }
  const double threshold = kSingularDiagRatio * max_diag;
  for (std::size_t i = 0; i < p; ++i) {
    if (std::fabs(r.at(i, i)) < threshold) {
      throw SingularError("upper_tri_inverse: diagonal entry " + std::to_string(i) +
                              " below singularity threshold",
                          i);
    }
  }
  DenseMatrix inv(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    inv(j, j) = 1.0 / r.at(j, j);
    for (std::size_t ii = j; ii-- > 0;) {
      double s = 0.0;
      for (std::size_t k = ii + 1; k <= j; ++k) s += r.at(ii, k) * inv(k, j);
      inv(ii, j) = -s / r.at(ii, ii);
    }
  }
  inv.check_finite("upper_tri_inverse result");
  return inv;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()));
  }
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.row_ptr(k);
      axpy(b.cols(), aik, bk, ci);
    }
  }
  c.check_finite("matmul result");
  return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Vector matvec(const DenseMatrix& a, const Vector& v) {
  if (a.cols() != v.size()) {
    throw ShapeError("matvec: dimension mismatch, " + std::to_string(a.cols()) + " vs " +
                     std::to_string(v.size()));
  }
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    out[i] = dot(a.row_ptr(i), v.data().data(), a.cols());
  }
  out.check_finite("matvec result");
  return out;
}

Vector solve_beta(const RFactor& r, const Vector& xty) {
  if (r.dim() != xty.size()) {
    throw ShapeError("solve_beta: factor dim " + std::to_string(r.dim()) +
                     " vs moment vector " + std::to_string(xty.size()));
  }
  DenseMatrix rinv = upper_tri_inverse(r);
  DenseMatrix normal_inv = matmul(rinv, transpose(rinv));
  return matvec(normal_inv, xty);
}

std::uint64_t thread_factorization_count() noexcept { return tl_factorizations; }

}  // namespace stridx
