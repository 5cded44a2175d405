#pragma once

// Thin wrappers over the reference Fortran BLAS/LAPACK interface. Link
// against BLAS::BLAS and LAPACK::LAPACK.

#include <cstddef>
#include <string>
#include <vector>

#include "matreg/error.hpp"

extern "C" {
void dgemm_(const char* transa, const char* transb, const int* m, const int* n,
            const int* k, const double* alpha, const double* a, const int* lda,
            const double* b, const int* ldb, const double* beta, double* c,
            const int* ldc, std::size_t transa_len, std::size_t transb_len);

void dgesdd_(const char* jobz, const int* m, const int* n, double* a,
             const int* lda, double* s, double* u, const int* ldu, double* vt,
             const int* ldvt, double* work, const int* lwork, int* iwork,
             int* info, std::size_t jobz_len);
}

namespace matreg::detail {

inline int to_int(std::size_t v) {
  if (v > static_cast<std::size_t>(2147483647))
    throw ArgumentError("matrix dimension too large for LAPACK");
  return static_cast<int>(v);
}

/// c = a * b for row-major a (m x k), b (k x n), c (m x n).
inline void gemm_row_major(std::size_t m, std::size_t n, std::size_t k,
                           const double* a, const double* b, double* c) {
  // Row-major c = a b is column-major c^T = b^T a^T.
  const int cm = to_int(n), cn = to_int(m), ck = to_int(k);
  const double one = 1.0, zero = 0.0;
  dgemm_("N", "N", &cm, &cn, &ck, &one, b, &cm, a, &ck, &zero, c, &cm, 1, 1);
}

/// Thin SVD of the column-major m x n matrix `a` (overwritten). On return
/// u is m x r and vt is r x n, both column-major, r = min(m, n). Returns
/// LAPACK's info code.
inline int gesdd_thin(std::size_t m, std::size_t n, double* a, double* s,
                      double* u, double* vt) {
  const int im = to_int(m), in = to_int(n);
  const int r = im < in ? im : in;
  const int lda = im > 1 ? im : 1;
  const int ldu = lda;
  const int ldvt = r > 1 ? r : 1;
  std::vector<int> iwork(8 * static_cast<std::size_t>(r));
  int info = 0;
  int lwork = -1;
  double query = 0.0;
  dgesdd_("S", &im, &in, a, &lda, s, u, &ldu, vt, &ldvt, &query, &lwork,
          iwork.data(), &info, 1);
  if (info != 0) return info;
  lwork = static_cast<int>(query) + 1;
  std::vector<double> work(static_cast<std::size_t>(lwork));
  dgesdd_("S", &im, &in, a, &lda, s, u, &ldu, vt, &ldvt, work.data(), &lwork,
          iwork.data(), &info, 1);
  return info;
}

}  // namespace matreg::detail
