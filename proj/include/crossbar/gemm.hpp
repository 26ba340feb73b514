#pragma once

#ifdef CROSSBAR_USE_CBLAS
#include <cblas.h>
#endif

namespace crossbar {

// Row-major C = alpha * op(A) * op(B) + beta * C.
// op(A) is m x k, op(B) is k x n. Backed by OpenBLAS when available; the
// built-in kernel keeps the library dependency-free elsewhere.
template <class S>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, S alpha, const S* a, int lda, const S* b,
          int ldb, S beta, S* c, int ldc);

#ifdef CROSSBAR_USE_CBLAS

template <>
inline void gemm<float>(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                        int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
inline void gemm<double>(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                         int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

#else

template <class S>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, S alpha, const S* a, int lda, const S* b,
          int ldb, S beta, S* c, int ldc) {
    auto at = [&](int i, int j) { return trans_a ? a[static_cast<long>(j) * lda + i] : a[static_cast<long>(i) * lda + j]; };
    for (int i = 0; i < m; ++i) {
        S* crow = c + static_cast<long>(i) * ldc;
        if (beta == S(0)) {
            for (int j = 0; j < n; ++j) crow[j] = S(0);
        } else {
            for (int j = 0; j < n; ++j) crow[j] *= beta;
        }
        for (int p = 0; p < k; ++p) {
            const S av = alpha * at(i, p);
            if (av == S(0)) continue;
            const S* brow = trans_b ? nullptr : b + static_cast<long>(p) * ldb;
            if (trans_b) {
                for (int j = 0; j < n; ++j) crow[j] += av * b[static_cast<long>(j) * ldb + p];
            } else {
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

#endif

// Number of worker threads used by BLAS calls. The library keeps BLAS
// single-threaded by default so results do not depend on machine load.
void set_blas_threads(int n);

}  // namespace crossbar
