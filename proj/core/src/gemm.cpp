#include "arbsr/gemm.hpp"

#include <cstdint>

#ifdef ARBSR_HAVE_OPENBLAS
#include <cblas.h>
#endif

namespace arbsr {

#ifdef ARBSR_HAVE_OPENBLAS

void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha,
          const real* a, int lda, const real* b, int ldb, real beta,
          real* c, int ldc) {
    const CBLAS_TRANSPOSE ta = trans_a ? CblasTrans : CblasNoTrans;
    const CBLAS_TRANSPOSE tb = trans_b ? CblasTrans : CblasNoTrans;
#ifdef ARBSR_PRECISION_F64
    cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
#else
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
#endif
}

#else

// Fallback path: straightforward ikj loops. Correct, slow.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha,
          const real* a, int lda, const real* b, int ldb, real beta,
          real* c, int ldc) {
    auto at = [&](int i, int p) { return trans_a ? a[std::int64_t(p) * lda + i]
                                                 : a[std::int64_t(i) * lda + p]; };
    auto bt = [&](int p, int j) { return trans_b ? b[std::int64_t(j) * ldb + p]
                                                 : b[std::int64_t(p) * ldb + j]; };
    for (int i = 0; i < m; ++i) {
        real* row = c + std::int64_t(i) * ldc;
        if (beta == real(0))
            for (int j = 0; j < n; ++j) row[j] = real(0);
        else
            for (int j = 0; j < n; ++j) row[j] *= beta;
        for (int p = 0; p < k; ++p) {
            const real av = alpha * at(i, p);
            if (av == real(0)) continue;
            for (int j = 0; j < n; ++j) row[j] += av * bt(p, j);
        }
    }
}

#endif

}  // namespace arbsr
