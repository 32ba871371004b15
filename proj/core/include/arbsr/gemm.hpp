#pragma once

#include "arbsr/common.hpp"

namespace arbsr {

/// Row-major C[MxN] = alpha * op(A) . op(B) + beta * C.
/// op(A) is A[MxK] (trans_a=false) or A[KxM] read transposed.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha,
          const real* a, int lda, const real* b, int ldb, real beta,
          real* c, int ldc);

}  // namespace arbsr
