#pragma once

// Thin row-major GEMM front end over CBLAS, overloaded for float and double.

#include <cstddef>

namespace dsrn::blas {

enum class Op { none, trans };

// C[m x n] = alpha * op(A) * op(B) + beta * C, all row-major.
void gemm(Op ta, Op tb, int m, int n, int k, float alpha, const float* a, int lda, const float* b, int ldb,
          float beta, float* c, int ldc);
void gemm(Op ta, Op tb, int m, int n, int k, double alpha, const double* a, int lda, const double* b, int ldb,
          double beta, double* c, int ldc);

}  // namespace dsrn::blas
