#pragma once

#include <cstddef>
#include <vector>

#include "cfmdd/ad/tape.hpp"
#include "cfmdd/ad/tensor.hpp"

namespace cfmdd::ad {

namespace kernels {

/// C = op(A) op(B) with op = transpose when the flag is set. Rows of C are
/// distributed over threads; each entry is summed in the same order as in
/// gemm_serial, so both produce identical bits.
Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor gemm_serial(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

}  // namespace kernels

/// Constant sparse matrix in CSR form.
struct SparseMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col;
  std::vector<double> val;

  struct Triplet {
    std::size_t r, c;
    double v;
  };
  /// Triplets must be sorted by row; duplicates are kept as separate entries.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  Tensor multiply(const Tensor& x) const;
  Tensor multiply_transposed(const Tensor& x) const;
};

Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);
/// Elementwise a + b; b may also be a 1 x C row or a 1 x 1 scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise a * b; b may also be an R x 1 column, a 1 x C row or 1 x 1.
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var mean_rows(Var a);
Var sum(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.01);
Var square(Var a);
/// Derivative taken as 0 where the input is 0.
Var sqrt(Var a);
Var log1p(Var a);
/// Softmax along each row.
Var softmax_rows(Var a);
/// y = A x for constant sparse A.
Var spmm(const SparseMatrix& a, Var x);

/// Running statistics of one batch-normalization layer.
struct BatchNormStats {
  Tensor mean, var;  // 1 x C
};

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEps = 1e-5;

/// Per-column normalization with learnable gamma, beta (1 x C). Train mode
/// uses batch statistics and updates `stats` with the momentum rule
/// running = 0.9 running + 0.1 batch (variance unbiased); eval mode is the
/// affine map given by `stats`.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, bool train,
               double momentum = kBatchNormMomentum, double eps = kBatchNormEps);

/// Low-level escape hatch: records `value` as a function of `inputs` with a
/// user-supplied pullback.
Var custom(const std::vector<Var>& inputs, Tensor value, Pullback pullback, const char* name);

}  // namespace cfmdd::ad
