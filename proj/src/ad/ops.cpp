#include "cfmdd/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cfmdd/errors.hpp"

namespace cfmdd::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                   b.shape_str());
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + a.shape_str());
}

template <bool kParallel>
Tensor gemm_impl(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t n = ta ? a.cols() : a.rows();
  const std::size_t k = ta ? a.rows() : a.cols();
  const std::size_t kb = tb ? b.cols() : b.rows();
  const std::size_t m = tb ? b.rows() : b.cols();
  if (k != kb) shape_fail("matmul", a, b);
  Tensor c(n, m, 0.0);
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const std::size_t lda = a.cols(), ldb = b.cols();
  const auto body = [&](std::size_t i) {
    double* ci = C + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ta ? A[p * lda + i] : A[i * lda + p];
      if (aip == 0.0) continue;
      if (tb) {
        for (std::size_t j = 0; j < m; ++j) ci[j] += aip * B[j * ldb + p];
      } else {
        const double* bp = B + p * ldb;
        for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
      }
    }
  };
  if constexpr (kParallel) {
    const long long rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (n * k * m > 32768)
    for (long long i = 0; i < rows; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
  return c;
}

enum class Broadcast { kSame, kRow, kCol, kScalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b, bool allow_col) {
  if (a.same_shape(b)) return Broadcast::kSame;
  if (b.size() == 1 && b.rank() == 2) return Broadcast::kScalar;
  if (a.rank() == 2 && b.rank() == 2) {
    if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
    if (allow_col && b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  }
  shape_fail(op, a, b);
}

// Index of the b element paired with a[r, c].
inline std::size_t b_index(Broadcast k, std::size_t r, std::size_t c, std::size_t cols) {
  switch (k) {
    case Broadcast::kSame: return r * cols + c;
    case Broadcast::kRow: return c;
    case Broadcast::kCol: return r;
    case Broadcast::kScalar: return 0;
  }
  return 0;
}

// Reduces a gradient shaped like a to the shape of b.
Tensor reduce_to(Broadcast k, const Tensor& g, const Tensor& b) {
  if (k == Broadcast::kSame) return g;
  Tensor out = Tensor::zeros_like(b);
  const std::size_t rows = g.rows(), cols = g.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[b_index(k, r, c, cols)] += g[r * cols + c];
  }
  return out;
}

template <typename F, typename DF>
Var unary(Var a, const char* name, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape->record(std::move(y), {a},
                        [a, df](Tape& t, const Tensor& g) {
                          const Tensor& xv = t.value(a.id);
                          Tensor gx = Tensor::zeros_like(xv);
                          for (std::size_t i = 0; i < xv.size(); ++i) gx[i] = g[i] * df(xv[i]);
                          t.accumulate(a, gx);
                        },
                        name);
}

}  // namespace

namespace kernels {
Tensor gemm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  return gemm_impl<true>(a, b, trans_a, trans_b);
}
Tensor gemm_serial(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  return gemm_impl<false>(a, b, trans_a, trans_b);
}
}  // namespace kernels

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  SparseMatrix s;
  s.rows = rows;
  s.cols = cols;
  s.row_ptr.assign(rows + 1, 0);
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Triplet& x, const Triplet& y) { return x.r < y.r; });
  for (const auto& t : triplets) {
    if (t.r >= rows || t.c >= cols) throw ShapeError("sparse triplet out of range");
    ++s.row_ptr[t.r + 1];
    s.col.push_back(t.c);
    s.val.push_back(t.v);
  }
  for (std::size_t r = 0; r < rows; ++r) s.row_ptr[r + 1] += s.row_ptr[r];
  return s;
}

Tensor SparseMatrix::multiply(const Tensor& x) const {
  if (x.rows() != cols) {
    throw ShapeError("spmm: sparse " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " times " + x.shape_str());
  }
  const std::size_t m = x.cols();
  Tensor y(rows, m, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const double v = val[e];
      const double* xr = x.data() + col[e] * m;
      double* yr = y.data() + r * m;
      for (std::size_t j = 0; j < m; ++j) yr[j] += v * xr[j];
    }
  }
  return y;
}

Tensor SparseMatrix::multiply_transposed(const Tensor& x) const {
  if (x.rows() != rows) throw ShapeError("spmm transpose: row mismatch " + x.shape_str());
  const std::size_t m = x.cols();
  Tensor y(cols, m, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const double v = val[e];
      const double* xr = x.data() + r * m;
      double* yr = y.data() + col[e] * m;
      for (std::size_t j = 0; j < m; ++j) yr[j] += v * xr[j];
    }
  }
  return y;
}

Var matmul(Var a, Var b) {
  Tensor y = kernels::gemm(a.value(), b.value());
  return a.tape->record(std::move(y), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          if (t.requires_grad(a.id)) {
                            t.accumulate(a, kernels::gemm(g, t.value(b.id), false, true));
                          }
                          if (t.requires_grad(b.id)) {
                            t.accumulate(b, kernels::gemm(t.value(a.id), g, true, false));
                          }
                        },
                        "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tensor y = kernels::gemm(a.value(), b.value(), false, true);
  return a.tape->record(std::move(y), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          if (t.requires_grad(a.id)) {
                            t.accumulate(a, kernels::gemm(g, t.value(b.id)));
                          }
                          if (t.requires_grad(b.id)) {
                            t.accumulate(b, kernels::gemm(g, t.value(a.id), true, false));
                          }
                        },
                        "matmul_nt");
}

namespace {
Var add_like(Var a, Var b, double sign, const char* name) {
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const Broadcast k = broadcast_kind(name, x, z, false);
  Tensor y = x;
  const std::size_t cols = x.rank() == 2 ? x.cols() : x.size();
  const std::size_t rows = x.size() / std::max<std::size_t>(cols, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += sign * z[b_index(k, r, c, cols)];
  }
  return a.tape->record(std::move(y), {a, b},
                        [a, b, k, sign](Tape& t, const Tensor& g) {
                          t.accumulate(a, g);
                          if (t.requires_grad(b.id)) {
                            Tensor gb = reduce_to(k, g, t.value(b.id));
                            if (sign != 1.0) {
                              for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= sign;
                            }
                            t.accumulate(b, gb);
                          }
                        },
                        name);
}
}  // namespace

Var add(Var a, Var b) { return add_like(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_like(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  const Broadcast k = broadcast_kind("mul", x, z, true);
  Tensor y = x;
  const std::size_t cols = x.rank() == 2 ? x.cols() : x.size();
  const std::size_t rows = x.size() / std::max<std::size_t>(cols, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] *= z[b_index(k, r, c, cols)];
  }
  return a.tape->record(
      std::move(y), {a, b},
      [a, b, k, rows, cols](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(a.id);
        const Tensor& zv = t.value(b.id);
        if (t.requires_grad(a.id)) {
          Tensor ga = Tensor::zeros_like(xv);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              ga[r * cols + c] = g[r * cols + c] * zv[b_index(k, r, c, cols)];
            }
          }
          t.accumulate(a, ga);
        }
        if (t.requires_grad(b.id)) {
          Tensor gb = Tensor::zeros_like(zv);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              gb[b_index(k, r, c, cols)] += g[r * cols + c] * xv[r * cols + c];
            }
          }
          t.accumulate(b, gb);
        }
      },
      "mul");
}

Var scale(Var a, double c) {
  return unary(
      a, "scale", [c](double v) { return c * v; }, [c](double) { return c; });
}

Var concat_cols(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  require_matrix("concat_cols", x);
  require_matrix("concat_cols", z);
  if (x.rows() != z.rows()) shape_fail("concat_cols", x, z);
  const std::size_t r = x.rows(), ca = x.cols(), cb = z.cols();
  Tensor y(r, ca + cb);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(x.data() + i * ca, ca, y.data() + i * (ca + cb));
    std::copy_n(z.data() + i * cb, cb, y.data() + i * (ca + cb) + ca);
  }
  return a.tape->record(std::move(y), {a, b},
                        [a, b, r, ca, cb](Tape& t, const Tensor& g) {
                          if (t.requires_grad(a.id)) {
                            Tensor ga(r, ca);
                            for (std::size_t i = 0; i < r; ++i) {
                              std::copy_n(g.data() + i * (ca + cb), ca, ga.data() + i * ca);
                            }
                            t.accumulate(a, ga);
                          }
                          if (t.requires_grad(b.id)) {
                            Tensor gb(r, cb);
                            for (std::size_t i = 0; i < r; ++i) {
                              std::copy_n(g.data() + i * (ca + cb) + ca, cb, gb.data() + i * cb);
                            }
                            t.accumulate(b, gb);
                          }
                        },
                        "concat_cols");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_matrix("slice_cols", x);
  if (begin > end || end > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + x.shape_str());
  }
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  Tensor y(r, w);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(x.data() + i * c + begin, w, y.data() + i * w);
  return a.tape->record(std::move(y), {a},
                        [a, r, c, w, begin](Tape& t, const Tensor& g) {
                          Tensor ga(r, c);
                          for (std::size_t i = 0; i < r; ++i) {
                            std::copy_n(g.data() + i * w, w, ga.data() + i * c + begin);
                          }
                          t.accumulate(a, ga);
                        },
                        "slice_cols");
}

Var mean_rows(Var a) {
  const Tensor& x = a.value();
  require_matrix("mean_rows", x);
  const std::size_t r = x.rows(), c = x.cols();
  if (r == 0) throw ShapeError("mean_rows of an empty matrix");
  Tensor y(1, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) y[j] += x(i, j);
  }
  for (std::size_t j = 0; j < c; ++j) y[j] /= static_cast<double>(r);
  return a.tape->record(std::move(y), {a},
                        [a, r, c](Tape& t, const Tensor& g) {
                          Tensor ga(r, c);
                          for (std::size_t i = 0; i < r; ++i) {
                            for (std::size_t j = 0; j < c; ++j) {
                              ga(i, j) = g[j] / static_cast<double>(r);
                            }
                          }
                          t.accumulate(a, ga);
                        },
                        "mean_rows");
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  return a.tape->record(Tensor::scalar(s), {a},
                        [a](Tape& t, const Tensor& g) {
                          Tensor ga(t.value(a.id).shape(), g[0]);
                          t.accumulate(a, ga);
                        },
                        "sum");
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Var square(Var a) {
  return unary(
      a, "square", [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var sqrt(Var a) {
  for (const double v : a.value().values()) {
    if (v < 0.0) throw InvalidInputError("sqrt of a negative entry");
  }
  return unary(
      a, "sqrt", [](double v) { return std::sqrt(v); },
      [](double v) { return v > 0.0 ? 0.5 / std::sqrt(v) : 0.0; });
}

Var log1p(Var a) {
  for (const double v : a.value().values()) {
    if (v <= -1.0) throw InvalidInputError("log1p of an entry <= -1");
  }
  return unary(
      a, "log1p", [](double v) { return std::log1p(v); },
      [](double v) { return 1.0 / (1.0 + v); });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  require_matrix("softmax_rows", x);
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      y(i, j) = std::exp(x(i, j) - mx);
      s += y(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) y(i, j) /= s;
  }
  Tensor yc = y;
  return a.tape->record(std::move(y), {a},
                        [a, yv = std::move(yc), r, c](Tape& t, const Tensor& g) {
                          Tensor ga(r, c);
                          for (std::size_t i = 0; i < r; ++i) {
                            double dot = 0.0;
                            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * yv(i, j);
                            for (std::size_t j = 0; j < c; ++j) {
                              ga(i, j) = yv(i, j) * (g[i * c + j] - dot);
                            }
                          }
                          t.accumulate(a, ga);
                        },
                        "softmax_rows");
}

Var spmm(const SparseMatrix& s, Var x) {
  Tensor y = s.multiply(x.value());
  return x.tape->record(std::move(y), {x},
                        [s, x](Tape& t, const Tensor& g) {
                          t.accumulate(x, s.multiply_transposed(g));
                        },
                        "spmm");
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, bool train, double momentum,
               double eps) {
  const Tensor& xv = x.value();
  require_matrix("batch_norm", xv);
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gamma.value().size() != c || beta.value().size() != c) {
    shape_fail("batch_norm", xv, gamma.value());
  }
  if (stats.mean.size() != c) {
    stats.mean = Tensor(1, c, 0.0);
    stats.var = Tensor(1, c, 1.0);
  }
  Tensor mean(1, c), inv_std(1, c);
  if (train) {
    if (r == 0) throw ShapeError("batch_norm on an empty batch");
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) mean[j] += xv(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) mean[j] /= static_cast<double>(r);
    Tensor var(1, c);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xv(i, j) - mean[j];
        var[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < c; ++j) {
      const double biased = var[j] / static_cast<double>(r);
      const double unbiased = r > 1 ? var[j] / static_cast<double>(r - 1) : biased;
      inv_std[j] = 1.0 / std::sqrt(biased + eps);
      stats.mean[j] = momentum * stats.mean[j] + (1.0 - momentum) * mean[j];
      stats.var[j] = momentum * stats.var[j] + (1.0 - momentum) * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = stats.mean[j];
      inv_std[j] = 1.0 / std::sqrt(stats.var[j] + eps);
    }
  }
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor xhat(r, c), y(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (xv(i, j) - mean[j]) * inv_std[j];
      y(i, j) = gv[j] * xhat(i, j) + bv[j];
    }
  }
  return x.tape->record(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std, r, c, train](Tape& t, const Tensor& g) {
        const Tensor& gv2 = t.value(gamma.id);
        Tensor dgamma(1, c), dbeta(1, c);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            dgamma[j] += g[i * c + j] * xhat(i, j);
            dbeta[j] += g[i * c + j];
          }
        }
        if (t.requires_grad(x.id)) {
          Tensor dx(r, c);
          const double n = static_cast<double>(r);
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
              const double gi = g[i * c + j];
              dx(i, j) = train ? gv2[j] * inv_std[j] *
                                     (gi - dbeta[j] / n - xhat(i, j) * dgamma[j] / n)
                               : gv2[j] * inv_std[j] * gi;
            }
          }
          t.accumulate(x, dx);
        }
        if (t.requires_grad(gamma.id)) {
          t.accumulate(gamma, Tensor(t.value(gamma.id).shape(), dgamma.values()));
        }
        if (t.requires_grad(beta.id)) {
          t.accumulate(beta, Tensor(t.value(beta.id).shape(), dbeta.values()));
        }
      },
      "batch_norm");
}

Var custom(const std::vector<Var>& inputs, Tensor value, Pullback pullback, const char* name) {
  if (inputs.empty()) throw InvalidInputError("custom op needs at least one input");
  return inputs.front().tape->record(std::move(value), inputs, std::move(pullback), name);
}

}  // namespace cfmdd::ad
