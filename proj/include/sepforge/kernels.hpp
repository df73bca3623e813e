// Copyright 2026 The sepforge authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Low-level numeric kernels. Every routine has a serial and an OpenMP path,
// selected at runtime via set_mode(). Both paths compute each output element
// with the same inner summation order, so results are bit-identical across
// modes and thread counts. Reductions that fold a whole buffer into one
// scalar always run in fixed serial order for the same reason.

#pragma once

#include <cstdint>

namespace sepforge::kernels {

enum class Mode { serial, parallel };

Mode mode();
void set_mode(Mode m);
int thread_count();

// Row-major dense matrices. `accumulate` adds into `out` instead of
// overwriting it.
void matmul_nn(const double* a, const double* b, double* out, std::int64_t m,
               std::int64_t k, std::int64_t n, bool accumulate = false);
// out[m x n] = a[m x k] * transpose(bt[n x k])
void matmul_nt(const double* a, const double* bt, double* out, std::int64_t m,
               std::int64_t k, std::int64_t n, bool accumulate = false);
// out[m x n] = transpose(at[k x m]) * b[k x n]
void matmul_tn(const double* at, const double* b, double* out, std::int64_t m,
               std::int64_t k, std::int64_t n, bool accumulate = false);

// Cross-correlation: y[co][l] = sum_{ci,w} x[ci][l*stride+w] * k[co][ci][w],
// l in [0, l_out). x is [c_in x t], k is [c_out x c_in x w], y is [c_out x l_out].
void conv1d_fwd(const double* x, const double* k, double* y, std::int64_t c_in,
                std::int64_t t, std::int64_t c_out, std::int64_t w,
                std::int64_t stride, std::int64_t l_out, bool accumulate = false);
// gk[co][ci][w] += sum_l gy[co][l] * x[ci][l*stride+w]
void conv1d_grad_kernels(const double* x, const double* gy, double* gk,
                         std::int64_t c_in, std::int64_t t, std::int64_t c_out,
                         std::int64_t w, std::int64_t stride, std::int64_t l_out);
// Adjoint of conv1d_fwd: x[co][t] = sum_{ci,l,w: l*stride+w==t} y[ci][l]*k[ci][co][w].
// y is [c_in x l], k is [c_in x c_out x w], x is [c_out x t_out],
// t_out = (l-1)*stride + w.
void conv1d_transpose_fwd(const double* y, const double* k, double* x,
                          std::int64_t c_in, std::int64_t l, std::int64_t c_out,
                          std::int64_t w, std::int64_t stride, bool accumulate = false);
// gk[ci][co][w] += sum_l y[ci][l] * gx[co][l*stride+w]
void conv1d_transpose_grad_kernels(const double* y, const double* gx, double* gk,
                                   std::int64_t c_in, std::int64_t l,
                                   std::int64_t c_out, std::int64_t w,
                                   std::int64_t stride);

enum class Unary { relu, sigmoid, tanh_fn, log_fn };
void map_unary(Unary f, const double* x, double* y, std::int64_t n);
// gx += gy * f'(x), with f' expressed through x and y = f(x). Accumulates.
void map_unary_grad(Unary f, const double* x, const double* y, const double* gy,
                    double* gx, std::int64_t n);

void add(const double* a, const double* b, double* y, std::int64_t n);
void sub(const double* a, const double* b, double* y, std::int64_t n);
void mul(const double* a, const double* b, double* y, std::int64_t n);
void scale(const double* x, double c, double* y, std::int64_t n);
void add_const(const double* x, double c, double* y, std::int64_t n);
void axpy(double alpha, const double* x, double* y, std::int64_t n);  // y += alpha*x
void fma_acc(const double* a, const double* b, double* y, std::int64_t n);  // y += a*b

// Fixed-order serial reductions (identical in both modes).
double reduce_sum(const double* x, std::int64_t n);
double reduce_dot(const double* a, const double* b, std::int64_t n);

// Numerically stabilized row softmax. Increments the softmax instrumentation
// counter once per row.
void softmax_rows(const double* x, double* y, std::int64_t rows, std::int64_t cols);
void softmax_rows_grad(const double* y, const double* gy, double* gx,
                       std::int64_t rows, std::int64_t cols);

// Per-row normalization: y = gain * (x - mean)/sqrt(var + eps) + bias.
// xhat and inv_std receive the normalized values and 1/sqrt(var+eps) needed
// by the backward pass.
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double eps, double* y, double* xhat, double* inv_std,
                     std::int64_t rows, std::int64_t cols);
void layer_norm_rows_grad(const double* xhat, const double* inv_std,
                          const double* gain, const double* gy, double* gx,
                          double* ggain, double* gbias, std::int64_t rows,
                          std::int64_t cols);

void add_rowvec(const double* x, const double* b, double* y, std::int64_t rows,
                std::int64_t cols);

// y[r] = x[idx[r]] for r in [0,out_rows); idx[r] < 0 yields a zero row.
void gather_rows(const double* x, const std::int64_t* idx, double* y,
                 std::int64_t out_rows, std::int64_t cols);
// y[q] (+)= sum_{r: idx[r]==q} x[r]. Indices may repeat; negative indices are
// dropped. Deterministic: sources are folded in ascending r order.
void scatter_add_rows(const double* x, const std::int64_t* idx,
                      std::int64_t in_rows, double* y, std::int64_t out_rows,
                      std::int64_t cols, bool accumulate);
void scale_rows(const double* x, const double* factors, double* y,
                std::int64_t rows, std::int64_t cols);
void transpose(const double* x, double* y, std::int64_t rows, std::int64_t cols);

}  // namespace sepforge::kernels
