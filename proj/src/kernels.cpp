// Copyright 2026 The sepforge authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sepforge/instrumentation.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sepforge::instrumentation {

std::atomic<std::uint64_t>& softmax_evals() {
  static std::atomic<std::uint64_t> c{0};
  return c;
}

std::atomic<std::uint64_t>& blocks_applied() {
  static std::atomic<std::uint64_t> c{0};
  return c;
}

void reset() {
  softmax_evals().store(0);
  blocks_applied().store(0);
}

}  // namespace sepforge::instrumentation

namespace sepforge::kernels {

namespace {

Mode g_mode = Mode::parallel;

// Minimum per-call work (multiply-adds) before spinning up a thread team.
constexpr std::int64_t kGrain = 1 << 14;

bool go_parallel(std::int64_t work) {
#ifdef _OPENMP
  return g_mode == Mode::parallel && work >= kGrain;
#else
  (void)work;
  return false;
#endif
}

}  // namespace

Mode mode() { return g_mode; }
void set_mode(Mode m) { g_mode = m; }

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

inline void matmul_nn_row(const double* a, const double* b, double* out,
                          std::int64_t k, std::int64_t n, std::int64_t i,
                          bool accumulate) {
  double* orow = out + i * n;
  if (!accumulate) std::fill(orow, orow + n, 0.0);
  const double* arow = a + i * k;
  for (std::int64_t kk = 0; kk < k; ++kk) {
    const double av = arow[kk];
    const double* brow = b + kk * n;
    for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
  }
}

inline void matmul_nt_row(const double* a, const double* bt, double* out,
                          std::int64_t k, std::int64_t n, std::int64_t i,
                          bool accumulate) {
  const double* arow = a + i * k;
  double* orow = out + i * n;
  for (std::int64_t j = 0; j < n; ++j) {
    const double* brow = bt + j * k;
    double acc = 0.0;
    for (std::int64_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
    if (accumulate)
      orow[j] += acc;
    else
      orow[j] = acc;
  }
}

inline void matmul_tn_row(const double* at, const double* b, double* out,
                          std::int64_t m, std::int64_t k, std::int64_t n,
                          std::int64_t i, bool accumulate) {
  double* orow = out + i * n;
  if (!accumulate) std::fill(orow, orow + n, 0.0);
  for (std::int64_t kk = 0; kk < k; ++kk) {
    const double av = at[kk * m + i];
    const double* brow = b + kk * n;
    for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
  }
}

}  // namespace

void matmul_nn(const double* a, const double* b, double* out, std::int64_t m,
               std::int64_t k, std::int64_t n, bool accumulate) {
  if (go_parallel(m * k * n)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) matmul_nn_row(a, b, out, k, n, i, accumulate);
  } else {
    for (std::int64_t i = 0; i < m; ++i) matmul_nn_row(a, b, out, k, n, i, accumulate);
  }
}

void matmul_nt(const double* a, const double* bt, double* out, std::int64_t m,
               std::int64_t k, std::int64_t n, bool accumulate) {
  if (go_parallel(m * k * n)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) matmul_nt_row(a, bt, out, k, n, i, accumulate);
  } else {
    for (std::int64_t i = 0; i < m; ++i) matmul_nt_row(a, bt, out, k, n, i, accumulate);
  }
}

void matmul_tn(const double* at, const double* b, double* out, std::int64_t m,
               std::int64_t k, std::int64_t n, bool accumulate) {
  if (go_parallel(m * k * n)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) matmul_tn_row(at, b, out, m, k, n, i, accumulate);
  } else {
    for (std::int64_t i = 0; i < m; ++i) matmul_tn_row(at, b, out, m, k, n, i, accumulate);
  }
}

namespace {

inline void conv1d_out_channel(const double* x, const double* k, double* y,
                               std::int64_t c_in, std::int64_t t,
                               std::int64_t w, std::int64_t stride,
                               std::int64_t l_out, std::int64_t co,
                               bool accumulate) {
  double* yrow = y + co * l_out;
  for (std::int64_t l = 0; l < l_out; ++l) {
    double acc = 0.0;
    const std::int64_t base = l * stride;
    for (std::int64_t ci = 0; ci < c_in; ++ci) {
      const double* xrow = x + ci * t + base;
      const double* krow = k + (co * c_in + ci) * w;
      for (std::int64_t ww = 0; ww < w; ++ww) acc += xrow[ww] * krow[ww];
    }
    if (accumulate)
      yrow[l] += acc;
    else
      yrow[l] = acc;
  }
}

}  // namespace

void conv1d_fwd(const double* x, const double* k, double* y, std::int64_t c_in,
                std::int64_t t, std::int64_t c_out, std::int64_t w,
                std::int64_t stride, std::int64_t l_out, bool accumulate) {
  if (go_parallel(c_out * l_out * c_in * w)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t co = 0; co < c_out; ++co)
      conv1d_out_channel(x, k, y, c_in, t, w, stride, l_out, co, accumulate);
  } else {
    for (std::int64_t co = 0; co < c_out; ++co)
      conv1d_out_channel(x, k, y, c_in, t, w, stride, l_out, co, accumulate);
  }
}

namespace {

inline void conv1d_grad_k_channel(const double* x, const double* gy, double* gk,
                                  std::int64_t c_in, std::int64_t t,
                                  std::int64_t w, std::int64_t stride,
                                  std::int64_t l_out, std::int64_t co) {
  const double* gyrow = gy + co * l_out;
  for (std::int64_t ci = 0; ci < c_in; ++ci) {
    double* gkrow = gk + (co * c_in + ci) * w;
    const double* xrow = x + ci * t;
    for (std::int64_t ww = 0; ww < w; ++ww) {
      double acc = 0.0;
      for (std::int64_t l = 0; l < l_out; ++l) acc += gyrow[l] * xrow[l * stride + ww];
      gkrow[ww] += acc;
    }
  }
}

}  // namespace

void conv1d_grad_kernels(const double* x, const double* gy, double* gk,
                         std::int64_t c_in, std::int64_t t, std::int64_t c_out,
                         std::int64_t w, std::int64_t stride, std::int64_t l_out) {
  if (go_parallel(c_out * c_in * w * l_out)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t co = 0; co < c_out; ++co)
      conv1d_grad_k_channel(x, gy, gk, c_in, t, w, stride, l_out, co);
  } else {
    for (std::int64_t co = 0; co < c_out; ++co)
      conv1d_grad_k_channel(x, gy, gk, c_in, t, w, stride, l_out, co);
  }
}

namespace {

inline void convt_out_channel(const double* y, const double* k, double* x,
                              std::int64_t c_in, std::int64_t l, std::int64_t c_out,
                              std::int64_t w, std::int64_t stride,
                              std::int64_t t_out, std::int64_t co,
                              bool accumulate) {
  double* xrow = x + co * t_out;
  for (std::int64_t tt = 0; tt < t_out; ++tt) {
    double acc = 0.0;
    // All (l_idx, ww) with l_idx*stride + ww == tt, 0 <= ww < w.
    std::int64_t l_lo = (tt - w + stride) / stride;  // ceil((tt-w+1)/stride)
    if (tt - w + stride < 0) l_lo = 0;
    if (l_lo < 0) l_lo = 0;
    const std::int64_t l_hi = std::min(l - 1, tt / stride);
    for (std::int64_t li = l_lo; li <= l_hi; ++li) {
      const std::int64_t ww = tt - li * stride;
      for (std::int64_t ci = 0; ci < c_in; ++ci)
        acc += y[ci * l + li] * k[(ci * c_out + co) * w + ww];
    }
    if (accumulate)
      xrow[tt] += acc;
    else
      xrow[tt] = acc;
  }
}

}  // namespace

void conv1d_transpose_fwd(const double* y, const double* k, double* x,
                          std::int64_t c_in, std::int64_t l, std::int64_t c_out,
                          std::int64_t w, std::int64_t stride, bool accumulate) {
  const std::int64_t t_out = (l - 1) * stride + w;
  if (go_parallel(c_out * l * c_in * w)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t co = 0; co < c_out; ++co)
      convt_out_channel(y, k, x, c_in, l, c_out, w, stride, t_out, co, accumulate);
  } else {
    for (std::int64_t co = 0; co < c_out; ++co)
      convt_out_channel(y, k, x, c_in, l, c_out, w, stride, t_out, co, accumulate);
  }
}

namespace {

inline void convt_grad_k_channel(const double* y, const double* gx, double* gk,
                                 std::int64_t l, std::int64_t c_out,
                                 std::int64_t w, std::int64_t stride,
                                 std::int64_t t_out, std::int64_t ci) {
  const double* yrow = y + ci * l;
  for (std::int64_t co = 0; co < c_out; ++co) {
    const double* gxrow = gx + co * t_out;
    double* gkrow = gk + (ci * c_out + co) * w;
    for (std::int64_t ww = 0; ww < w; ++ww) {
      double acc = 0.0;
      for (std::int64_t li = 0; li < l; ++li) acc += yrow[li] * gxrow[li * stride + ww];
      gkrow[ww] += acc;
    }
  }
}

}  // namespace

void conv1d_transpose_grad_kernels(const double* y, const double* gx, double* gk,
                                   std::int64_t c_in, std::int64_t l,
                                   std::int64_t c_out, std::int64_t w,
                                   std::int64_t stride) {
  const std::int64_t t_out = (l - 1) * stride + w;
  if (go_parallel(c_in * c_out * w * l)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t ci = 0; ci < c_in; ++ci)
      convt_grad_k_channel(y, gx, gk, l, c_out, w, stride, t_out, ci);
  } else {
    for (std::int64_t ci = 0; ci < c_in; ++ci)
      convt_grad_k_channel(y, gx, gk, l, c_out, w, stride, t_out, ci);
  }
}

namespace {

inline double unary_eval(Unary f, double v) {
  switch (f) {
    case Unary::relu:
      return v > 0.0 ? v : 0.0;
    case Unary::sigmoid:
      return 1.0 / (1.0 + std::exp(-v));
    case Unary::tanh_fn:
      return std::tanh(v);
    case Unary::log_fn:
      return std::log(v);
  }
  return 0.0;
}

inline double unary_deriv(Unary f, double x, double y) {
  switch (f) {
    case Unary::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Unary::sigmoid:
      return y * (1.0 - y);
    case Unary::tanh_fn:
      return 1.0 - y * y;
    case Unary::log_fn:
      return 1.0 / x;
  }
  return 0.0;
}

template <typename F>
void for_each_index(std::int64_t n, std::int64_t work, F&& body) {
  if (go_parallel(work)) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) body(i);
  }
}

}  // namespace

void map_unary(Unary f, const double* x, double* y, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { y[i] = unary_eval(f, x[i]); });
}

void map_unary_grad(Unary f, const double* x, const double* y, const double* gy,
                    double* gx, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { gx[i] += gy[i] * unary_deriv(f, x[i], y[i]); });
}

void add(const double* a, const double* b, double* y, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { y[i] = a[i] + b[i]; });
}

void sub(const double* a, const double* b, double* y, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { y[i] = a[i] - b[i]; });
}

void mul(const double* a, const double* b, double* y, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { y[i] = a[i] * b[i]; });
}

void scale(const double* x, double c, double* y, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { y[i] = c * x[i]; });
}

void add_const(const double* x, double c, double* y, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { y[i] = x[i] + c; });
}

void axpy(double alpha, const double* x, double* y, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { y[i] += alpha * x[i]; });
}

void fma_acc(const double* a, const double* b, double* y, std::int64_t n) {
  for_each_index(n, n, [&](std::int64_t i) { y[i] += a[i] * b[i]; });
}

double reduce_sum(const double* x, std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double reduce_dot(const double* a, const double* b, std::int64_t n) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void softmax_rows(const double* x, double* y, std::int64_t rows, std::int64_t cols) {
  instrumentation::softmax_evals().fetch_add(static_cast<std::uint64_t>(rows));
  for_each_index(rows, rows * cols * 4, [&](std::int64_t r) {
    const double* xrow = x + r * cols;
    double* yrow = y + r * cols;
    double mx = xrow[0];
    for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, xrow[j]);
    double sum = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      yrow[j] = std::exp(xrow[j] - mx);
      sum += yrow[j];
    }
    const double inv = 1.0 / sum;
    for (std::int64_t j = 0; j < cols; ++j) yrow[j] *= inv;
  });
}

void softmax_rows_grad(const double* y, const double* gy, double* gx,
                       std::int64_t rows, std::int64_t cols) {
  for_each_index(rows, rows * cols * 2, [&](std::int64_t r) {
    const double* yrow = y + r * cols;
    const double* grow = gy + r * cols;
    double* out = gx + r * cols;
    double s = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) s += grow[j] * yrow[j];
    for (std::int64_t j = 0; j < cols; ++j) out[j] += yrow[j] * (grow[j] - s);
  });
}

void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double eps, double* y, double* xhat, double* inv_std,
                     std::int64_t rows, std::int64_t cols) {
  for_each_index(rows, rows * cols * 4, [&](std::int64_t r) {
    const double* xrow = x + r * cols;
    double* yrow = y + r * cols;
    double* hrow = xhat + r * cols;
    double mean = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) mean += xrow[j];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      const double d = xrow[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::int64_t j = 0; j < cols; ++j) {
      hrow[j] = (xrow[j] - mean) * inv;
      yrow[j] = gain[j] * hrow[j] + bias[j];
    }
  });
}

void layer_norm_rows_grad(const double* xhat, const double* inv_std,
                          const double* gain, const double* gy, double* gx,
                          double* ggain, double* gbias, std::int64_t rows,
                          std::int64_t cols) {
  for_each_index(rows, rows * cols * 4, [&](std::int64_t r) {
    const double* hrow = xhat + r * cols;
    const double* grow = gy + r * cols;
    double* out = gx + r * cols;
    double sum_g = 0.0, sum_gh = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      const double gh = grow[j] * gain[j];
      sum_g += gh;
      sum_gh += gh * hrow[j];
    }
    const double inv_n = 1.0 / static_cast<double>(cols);
    for (std::int64_t j = 0; j < cols; ++j) {
      const double gh = grow[j] * gain[j];
      out[j] += inv_std[r] * (gh - inv_n * sum_g - hrow[j] * inv_n * sum_gh);
    }
  });
  // Parameter grads fold over rows in fixed order per column.
  for_each_index(cols, rows * cols, [&](std::int64_t j) {
    double ag = 0.0, ab = 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      ag += gy[r * cols + j] * xhat[r * cols + j];
      ab += gy[r * cols + j];
    }
    ggain[j] += ag;
    gbias[j] += ab;
  });
}

void add_rowvec(const double* x, const double* b, double* y, std::int64_t rows,
                std::int64_t cols) {
  for_each_index(rows, rows * cols, [&](std::int64_t r) {
    const double* xrow = x + r * cols;
    double* yrow = y + r * cols;
    for (std::int64_t j = 0; j < cols; ++j) yrow[j] = xrow[j] + b[j];
  });
}

void gather_rows(const double* x, const std::int64_t* idx, double* y,
                 std::int64_t out_rows, std::int64_t cols) {
  for_each_index(out_rows, out_rows * cols, [&](std::int64_t r) {
    double* yrow = y + r * cols;
    if (idx[r] < 0) {
      std::fill(yrow, yrow + cols, 0.0);
    } else {
      const double* xrow = x + idx[r] * cols;
      std::copy(xrow, xrow + cols, yrow);
    }
  });
}

void scatter_add_rows(const double* x, const std::int64_t* idx,
                      std::int64_t in_rows, double* y, std::int64_t out_rows,
                      std::int64_t cols, bool accumulate) {
  // Bucket sources per output row so the fold order is fixed and rows can
  // be processed independently.
  std::vector<std::vector<std::int64_t>> buckets(static_cast<std::size_t>(out_rows));
  for (std::int64_t r = 0; r < in_rows; ++r) {
    if (idx[r] >= 0 && idx[r] < out_rows) buckets[static_cast<std::size_t>(idx[r])].push_back(r);
  }
  for_each_index(out_rows, in_rows * cols, [&](std::int64_t q) {
    double* yrow = y + q * cols;
    if (!accumulate) std::fill(yrow, yrow + cols, 0.0);
    for (std::int64_t r : buckets[static_cast<std::size_t>(q)]) {
      const double* xrow = x + r * cols;
      for (std::int64_t j = 0; j < cols; ++j) yrow[j] += xrow[j];
    }
  });
}

void scale_rows(const double* x, const double* factors, double* y,
                std::int64_t rows, std::int64_t cols) {
  for_each_index(rows, rows * cols, [&](std::int64_t r) {
    const double f = factors[r];
    const double* xrow = x + r * cols;
    double* yrow = y + r * cols;
    for (std::int64_t j = 0; j < cols; ++j) yrow[j] = f * xrow[j];
  });
}

void transpose(const double* x, double* y, std::int64_t rows, std::int64_t cols) {
  for_each_index(rows, rows * cols, [&](std::int64_t r) {
    const double* xrow = x + r * cols;
    for (std::int64_t j = 0; j < cols; ++j) y[j * rows + r] = xrow[j];
  });
}

}  // namespace sepforge::kernels
