#include "noisyq/kernels.hpp"

namespace noisyq::kern {

namespace {

// Work thresholds below which the parallel entry points stay serial.
// Thresholds only affect scheduling, never the arithmetic.
constexpr std::size_t kMatmulParThreshold = 1u << 15;
constexpr std::size_t kElemParThreshold = 1u << 16;

inline void matmul_row(const double* a_row, const double* b, double* c_row,
                       std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) c_row[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a_row[p];
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

inline void transpose_row(const double* x_row, double* y, std::size_t r,
                          std::size_t rows, std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) y[c * rows + r] = x_row[c];
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(a + i * k, b, c + i * n, k, n);
}

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
  if (m * k * n < kMatmulParThreshold) {
    matmul_serial(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) matmul_row(a + i * k, b, c + i * n, k, n);
}

void transpose_serial(const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) transpose_row(x + r * cols, y, r, rows, cols);
}

void transpose(const double* x, double* y, std::size_t rows, std::size_t cols) {
  if (rows * cols < kElemParThreshold) {
    transpose_serial(x, y, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) transpose_row(x + r * cols, y, r, rows, cols);
}

#define NOISYQ_ELEMWISE(name, expr)                                            \
  void name##_serial(const double* a, const double* b, double* out,           \
                     std::size_t n) {                                          \
    for (std::size_t i = 0; i < n; ++i) out[i] = (expr);                       \
  }                                                                            \
  void name(const double* a, const double* b, double* out, std::size_t n) {    \
    if (n < kElemParThreshold) {                                               \
      name##_serial(a, b, out, n);                                             \
      return;                                                                  \
    }                                                                          \
    _Pragma("omp parallel for schedule(static)")                               \
    for (std::size_t i = 0; i < n; ++i) out[i] = (expr);                       \
  }

NOISYQ_ELEMWISE(add, a[i] + b[i])
NOISYQ_ELEMWISE(mul, a[i] * b[i])

#undef NOISYQ_ELEMWISE

void relu_serial(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu(const double* x, double* out, std::size_t n) {
  if (n < kElemParThreshold) {
    relu_serial(x, out, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_serial(const double* x, const double* g, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

void relu_backward(const double* x, const double* g, double* out, std::size_t n) {
  if (n < kElemParThreshold) {
    relu_backward_serial(x, g, out, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

void add_bias_serial(const double* x, const double* b, double* out,
                     std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* or_ = out + r * cols;
    for (std::size_t c = 0; c < cols; ++c) or_[c] = xr[c] + b[c];
  }
}

void add_bias(const double* x, const double* b, double* out,
              std::size_t rows, std::size_t cols) {
  if (rows * cols < kElemParThreshold) {
    add_bias_serial(x, b, out, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* or_ = out + r * cols;
    for (std::size_t c = 0; c < cols; ++c) or_[c] = xr[c] + b[c];
  }
}

void col_sum_serial(const double* x, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += x[r * cols + c];
    out[c] = s;
  }
}

void col_sum(const double* x, double* out, std::size_t rows, std::size_t cols) {
  if (rows * cols < kElemParThreshold) {
    col_sum_serial(x, out, rows, cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < cols; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += x[r * cols + c];
    out[c] = s;
  }
}

void axpy_serial(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  if (n < kElemParThreshold) {
    axpy_serial(alpha, x, y, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace noisyq::kern
