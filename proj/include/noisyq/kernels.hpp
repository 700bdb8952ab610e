#pragma once

#include <cstddef>

namespace noisyq::kern {

// Dense row-major kernels backing the tensor graph. Each kernel has an
// OpenMP-parallel entry point and a serial reference implementation.
// Both route every output element through the same inner helper, so the
// parallel results are bit-identical to the serial ones for any thread
// count. Small problems skip the parallel region entirely.

// c[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);

// y[cols x rows] = transpose of x[rows x cols]
void transpose(const double* x, double* y, std::size_t rows, std::size_t cols);
void transpose_serial(const double* x, double* y, std::size_t rows, std::size_t cols);

void add(const double* a, const double* b, double* out, std::size_t n);
void add_serial(const double* a, const double* b, double* out, std::size_t n);

void mul(const double* a, const double* b, double* out, std::size_t n);
void mul_serial(const double* a, const double* b, double* out, std::size_t n);

void relu(const double* x, double* out, std::size_t n);
void relu_serial(const double* x, double* out, std::size_t n);

// out[i] = x[i] > 0 ? g[i] : 0
void relu_backward(const double* x, const double* g, double* out, std::size_t n);
void relu_backward_serial(const double* x, const double* g, double* out, std::size_t n);

// out[r, c] = x[r, c] + b[c]
void add_bias(const double* x, const double* b, double* out,
              std::size_t rows, std::size_t cols);
void add_bias_serial(const double* x, const double* b, double* out,
                     std::size_t rows, std::size_t cols);

// out[c] = sum_r x[r, c]
void col_sum(const double* x, double* out, std::size_t rows, std::size_t cols);
void col_sum_serial(const double* x, double* out, std::size_t rows, std::size_t cols);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);
void axpy_serial(double alpha, const double* x, double* y, std::size_t n);

}  // namespace noisyq::kern
