// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision kernels used by the CRF and the pointer-generator
// training loops. Every primitive has a scalar reference implementation and,
// where the host supports it, a SIMD variant (AVX2 on x86-64, NEON on
// aarch64) selected at runtime. Elementwise kernels keep the same operation
// order in every variant and are bit-identical to the scalar reference;
// reductions (dot, sum) reassociate and agree only up to rounding.

#pragma once

#include <cstddef>

namespace dsum::kernels {

enum class Backend { Scalar, Avx2, Neon };

const char* backend_name(Backend b);
bool supported(Backend b);

// Active backend. Defaults to the best supported one; the DSUM_KERNELS
// environment variable ("scalar", "avx2", "neon", "auto") overrides.
Backend active();
void select(Backend b);  // throws std::runtime_error if unsupported
void select_auto();

// ---- dispatched primitives ------------------------------------------------

// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);
// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);
// z[i] = x[i] + y[i]; z may alias x or y
void vadd(const double* x, const double* y, double* z, std::size_t n);
// x[i] *= alpha
void scale(double* x, std::size_t n, double alpha);
double sum(const double* x, std::size_t n);
// n must be > 0; inputs must not contain NaN
double max_value(const double* x, std::size_t n);
// One Adam descent step over n coordinates:
//   m = beta1*m + (1-beta1)*g
//   v = beta2*v + (1-beta2)*g*g
//   p -= lr * (m/bias1) / (sqrt(v/bias2) + eps)
// bias1/bias2 are the precomputed corrections 1-beta1^t, 1-beta2^t.
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2);

// ---- composites (built on the primitives above) ----------------------------

// y = W x, W row-major rows x cols
void matvec(const double* w, const double* x, double* y, std::size_t rows,
            std::size_t cols);
// y += W^T x, W row-major rows x cols, x has rows entries, y has cols
void matvec_t_add(const double* w, const double* x, double* y,
                  std::size_t rows, std::size_t cols);
// W += u v^T, W row-major rows x cols
void outer_add(const double* u, const double* v, double* w, std::size_t rows,
               std::size_t cols);
// log sum_i exp(x[i]); -inf for n == 0
double logsumexp(const double* x, std::size_t n);
// x <- exp(x - max) / sum, numerically stable; n must be > 0
void softmax_inplace(double* x, std::size_t n);

// ---- per-variant entry points, for equivalence tests ------------------------

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void vadd(const double* x, const double* y, double* z, std::size_t n);
void scale(double* x, std::size_t n, double alpha);
double sum(const double* x, std::size_t n);
double max_value(const double* x, std::size_t n);
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void vadd(const double* x, const double* y, double* z, std::size_t n);
void scale(double* x, std::size_t n, double alpha);
double sum(const double* x, std::size_t n);
double max_value(const double* x, std::size_t n);
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void vadd(const double* x, const double* y, double* z, std::size_t n);
void scale(double* x, std::size_t n, double alpha);
double sum(const double* x, std::size_t n);
double max_value(const double* x, std::size_t n);
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2);
}  // namespace neon
#endif

}  // namespace dsum::kernels
