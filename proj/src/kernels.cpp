// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0

#include "dsum/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

namespace dsum::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void vadd(const double* x, const double* y, double* z, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void scale(double* x, std::size_t n, double alpha) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] * alpha;
}

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double max_value(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2) {
  const double c1 = 1.0 - beta1;
  const double c2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + c1 * gi;
    v[i] = beta2 * v[i] + c2 * (gi * gi);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] = p[i] - (lr * mhat) / (std::sqrt(vhat) + eps);
  }
}

}  // namespace scalar

namespace {

struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*vadd)(const double*, const double*, double*, std::size_t);
  void (*scale)(double*, std::size_t, double);
  double (*sum)(const double*, std::size_t);
  double (*max_value)(const double*, std::size_t);
  void (*adam_step)(double*, double*, double*, const double*, std::size_t,
                    double, double, double, double, double, double);
};

constexpr Ops kScalarOps = {scalar::dot,  scalar::axpy, scalar::vadd,
                            scalar::scale, scalar::sum,  scalar::max_value,
                            scalar::adam_step};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Ops kAvx2Ops = {avx2::dot,  avx2::axpy, avx2::vadd,    avx2::scale,
                          avx2::sum,  avx2::max_value, avx2::adam_step};
#endif

#if defined(__aarch64__)
constexpr Ops kNeonOps = {neon::dot,  neon::axpy, neon::vadd,    neon::scale,
                          neon::sum,  neon::max_value, neon::adam_step};
#endif

const Ops* g_ops = nullptr;
Backend g_backend = Backend::Scalar;

const Ops& ops() {
  if (g_ops == nullptr) select_auto();
  return *g_ops;
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "?";
}

bool supported(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active() {
  if (g_ops == nullptr) select_auto();
  return g_backend;
}

void select(Backend b) {
  if (!supported(b))
    throw std::runtime_error(std::string("kernel backend not supported here: ") +
                             backend_name(b));
  switch (b) {
    case Backend::Scalar:
      g_ops = &kScalarOps;
      break;
    case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      g_ops = &kAvx2Ops;
#endif
      break;
    case Backend::Neon:
#if defined(__aarch64__)
      g_ops = &kNeonOps;
#endif
      break;
  }
  g_backend = b;
}

void select_auto() {
  const char* env = std::getenv("DSUM_KERNELS");
  if (env != nullptr && env[0] != '\0' && std::string(env) != "auto") {
    const std::string want(env);
    if (want == "scalar") return select(Backend::Scalar);
    if (want == "avx2") return select(Backend::Avx2);
    if (want == "neon") return select(Backend::Neon);
    throw std::runtime_error("DSUM_KERNELS: unknown backend '" + want + "'");
  }
  if (supported(Backend::Avx2)) return select(Backend::Avx2);
  if (supported(Backend::Neon)) return select(Backend::Neon);
  select(Backend::Scalar);
}

double dot(const double* a, const double* b, std::size_t n) {
  return ops().dot(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  ops().axpy(alpha, x, y, n);
}
void vadd(const double* x, const double* y, double* z, std::size_t n) {
  ops().vadd(x, y, z, n);
}
void scale(double* x, std::size_t n, double alpha) { ops().scale(x, n, alpha); }
double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
double max_value(const double* x, std::size_t n) { return ops().max_value(x, n); }
void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2) {
  ops().adam_step(p, m, v, g, n, lr, beta1, beta2, eps, bias1, bias2);
}

void matvec(const double* w, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(w + r * cols, x, cols);
}

void matvec_t_add(const double* w, const double* x, double* y,
                  std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], w + r * cols, y, cols);
}

void outer_add(const double* u, const double* v, double* w, std::size_t rows,
               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(u[r], v, w + r * cols, cols);
}

double logsumexp(const double* x, std::size_t n) {
  if (n == 0) return -std::numeric_limits<double>::infinity();
  const double m = max_value(x, n);
  if (!std::isfinite(m)) return m;  // all -inf, or a +/-inf slipped in
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

void softmax_inplace(double* x, std::size_t n) {
  const double m = max_value(x, n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - m);
    s += x[i];
  }
  scale(x, n, 1.0 / s);
}

}  // namespace dsum::kernels
