// Copyright 2026 the dsum authors
// SPDX-License-Identifier: Apache-2.0
//
// NEON variants (aarch64, 2 x f64 lanes). Same contract as the AVX2 file:
// elementwise kernels mirror the scalar operation order exactly.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

#include "dsum/kernels.hpp"

namespace dsum::kernels::neon {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vx = vld1q_f64(x + i);
    const float64x2_t vy = vld1q_f64(y + i);
    vst1q_f64(y + i, vaddq_f64(vy, vmulq_f64(va, vx)));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void vadd(const double* x, const double* y, double* z, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(z + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) z[i] = x[i] + y[i];
}

void scale(double* x, std::size_t n, double alpha) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
  for (; i < n; ++i) x[i] = x[i] * alpha;
}

double sum(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) s += x[i];
  return s;
}

double max_value(const double* x, std::size_t n) {
  std::size_t i = 0;
  double m;
  if (n >= 2) {
    float64x2_t acc = vld1q_f64(x);
    for (i = 2; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vld1q_f64(x + i));
    m = vgetq_lane_f64(acc, 0);
    const double hi = vgetq_lane_f64(acc, 1);
    if (hi > m) m = hi;
  } else {
    m = x[0];
    i = 1;
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

void adam_step(double* p, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2) {
  const float64x2_t vb1 = vdupq_n_f64(beta1);
  const float64x2_t vb2 = vdupq_n_f64(beta2);
  const float64x2_t vc1 = vdupq_n_f64(1.0 - beta1);
  const float64x2_t vc2 = vdupq_n_f64(1.0 - beta2);
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t veps = vdupq_n_f64(eps);
  const float64x2_t vbias1 = vdupq_n_f64(bias1);
  const float64x2_t vbias2 = vdupq_n_f64(bias2);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vg = vld1q_f64(g + i);
    float64x2_t vm = vld1q_f64(m + i);
    float64x2_t vv = vld1q_f64(v + i);
    vm = vaddq_f64(vmulq_f64(vb1, vm), vmulq_f64(vc1, vg));
    vv = vaddq_f64(vmulq_f64(vb2, vv), vmulq_f64(vc2, vmulq_f64(vg, vg)));
    vst1q_f64(m + i, vm);
    vst1q_f64(v + i, vv);
    const float64x2_t mhat = vdivq_f64(vm, vbias1);
    const float64x2_t vhat = vdivq_f64(vv, vbias2);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(vhat), veps);
    const float64x2_t vp = vld1q_f64(p + i);
    vst1q_f64(p + i, vsubq_f64(vp, vdivq_f64(vmulq_f64(vlr, mhat), denom)));
  }
  const double c1 = 1.0 - beta1;
  const double c2 = 1.0 - beta2;
  for (; i < n; ++i) {
    const double gi = g[i];
    m[i] = beta1 * m[i] + c1 * gi;
    v[i] = beta2 * v[i] + c2 * (gi * gi);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    p[i] = p[i] - (lr * mhat) / (std::sqrt(vhat) + eps);
  }
}

}  // namespace dsum::kernels::neon

#endif  // aarch64
