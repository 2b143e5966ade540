// aarch64 Advanced SIMD variants; two doubles per register.

#include <arm_neon.h>

#include <cmath>

#include "tabboost/kernels.hpp"

namespace tabboost::kernels::neon {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_add(double alpha, const double* x, double beta, const double* y, double* out,
               std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const float64x2_t vb = vdupq_n_f64(beta);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t ax = vmulq_f64(va, vld1q_f64(x + i));
    vst1q_f64(out + i, vfmaq_f64(ax, vb, vld1q_f64(y + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

double sum_squares(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t a = vld1q_f64(x + i);
    const float64x2_t b = vld1q_f64(x + i + 2);
    acc0 = vfmaq_f64(acc0, a, a);
    acc1 = vfmaq_f64(acc1, b, b);
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += x[i] * x[i];
  return sum;
}

void midpoint(const double* a, const double* b, double* out, std::size_t n) {
  const float64x2_t half = vdupq_n_f64(0.5);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vmulq_f64(half, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i))));
  }
  for (; i < n; ++i) out[i] = 0.5 * (a[i] + b[i]);
}

void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamStep& s) {
  const float64x2_t b1 = vdupq_n_f64(s.beta1);
  const float64x2_t b2 = vdupq_n_f64(s.beta2);
  const float64x2_t c1 = vdupq_n_f64(1.0 - s.beta1);
  const float64x2_t c2 = vdupq_n_f64(1.0 - s.beta2);
  const float64x2_t bc1 = vdupq_n_f64(s.bias_correction1);
  const float64x2_t bc2 = vdupq_n_f64(s.bias_correction2);
  const float64x2_t lr = vdupq_n_f64(s.learning_rate);
  const float64x2_t eps = vdupq_n_f64(s.epsilon);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t mi = vfmaq_f64(vmulq_f64(c1, g), b1, vld1q_f64(m + i));
    const float64x2_t vi = vfmaq_f64(vmulq_f64(c2, vmulq_f64(g, g)), b2, vld1q_f64(v + i));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(vdivq_f64(vi, bc2)), eps);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, vdivq_f64(mi, bc1)), denom);
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
  }
  const double k1 = 1.0 - s.beta1;
  const double k2 = 1.0 - s.beta2;
  for (; i < n; ++i) {
    m[i] = s.beta1 * m[i] + k1 * grad[i];
    v[i] = s.beta2 * v[i] + k2 * (grad[i] * grad[i]);
    param[i] -= s.learning_rate * (m[i] / s.bias_correction1) /
                (std::sqrt(v[i] / s.bias_correction2) + s.epsilon);
  }
}

}  // namespace

const KernelTable table{Isa::neon, dot, axpy, scale_add, sum_squares, midpoint, adam_update};

}  // namespace tabboost::kernels::neon
