#include "tabboost/kernels.hpp"

#include <cmath>

namespace tabboost::kernels::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_add(double alpha, const double* x, double beta, const double* y, double* out,
               std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

double sum_squares(const double* x, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += x[i] * x[i];
  return sum;
}

void midpoint(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (a[i] + b[i]);
}

void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamStep& s) {
  const double c1 = 1.0 - s.beta1;
  const double c2 = 1.0 - s.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = s.beta1 * m[i] + c1 * grad[i];
    v[i] = s.beta2 * v[i] + c2 * (grad[i] * grad[i]);
    const double m_hat = m[i] / s.bias_correction1;
    const double v_hat = v[i] / s.bias_correction2;
    param[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace

const KernelTable table{Isa::scalar, dot, axpy, scale_add, sum_squares, midpoint, adam_update};

}  // namespace tabboost::kernels::scalar
