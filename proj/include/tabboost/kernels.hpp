#pragma once

// Dense double-precision kernels used by the accumulation loop and the
// built-in hashed-feature learner. Every kernel has a scalar reference
// implementation; AVX2 (x86-64) and NEON (aarch64) variants are compiled when
// the target supports them and selected at runtime.
//
// Reductions (dot, sum_squares) use several lane accumulators in the vector
// variants, so they agree with the scalar reference only up to summation
// order. Elementwise kernels agree to within one rounding (FMA contraction).

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace tabboost::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);

struct AdamStep {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  // 1 - beta^t for the current step t.
  double bias_correction1;
  double bias_correction2;
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*scale_add)(double alpha, const double* x, double beta, const double* y, double* out,
                    std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  void (*midpoint)(const double* a, const double* b, double* out, std::size_t n);
  void (*adam_update)(double* param, const double* grad, double* m, double* v, std::size_t n,
                      const AdamStep& step);
};

// Table for `isa`, or nullptr when that variant is not compiled in or the
// running CPU lacks the instructions.
const KernelTable* table_for(Isa isa);

// Best variant the running CPU supports. TABBOOST_ISA=scalar|avx2|neon in the
// environment overrides the choice at first use.
Isa detected_isa();
Isa active_isa();
// Throws std::invalid_argument when the variant is unavailable.
void set_active_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
// out = alpha * x + beta * y; out may alias x or y.
void scale_add(double alpha, std::span<const double> x, double beta, std::span<const double> y,
               std::span<double> out);
double sum_squares(std::span<const double> x);
// out = (a + b) / 2
void midpoint(std::span<const double> a, std::span<const double> b, std::span<double> out);
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamStep& step);

namespace scalar {
extern const KernelTable table;
}
namespace avx2 {
extern const KernelTable table;
}
namespace neon {
extern const KernelTable table;
}

}  // namespace tabboost::kernels
