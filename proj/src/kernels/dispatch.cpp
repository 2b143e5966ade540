#include <atomic>
#include <cassert>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "tabboost/kernels.hpp"

namespace tabboost::kernels {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(TABBOOST_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(TABBOOST_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* compiled_table(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &scalar::table;
    case Isa::avx2:
#if defined(TABBOOST_HAVE_AVX2)
      return &avx2::table;
#else
      return nullptr;
#endif
    case Isa::neon:
#if defined(TABBOOST_HAVE_NEON)
      return &neon::table;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("TABBOOST_ISA")) {
    if (auto isa = parse_isa(env); isa && table_for(*isa)) return table_for(*isa);
  }
  return table_for(detected_isa());
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> current{initial_table()};
  return current;
}

const KernelTable& current() { return *active().load(std::memory_order_relaxed); }

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  return std::nullopt;
}

const KernelTable* table_for(Isa isa) {
  return cpu_supports(isa) ? compiled_table(isa) : nullptr;
}

Isa detected_isa() {
  if (table_for(Isa::avx2)) return Isa::avx2;
  if (table_for(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

Isa active_isa() { return current().isa; }

void set_active_isa(Isa isa) {
  const KernelTable* table = table_for(isa);
  if (!table) throw std::invalid_argument("kernel variant unavailable: " + std::string(isa_name(isa)));
  active().store(table, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return current().dot(a.data(), b.data(), a.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  current().axpy(a, x.data(), y.data(), x.size());
}

void scale_add(double alpha, std::span<const double> x, double beta, std::span<const double> y,
               std::span<double> out) {
  assert(x.size() == y.size() && x.size() == out.size());
  current().scale_add(alpha, x.data(), beta, y.data(), out.data(), x.size());
}

double sum_squares(std::span<const double> x) { return current().sum_squares(x.data(), x.size()); }

void midpoint(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  assert(a.size() == b.size() && a.size() == out.size());
  current().midpoint(a.data(), b.data(), out.data(), a.size());
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamStep& step) {
  assert(param.size() == grad.size() && param.size() == m.size() && param.size() == v.size());
  current().adam_update(param.data(), grad.data(), m.data(), v.data(), param.size(), step);
}

}  // namespace tabboost::kernels
