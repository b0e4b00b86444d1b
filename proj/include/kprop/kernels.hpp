#pragma once

// Elementwise kernels used by the label and propagation updates.
//
// Every kernel has a scalar reference implementation and optional SIMD
// variants (AVX2 on x86-64, NEON on AArch64). The variant is chosen once at
// runtime from the CPU feature set; KPROP_ISA=scalar|avx2|neon overrides the
// choice. Kernels only vectorize across independent output lanes and never
// reassociate sums, so every variant is bit-identical to the scalar one.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace kprop::simd {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
  Isa isa;
  const char* name;
  /// acc[i] += alpha * x[i]
  void (*axpy)(double* acc, double alpha, const double* x, std::size_t n);
  /// y[i] *= sqrt(num[i] / (den[i] + eps))
  void (*sqrt_ratio_scale)(double* y, const double* num, const double* den, double eps,
                           std::size_t n);
  /// y[i] = max(floor, y[i] + step * dir[i])
  void (*projected_step)(double* y, const double* dir, double step, double floor,
                         std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
/// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

/// The table used by the engine.
const KernelTable& active() noexcept;

/// Forces a variant. Returns false (and keeps the current choice) when the
/// variant is unavailable on this machine.
bool select(Isa isa) noexcept;

std::optional<Isa> parse_isa(std::string_view name) noexcept;

inline void axpy(std::span<double> acc, double alpha, std::span<const double> x) {
  active().axpy(acc.data(), alpha, x.data(), acc.size());
}

inline void sqrt_ratio_scale(std::span<double> y, std::span<const double> num,
                             std::span<const double> den, double eps) {
  active().sqrt_ratio_scale(y.data(), num.data(), den.data(), eps, y.size());
}

inline void projected_step(std::span<double> y, std::span<const double> dir, double step,
                           double floor) {
  active().projected_step(y.data(), dir.data(), step, floor, y.size());
}

}  // namespace kprop::simd
