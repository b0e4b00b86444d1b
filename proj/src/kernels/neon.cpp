#include "kernels_impl.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include <algorithm>
#include <cmath>

namespace kprop::simd::detail {
namespace {

void axpy_neon(double* acc, double alpha, const double* x, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // vmulq + vaddq, not vfmaq: the scalar path rounds twice.
    const float64x2_t prod = vmulq_f64(a, vld1q_f64(x + i));
    vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), prod));
  }
  for (; i < n; ++i) acc[i] += alpha * x[i];
}

void sqrt_ratio_scale_neon(double* y, const double* num, const double* den, double eps,
                           std::size_t n) {
  const float64x2_t e = vdupq_n_f64(eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vaddq_f64(vld1q_f64(den + i), e);
    const float64x2_t r = vsqrtq_f64(vdivq_f64(vld1q_f64(num + i), d));
    vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), r));
  }
  for (; i < n; ++i) y[i] *= std::sqrt(num[i] / (den[i] + eps));
}

void projected_step_neon(double* y, const double* dir, double step, double floor,
                         std::size_t n) {
  const float64x2_t s = vdupq_n_f64(step);
  const float64x2_t f = vdupq_n_f64(floor);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t cand = vaddq_f64(vld1q_f64(y + i), vmulq_f64(s, vld1q_f64(dir + i)));
    vst1q_f64(y + i, vmaxq_f64(f, cand));
  }
  for (; i < n; ++i) y[i] = std::max(floor, y[i] + step * dir[i]);
}

const KernelTable kNeonTable{Isa::Neon, "neon", axpy_neon, sqrt_ratio_scale_neon,
                             projected_step_neon};

}  // namespace

const KernelTable* neon_table() noexcept { return &kNeonTable; }

}  // namespace kprop::simd::detail

#else

namespace kprop::simd::detail {
const KernelTable* neon_table() noexcept { return nullptr; }
}  // namespace kprop::simd::detail

#endif
