#include "kernels_impl.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace kprop::simd::detail {
namespace {

// Compiled with a per-function target so the rest of the TU stays baseline
// x86-64 and the functions are only reached after the runtime check.
#define KPROP_AVX2 __attribute__((target("avx2")))

KPROP_AVX2 void axpy_avx2(double* acc, double alpha, const double* x, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(a, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), prod));
  }
  for (; i < n; ++i) acc[i] += alpha * x[i];
}

KPROP_AVX2 void sqrt_ratio_scale_avx2(double* y, const double* num, const double* den,
                                      double eps, std::size_t n) {
  const __m256d e = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_add_pd(_mm256_loadu_pd(den + i), e);
    const __m256d r = _mm256_sqrt_pd(_mm256_div_pd(_mm256_loadu_pd(num + i), d));
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), r));
  }
  for (; i < n; ++i) y[i] *= std::sqrt(num[i] / (den[i] + eps));
}

KPROP_AVX2 void projected_step_avx2(double* y, const double* dir, double step, double floor,
                                    std::size_t n) {
  const __m256d s = _mm256_set1_pd(step);
  const __m256d f = _mm256_set1_pd(floor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d cand =
        _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(s, _mm256_loadu_pd(dir + i)));
    // maxpd returns its second operand on NaN or equal inputs, which is what
    // std::max(floor, v) does too.
    _mm256_storeu_pd(y + i, _mm256_max_pd(cand, f));
  }
  for (; i < n; ++i) y[i] = std::max(floor, y[i] + step * dir[i]);
}

#undef KPROP_AVX2

const KernelTable kAvx2Table{Isa::Avx2, "avx2", axpy_avx2, sqrt_ratio_scale_avx2,
                             projected_step_avx2};

}  // namespace

const KernelTable* avx2_table() noexcept {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") ? &kAvx2Table : nullptr;
}

}  // namespace kprop::simd::detail

#else

namespace kprop::simd::detail {
const KernelTable* avx2_table() noexcept { return nullptr; }
}  // namespace kprop::simd::detail

#endif
