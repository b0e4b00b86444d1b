#include <algorithm>
#include <cmath>

#include "kernels_impl.hpp"

namespace kprop::simd::detail {
namespace {

void axpy_scalar(double* acc, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += alpha * x[i];
}

void sqrt_ratio_scale_scalar(double* y, const double* num, const double* den, double eps,
                             std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= std::sqrt(num[i] / (den[i] + eps));
}

void projected_step_scalar(double* y, const double* dir, double step, double floor,
                           std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::max(floor, y[i] + step * dir[i]);
}

}  // namespace

const KernelTable kScalarTable{Isa::Scalar, "scalar", axpy_scalar, sqrt_ratio_scale_scalar,
                               projected_step_scalar};

}  // namespace kprop::simd::detail
