#pragma once

#include "kprop/kernels.hpp"

namespace kprop::simd::detail {

extern const KernelTable kScalarTable;
// Defined only when the matching variant is compiled in.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

}  // namespace kprop::simd::detail
