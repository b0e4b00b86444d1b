#include <atomic>
#include <cstdlib>

#include "kernels_impl.hpp"

namespace kprop::simd {
namespace {

const KernelTable* best_available() noexcept {
  if (const char* env = std::getenv("KPROP_ISA")) {
    if (auto isa = parse_isa(env)) {
      switch (*isa) {
        case Isa::Scalar:
          return &detail::kScalarTable;
        case Isa::Avx2:
          if (auto* t = detail::avx2_table()) return t;
          break;
        case Isa::Neon:
          if (auto* t = detail::neon_table()) return t;
          break;
      }
    }
  }
  if (auto* t = detail::avx2_table()) return t;
  if (auto* t = detail::neon_table()) return t;
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{best_available()};
  return table;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept { return detail::kScalarTable; }
const KernelTable* avx2_kernels() noexcept { return detail::avx2_table(); }
const KernelTable* neon_kernels() noexcept { return detail::neon_table(); }

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) noexcept {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::Scalar:
      t = &detail::kScalarTable;
      break;
    case Isa::Avx2:
      t = detail::avx2_table();
      break;
    case Isa::Neon:
      t = detail::neon_table();
      break;
  }
  if (t == nullptr) return false;
  current().store(t, std::memory_order_release);
  return true;
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "neon") return Isa::Neon;
  return std::nullopt;
}

}  // namespace kprop::simd
