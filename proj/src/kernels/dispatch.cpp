#include <cstdlib>
#include <string_view>

#include "spikelab/kernels/kernels.hpp"

namespace spikelab::kernels {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool available(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(SPIKELAB_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa detect() {
  static const Isa chosen = [] {
    if (const char* forced = std::getenv("SPIKELAB_ISA"); forced && std::string_view(forced) == "scalar")
      return Isa::scalar;
    return available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
  }();
  return chosen;
}

const KernelTable& table(Isa isa) {
#if defined(SPIKELAB_HAVE_AVX2)
  if (isa == Isa::avx2 && available(Isa::avx2)) return avx2::kTable;
#endif
  (void)isa;
  return scalar::kTable;
}

}  // namespace spikelab::kernels
