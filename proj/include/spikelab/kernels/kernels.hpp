#pragma once

// Batched neuron updates over structure-of-arrays state. One lane per
// channel; every span passed to a kernel must have the same length.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "spikelab/neuron_models.hpp"

namespace spikelab::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
  void (*lif_step)(const LifParams&, double dt, std::span<const double> input,
                   std::span<double> v, std::span<std::uint8_t> spiked);
  void (*izhikevich_step)(const IzhikevichParams&, double dt, std::span<const double> input,
                          std::span<double> v, std::span<double> u,
                          std::span<std::uint8_t> spiked);
  void (*mn_step)(const MnParams&, double dt, std::span<const double> input,
                  std::span<double> v, std::span<double> i1, std::span<double> i2,
                  std::span<double> theta, std::span<std::uint8_t> spiked);
  /// Index of the first NaN/Inf, or values.size() if all finite.
  std::size_t (*find_nonfinite)(std::span<const double> values);
};

/// True if the ISA was compiled in and the running CPU supports it.
bool available(Isa isa);

/// Best available ISA, unless SPIKELAB_ISA=scalar is set in the environment.
Isa detect();

const KernelTable& table(Isa isa);
inline const KernelTable& table() { return table(detect()); }

namespace scalar {
extern const KernelTable kTable;
}
#if defined(SPIKELAB_HAVE_AVX2)
namespace avx2 {
extern const KernelTable kTable;
}
#endif

}  // namespace spikelab::kernels
