#include <cassert>
#include <cmath>

#include "spikelab/kernels/kernels.hpp"
#include "spikelab/kernels/lane.hpp"

namespace spikelab::kernels::scalar {
namespace {

void lif_step(const LifParams& p, double dt, std::span<const double> input, std::span<double> v,
              std::span<std::uint8_t> spiked) {
  assert(input.size() == v.size() && spiked.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) spiked[i] = lane::lif(p, dt, input[i], v[i]);
}

void izhikevich_step(const IzhikevichParams& p, double dt, std::span<const double> input,
                     std::span<double> v, std::span<double> u, std::span<std::uint8_t> spiked) {
  assert(input.size() == v.size() && u.size() == v.size() && spiked.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    spiked[i] = lane::izhikevich(p, dt, input[i], v[i], u[i]);
}

void mn_step(const MnParams& p, double dt, std::span<const double> input, std::span<double> v,
             std::span<double> i1, std::span<double> i2, std::span<double> theta,
             std::span<std::uint8_t> spiked) {
  assert(input.size() == v.size() && i1.size() == v.size() && i2.size() == v.size() &&
         theta.size() == v.size() && spiked.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    spiked[i] = lane::mn(p, dt, input[i], v[i], i1[i], i2[i], theta[i]);
}

std::size_t find_nonfinite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i])) return i;
  return values.size();
}

}  // namespace

const KernelTable kTable{&lif_step, &izhikevich_step, &mn_step, &find_nonfinite};

}  // namespace spikelab::kernels::scalar
