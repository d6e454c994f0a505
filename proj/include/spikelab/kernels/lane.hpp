#pragma once

// Per-neuron update rules. The scalar kernels and the single-neuron step()
// are built on these; the AVX2 kernels reproduce the same operation order so
// that both paths are bit-identical (the project is compiled with
// -ffp-contract=off).

#include <algorithm>
#include <limits>

#include "spikelab/neuron_models.hpp"

namespace spikelab::kernels::lane {

// An overflowed potential is not a spike; leaving it unreset lets the
// divergence check see it.
inline constexpr double kMaxFinite = std::numeric_limits<double>::max();

inline bool lif(const LifParams& p, double dt, double input, double& v) {
  const double coef = dt / p.tau_mem;
  double next = v + coef * ((p.v_rest - v) + p.r_mem * input);
  const bool spiked = next >= p.v_th && next <= kMaxFinite;
  if (spiked) next = p.v_reset;
  v = next;
  return spiked;
}

inline bool izhikevich(const IzhikevichParams& p, double dt, double input, double& v, double& u) {
  // 0.04 * (v * v) keeps (-70, -14) an exact fixed point for b = 0.2.
  double v_next = v + dt * ((((0.04 * (v * v)) + 5.0 * v) + 140.0 - u) + input);
  double u_next = u + dt * (p.a * (p.b * v - u));
  const bool spiked = v_next >= p.v_peak && v_next <= kMaxFinite;
  if (spiked) {
    v_next = p.c;
    u_next = u_next + p.d;
  }
  v = v_next;
  u = u_next;
  return spiked;
}

inline bool mn(const MnParams& p, double dt, double input, double& v, double& i1, double& i2,
               double& theta) {
  double i1_next = i1 - dt * (p.k1 * i1);
  double i2_next = i2 - dt * (p.k2 * i2);
  double v_next = v + dt * (((input + i1) + i2) - p.G * (v - p.E_L));
  double theta_next = theta + dt * (p.a * (v - p.E_L) - p.b * (theta - p.Theta_inf));
  const bool spiked = v_next >= theta_next && v_next <= kMaxFinite;
  if (spiked) {
    i1_next = p.R1 * i1_next + p.A1;
    i2_next = p.R2 * i2_next + p.A2;
    v_next = p.V_r;
    theta_next = std::max(p.Theta_r, theta_next);
  }
  v = v_next;
  i1 = i1_next;
  i2 = i2_next;
  theta = theta_next;
  return spiked;
}

}  // namespace spikelab::kernels::lane
