// Compiled with -mavx2 and without -mfma: every lane performs exactly the
// operations of kernels/lane.hpp in the same order.

#include <immintrin.h>

#include <cassert>
#include <cmath>

#include "spikelab/kernels/kernels.hpp"
#include "spikelab/kernels/lane.hpp"

namespace spikelab::kernels::avx2 {
namespace {

constexpr std::size_t kLanes = 4;

inline void store_mask(int bits, std::uint8_t* out) {
  out[0] = static_cast<std::uint8_t>(bits & 1);
  out[1] = static_cast<std::uint8_t>((bits >> 1) & 1);
  out[2] = static_cast<std::uint8_t>((bits >> 2) & 1);
  out[3] = static_cast<std::uint8_t>((bits >> 3) & 1);
}

void lif_step(const LifParams& p, double dt, std::span<const double> input, std::span<double> v,
              std::span<std::uint8_t> spiked) {
  assert(input.size() == v.size() && spiked.size() == v.size());
  const std::size_t n = v.size();
  const __m256d coef = _mm256_set1_pd(dt / p.tau_mem);
  const __m256d v_rest = _mm256_set1_pd(p.v_rest);
  const __m256d r_mem = _mm256_set1_pd(p.r_mem);
  const __m256d v_th = _mm256_set1_pd(p.v_th);
  const __m256d v_reset = _mm256_set1_pd(p.v_reset);

  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vi = _mm256_loadu_pd(v.data() + i);
    const __m256d in = _mm256_loadu_pd(input.data() + i);
    const __m256d drive = _mm256_add_pd(_mm256_sub_pd(v_rest, vi), _mm256_mul_pd(r_mem, in));
    __m256d next = _mm256_add_pd(vi, _mm256_mul_pd(coef, drive));
    const __m256d fired = _mm256_and_pd(_mm256_cmp_pd(next, v_th, _CMP_GE_OQ),
                                       _mm256_cmp_pd(next, _mm256_set1_pd(lane::kMaxFinite), _CMP_LE_OQ));
    next = _mm256_blendv_pd(next, v_reset, fired);
    _mm256_storeu_pd(v.data() + i, next);
    store_mask(_mm256_movemask_pd(fired), spiked.data() + i);
  }
  for (; i < n; ++i) spiked[i] = lane::lif(p, dt, input[i], v[i]);
}

void izhikevich_step(const IzhikevichParams& p, double dt, std::span<const double> input,
                     std::span<double> v, std::span<double> u, std::span<std::uint8_t> spiked) {
  assert(input.size() == v.size() && u.size() == v.size() && spiked.size() == v.size());
  const std::size_t n = v.size();
  const __m256d vdt = _mm256_set1_pd(dt);
  const __m256d k004 = _mm256_set1_pd(0.04);
  const __m256d k5 = _mm256_set1_pd(5.0);
  const __m256d k140 = _mm256_set1_pd(140.0);
  const __m256d a = _mm256_set1_pd(p.a);
  const __m256d b = _mm256_set1_pd(p.b);
  const __m256d c = _mm256_set1_pd(p.c);
  const __m256d d = _mm256_set1_pd(p.d);
  const __m256d v_peak = _mm256_set1_pd(p.v_peak);

  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vi = _mm256_loadu_pd(v.data() + i);
    const __m256d ui = _mm256_loadu_pd(u.data() + i);
    const __m256d in = _mm256_loadu_pd(input.data() + i);

    __m256d dv = _mm256_add_pd(_mm256_mul_pd(k004, _mm256_mul_pd(vi, vi)), _mm256_mul_pd(k5, vi));
    dv = _mm256_add_pd(dv, k140);
    dv = _mm256_sub_pd(dv, ui);
    dv = _mm256_add_pd(dv, in);
    __m256d v_next = _mm256_add_pd(vi, _mm256_mul_pd(vdt, dv));

    const __m256d du = _mm256_mul_pd(a, _mm256_sub_pd(_mm256_mul_pd(b, vi), ui));
    __m256d u_next = _mm256_add_pd(ui, _mm256_mul_pd(vdt, du));

    const __m256d fired = _mm256_and_pd(_mm256_cmp_pd(v_next, v_peak, _CMP_GE_OQ),
                                       _mm256_cmp_pd(v_next, _mm256_set1_pd(lane::kMaxFinite), _CMP_LE_OQ));
    v_next = _mm256_blendv_pd(v_next, c, fired);
    u_next = _mm256_blendv_pd(u_next, _mm256_add_pd(u_next, d), fired);

    _mm256_storeu_pd(v.data() + i, v_next);
    _mm256_storeu_pd(u.data() + i, u_next);
    store_mask(_mm256_movemask_pd(fired), spiked.data() + i);
  }
  for (; i < n; ++i) spiked[i] = lane::izhikevich(p, dt, input[i], v[i], u[i]);
}

void mn_step(const MnParams& p, double dt, std::span<const double> input, std::span<double> v,
             std::span<double> i1, std::span<double> i2, std::span<double> theta,
             std::span<std::uint8_t> spiked) {
  assert(input.size() == v.size() && i1.size() == v.size() && i2.size() == v.size() &&
         theta.size() == v.size() && spiked.size() == v.size());
  const std::size_t n = v.size();
  const __m256d vdt = _mm256_set1_pd(dt);
  const __m256d k1 = _mm256_set1_pd(p.k1);
  const __m256d k2 = _mm256_set1_pd(p.k2);
  const __m256d G = _mm256_set1_pd(p.G);
  const __m256d E_L = _mm256_set1_pd(p.E_L);
  const __m256d a = _mm256_set1_pd(p.a);
  const __m256d b = _mm256_set1_pd(p.b);
  const __m256d theta_inf = _mm256_set1_pd(p.Theta_inf);
  const __m256d theta_r = _mm256_set1_pd(p.Theta_r);
  const __m256d R1 = _mm256_set1_pd(p.R1);
  const __m256d R2 = _mm256_set1_pd(p.R2);
  const __m256d A1 = _mm256_set1_pd(p.A1);
  const __m256d A2 = _mm256_set1_pd(p.A2);
  const __m256d V_r = _mm256_set1_pd(p.V_r);

  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vi = _mm256_loadu_pd(v.data() + i);
    const __m256d c1 = _mm256_loadu_pd(i1.data() + i);
    const __m256d c2 = _mm256_loadu_pd(i2.data() + i);
    const __m256d th = _mm256_loadu_pd(theta.data() + i);
    const __m256d in = _mm256_loadu_pd(input.data() + i);

    __m256d c1_next = _mm256_sub_pd(c1, _mm256_mul_pd(vdt, _mm256_mul_pd(k1, c1)));
    __m256d c2_next = _mm256_sub_pd(c2, _mm256_mul_pd(vdt, _mm256_mul_pd(k2, c2)));

    const __m256d leak = _mm256_mul_pd(G, _mm256_sub_pd(vi, E_L));
    const __m256d dv = _mm256_sub_pd(_mm256_add_pd(_mm256_add_pd(in, c1), c2), leak);
    __m256d v_next = _mm256_add_pd(vi, _mm256_mul_pd(vdt, dv));

    const __m256d dth = _mm256_sub_pd(_mm256_mul_pd(a, _mm256_sub_pd(vi, E_L)),
                                      _mm256_mul_pd(b, _mm256_sub_pd(th, theta_inf)));
    __m256d th_next = _mm256_add_pd(th, _mm256_mul_pd(vdt, dth));

    const __m256d fired = _mm256_and_pd(_mm256_cmp_pd(v_next, th_next, _CMP_GE_OQ),
                                       _mm256_cmp_pd(v_next, _mm256_set1_pd(lane::kMaxFinite), _CMP_LE_OQ));
    c1_next = _mm256_blendv_pd(c1_next, _mm256_add_pd(_mm256_mul_pd(R1, c1_next), A1), fired);
    c2_next = _mm256_blendv_pd(c2_next, _mm256_add_pd(_mm256_mul_pd(R2, c2_next), A2), fired);
    v_next = _mm256_blendv_pd(v_next, V_r, fired);
    // max_pd(x, y) returns y unless x > y, matching std::max(y, x).
    th_next = _mm256_blendv_pd(th_next, _mm256_max_pd(th_next, theta_r), fired);

    _mm256_storeu_pd(v.data() + i, v_next);
    _mm256_storeu_pd(i1.data() + i, c1_next);
    _mm256_storeu_pd(i2.data() + i, c2_next);
    _mm256_storeu_pd(theta.data() + i, th_next);
    store_mask(_mm256_movemask_pd(fired), spiked.data() + i);
  }
  for (; i < n; ++i) spiked[i] = lane::mn(p, dt, input[i], v[i], i1[i], i2[i], theta[i]);
}

std::size_t find_nonfinite(std::span<const double> values) {
  const std::size_t n = values.size();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d x = _mm256_loadu_pd(values.data() + i);
    // x - x is 0 for finite x and NaN for NaN/Inf.
    const __m256d finite = _mm256_cmp_pd(_mm256_sub_pd(x, x), _mm256_setzero_pd(), _CMP_EQ_OQ);
    const int bits = _mm256_movemask_pd(finite);
    if (bits != 0xF) return i + static_cast<std::size_t>(__builtin_ctz(~bits & 0xF));
  }
  for (; i < n; ++i)
    if (!std::isfinite(values[i])) return i;
  return n;
}

}  // namespace

const KernelTable kTable{&lif_step, &izhikevich_step, &mn_step, &find_nonfinite};

}  // namespace spikelab::kernels::avx2
