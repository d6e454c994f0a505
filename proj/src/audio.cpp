#include "spikelab/audio.hpp"

#include <algorithm>
#include <cmath>

#include "spikelab/error.hpp"

namespace spikelab {
namespace {

constexpr double kFullScale = 32767.0;

[[noreturn]] void invalid(const char* field, const std::string& why) {
  throw Error(ErrorCode::invalid_parameter, std::string("audio.") + field + ": " + why, field);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char (&tag)[5]) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

void AudioConfig::validate() const {
  if (sample_rate_hz == 0) invalid("sample_rate_hz", "must be > 0");
  if (!(tick_duration_ms > 0.0) || !std::isfinite(tick_duration_ms))
    invalid("tick_duration_ms", "must be > 0");
  if (!(tick_frequency_hz > 0.0) || !std::isfinite(tick_frequency_hz))
    invalid("tick_frequency_hz", "must be > 0");
  if (tick_frequency_hz * tick_duration_ms / 1000.0 < 1.0)
    invalid("tick_frequency_hz", "a tick must contain at least one sawtooth period");
  if (!(playback_time_scale >= 1.0) || !std::isfinite(playback_time_scale))
    invalid("playback_time_scale", "must be >= 1");
  if (!(master_gain > 0.0 && master_gain <= 1.0)) invalid("master_gain", "must be in (0, 1]");
}

std::size_t tick_length(const AudioConfig& c) {
  return static_cast<std::size_t>(std::llround(c.tick_duration_ms * c.sample_rate_hz / 1000.0));
}

std::size_t waveform_length(const SpikeRaster& raster, double dt_sim, const AudioConfig& c) {
  const double duration_ms =
      static_cast<double>(raster.n_steps) * dt_sim * c.playback_time_scale + c.tick_duration_ms;
  return static_cast<std::size_t>(std::llround(duration_ms * c.sample_rate_hz / 1000.0));
}

std::size_t onset_sample(std::size_t step, double dt_sim, const AudioConfig& c) {
  const double t_ms = static_cast<double>(step) * dt_sim * c.playback_time_scale;
  // The small bias keeps exact products such as 0.5 ms * 44.1 from landing
  // one sample early after rounding.
  return static_cast<std::size_t>(std::floor(t_ms * c.sample_rate_hz / 1000.0 + 1e-9));
}

double tick_sample(std::size_t k, const AudioConfig& c) {
  const std::size_t len = tick_length(c);
  if (k >= len) return 0.0;
  const double t = static_cast<double>(k) / c.sample_rate_hz;
  const double phase = t * c.tick_frequency_hz;
  const double saw = 2.0 * (phase - std::floor(phase)) - 1.0;
  const double envelope = 1.0 - static_cast<double>(k) / static_cast<double>(len);
  return saw * envelope;
}

std::vector<double> mix_ticks(const SpikeRaster& raster, double dt_sim, const AudioConfig& c) {
  c.validate();
  raster.validate();
  std::vector<double> mix(waveform_length(raster, dt_sim, c), 0.0);
  const std::size_t len = tick_length(c);
  std::vector<double> tick(len);
  for (std::size_t k = 0; k < len; ++k) tick[k] = c.master_gain * kFullScale * tick_sample(k, c);
  for (const auto& e : raster.events) {
    const std::size_t onset = onset_sample(e.step, dt_sim, c);
    for (std::size_t k = 0; k < len && onset + k < mix.size(); ++k) mix[onset + k] += tick[k];
  }
  return mix;
}

Waveform render(const SpikeRaster& raster, double dt_sim, const AudioConfig& c) {
  std::vector<double> mix = mix_ticks(raster, dt_sim, c);
  double peak = 0.0;
  for (double x : mix) peak = std::max(peak, std::abs(x));
  const double limit = c.master_gain * kFullScale;
  const double gain = peak > limit ? limit / peak : 1.0;

  Waveform w;
  w.sample_rate_hz = c.sample_rate_hz;
  w.samples.resize(mix.size());
  for (std::size_t i = 0; i < mix.size(); ++i) {
    // Truncation toward zero never exceeds the limit after scaling.
    const double v = std::clamp(std::trunc(mix[i] * gain), -limit, limit);
    w.samples[i] = static_cast<std::int16_t>(v);
  }
  return w;
}

std::vector<std::uint8_t> encode_wav(const Waveform& w) {
  constexpr std::uint16_t channels = 1;
  constexpr std::uint16_t bits = 16;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * sizeof(std::int16_t));
  const std::uint16_t block_align = channels * bits / 8;

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, channels);
  put_u32(out, w.sample_rate_hz);
  put_u32(out, w.sample_rate_hz * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (std::int16_t s : w.samples) put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

}  // namespace spikelab
