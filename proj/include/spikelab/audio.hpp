#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spikelab/engine.hpp"

namespace spikelab {

struct AudioConfig {
  std::uint32_t sample_rate_hz = 44100;
  double tick_duration_ms = 5.0;
  double tick_frequency_hz = 440.0;
  double playback_time_scale = 1.0;  // >= 1 slows playback down
  double master_gain = 0.8;          // in (0, 1]

  /// Throws InvalidParameter naming the field.
  void validate() const;
};

struct Waveform {
  std::vector<std::int16_t> samples;  // mono
  std::uint32_t sample_rate_hz = 44100;

  bool operator==(const Waveform&) const = default;
};

/// Samples in one tick: round(tick_duration_ms * sample_rate / 1000).
std::size_t tick_length(const AudioConfig& config);

/// Total samples: round((n_steps * dt_sim * time_scale + tick_duration) * rate / 1000).
std::size_t waveform_length(const SpikeRaster& raster, double dt_sim, const AudioConfig& config);

/// First audio sample of the tick for a raster step.
std::size_t onset_sample(std::size_t step, double dt_sim, const AudioConfig& config);

/// Value of sample k of a tick at unit amplitude: rising sawtooth
/// 2 * frac(t * f) - 1 with a linear fade-out over the tick.
double tick_sample(std::size_t k, const AudioConfig& config);

/// Sum of all ticks at amplitude master_gain * 32767, before peak
/// normalization or quantization.
std::vector<double> mix_ticks(const SpikeRaster& raster, double dt_sim, const AudioConfig& config);

/// Mixes, scales the whole buffer down if its peak exceeds
/// master_gain * 32767, and quantizes toward zero.
Waveform render(const SpikeRaster& raster, double dt_sim, const AudioConfig& config = {});

/// RIFF/WAVE, PCM 16-bit little-endian, mono.
std::vector<std::uint8_t> encode_wav(const Waveform& waveform);

}  // namespace spikelab
