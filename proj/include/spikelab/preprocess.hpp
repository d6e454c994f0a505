#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikelab/matrix.hpp"
#include "spikelab/neuron_models.hpp"

namespace spikelab {

struct Trial;
struct TrialDataset;

struct PreprocessConfig {
  bool filter_enabled = false;
  double filter_sigma = 1.0;  // in samples
  bool zero_offset = false;
  bool split_signed = false;
  std::size_t upsample_factor = 1;
  double scale = 1.0;

  /// Throws InvalidParameter naming the offending field.
  void validate() const;
  bool operator==(const PreprocessConfig&) const = default;
};

void to_json(nlohmann::json& j, const PreprocessConfig& c);
/// Missing fields keep their defaults; wrong types raise InvalidParameter.
void from_json(const nlohmann::json& j, PreprocessConfig& c);

/// Slider metadata for the preprocessing controls (scale, upsample_factor,
/// filter_sigma).
const std::vector<ParamSpec>& preprocess_controls();

/// Neuron input currents, one row per channel. `dt` is in ms per sample.
struct CurrentMatrix {
  std::vector<std::string> channels;
  Matrix samples;
  double dt = 1.0;

  std::size_t channel_count() const { return samples.rows(); }
  std::size_t length() const { return samples.cols(); }
  bool operator==(const CurrentMatrix&) const = default;
};

/// Dataset-wide quantities every trial is normalized with.
struct DatasetStats {
  std::vector<std::string> channel_names;
  double sample_rate_hz = 1.0;
  std::vector<double> max_abs;  // per sensor, across all trials
};

/// Throws EmptyDataset if there are no trials.
DatasetStats compute_stats(const TrialDataset& dataset);

/// Divides every sensor by its max-abs over all trials. All-zero sensors are
/// left untouched.
TrialDataset normalize_dataset(const TrialDataset& dataset);

CurrentMatrix zero_offset(CurrentMatrix m);

/// Each channel c becomes "c+" (positive part) followed by "c-" (magnitude of
/// the negative part).
CurrentMatrix split_signed(const CurrentMatrix& m);

/// Per-channel Gaussian filter, kernel truncated at 4 sigma, reflect padding
/// (edge sample repeated, as in d c b a | a b c d | d c b a).
CurrentMatrix smooth(const CurrentMatrix& m, double sigma);

/// Linear interpolation with f-1 points between knots. out[i*f] == in[i]
/// exactly; dt is divided by f.
CurrentMatrix upsample(const CurrentMatrix& m, std::size_t f);

CurrentMatrix scale(CurrentMatrix m, double gain);

/// Normalized Gaussian weights for offsets -radius..radius.
std::vector<double> gaussian_kernel(double sigma);

/// normalize -> smooth -> zero_offset -> split_signed -> scale -> upsample.
CurrentMatrix apply(const PreprocessConfig& config, const Trial& trial, const DatasetStats& stats);

/// Channel count after preprocessing without running it.
std::size_t output_channel_count(const PreprocessConfig& config, std::size_t input_channels);

}  // namespace spikelab
