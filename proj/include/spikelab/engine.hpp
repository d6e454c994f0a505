#pragma once

#include <atomic>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikelab/dataset.hpp"
#include "spikelab/kernels/kernels.hpp"
#include "spikelab/model_registry.hpp"
#include "spikelab/neuron_models.hpp"
#include "spikelab/preprocess.hpp"

namespace spikelab {

struct TrialSelector {
  std::optional<std::string> class_label;
  std::optional<std::int64_t> repetition;
  bool operator==(const TrialSelector&) const = default;
};

struct RunConfig {
  std::string model_id = "lif";
  ParamAssignment params;  // missing parameters take their start value
  PreprocessConfig preprocess;
  TrialSelector selector;
  std::vector<bool> channel_mask;  // post-preprocess channel space; empty means all on

  bool operator==(const RunConfig&) const = default;
};

struct SpikeEvent {
  std::size_t step = 0;  // simulation-rate index
  std::size_t channel = 0;
  auto operator<=>(const SpikeEvent&) const = default;
};

struct SpikeRaster {
  std::vector<SpikeEvent> events;  // sorted by (step, channel), no duplicates
  std::size_t n_steps = 0;
  std::size_t n_channels = 0;

  /// Throws InvalidInput if ordering, range or uniqueness is violated.
  void validate() const;
  bool operator==(const SpikeRaster&) const = default;
};

struct ChannelError {
  std::size_t channel = 0;
  std::size_t step = 0;
  std::string variable;
  std::string message;
  bool operator==(const ChannelError&) const = default;
};

using Traces = std::vector<std::vector<std::vector<double>>>;  // [state][channel][time]

struct SimulationResult {
  std::string run_id;
  std::string model_id;
  std::vector<std::string> state_names;  // full model contract, "V" ... "spk"
  std::vector<std::string> channels;
  /// Display-rate traces for the continuous states (state_names minus "spk").
  /// Masked or diverged channels hold empty vectors.
  Traces state_traces;
  /// Display-rate input current per channel (the upsampling knots).
  std::vector<std::vector<double>> input_traces;
  SpikeRaster spike_raster;
  double dt_sim = 0.0;  // ms
  std::size_t upsample_factor = 1;
  ParamAssignment param_echo;
  PreprocessConfig preprocess;
  TrialSelector selector;
  std::vector<bool> channel_mask;
  std::vector<ChannelError> channel_errors;
  nlohmann::json metadata = nlohmann::json::object();

  /// Full-rate traces, only filled with RunOptions::record_full_traces.
  /// Never serialized.
  Traces full_traces;

  bool failed() const { return !channel_errors.empty(); }
};

struct RunOptions {
  /// Polled between step batches; a set flag aborts with Error(cancelled).
  const std::atomic<bool>* cancel = nullptr;
  std::size_t batch_steps = 1024;
  bool record_full_traces = false;
  std::optional<kernels::Isa> isa;
  unsigned threads = 1;
  std::string run_id;  // derived from the configuration when empty
  const ModelRegistry* registry = nullptr;
  /// Called after each batch with (steps_done, n_steps); may be empty.
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Synchronous checks shared by run() and service submission: model, grid
/// placement of every parameter, preprocessing, trial existence and mask
/// length. Throws the corresponding Error.
void validate_run_config(const RunConfig& config, const TrialDataset& dataset,
                         const ModelRegistry& registry);

/// Preprocesses the selected trial and simulates one independent neuron per
/// unmasked channel with dt = 1000 / sample_rate_hz / upsample_factor ms.
SimulationResult run(const RunConfig& config, const TrialDataset& dataset,
                     const RunOptions& options = {});

/// Lower-level entry point on an already preprocessed current matrix.
/// `display_stride` is the upsample factor used for trace decimation.
SimulationResult simulate(const ModelParams& params, const CurrentMatrix& currents,
                          const std::vector<bool>& channel_mask, std::size_t display_stride,
                          const RunOptions& options = {});

/// display[i] = full[i * f]. Throws InvalidInput unless full.size() == (n-1)*f + 1.
std::vector<double> decimate_for_display(std::span<const double> full_trace, std::size_t f);

struct SpikeStatistics {
  std::vector<std::size_t> counts;
  std::vector<double> rates_hz;
  bool operator==(const SpikeStatistics&) const = default;
};

/// rate = count / (n_steps * dt_sim) with dt_sim in ms.
SpikeStatistics spike_statistics(const SpikeRaster& raster, double dt_sim);

/// Stable identifier derived from the run configuration and dataset name.
std::string derive_run_id(const RunConfig& config, const TrialDataset& dataset);

}  // namespace spikelab
