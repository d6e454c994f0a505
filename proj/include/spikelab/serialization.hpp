#pragma once

#include <string>

#include <json.hpp>

#include "spikelab/engine.hpp"
#include "spikelab/neuron_models.hpp"

namespace spikelab {

nlohmann::json to_json(const ParamSpec& spec);
nlohmann::json to_json(const ModelDescriptor& descriptor);
nlohmann::json to_json(const TrialSelector& selector);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const SpikeRaster& raster);
nlohmann::json to_json(const SpikeStatistics& stats);

/// Result document:
///   run_id, model_id, state_names, channels, dt_sim, upsample_factor,
///   param_echo, preprocess, selector, channel_mask,
///   traces      [state][channel][display_time]  (state_names minus "spk")
///   input       [channel][display_time]
///   raster      {n_steps, n_channels, events: [[step, channel], ...]}
///   statistics  {counts, rates_hz}
///   channel_errors, metadata
nlohmann::json to_json(const SimulationResult& result);
SimulationResult result_from_json(const nlohmann::json& doc);

/// Run request body. Field-level problems raise InvalidParameter whose
/// field() is the JSON path ("params.v_th", "preprocess.scale", ...).
RunConfig run_config_from_json(const nlohmann::json& doc);

/// "step,channel,time_ms" rows, time_ms = step * dt_sim.
std::string raster_csv(const SpikeRaster& raster, double dt_sim);

/// Shortest decimal text that round-trips the double.
std::string format_double(double value);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace spikelab
