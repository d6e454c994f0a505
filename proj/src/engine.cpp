#include "spikelab/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "spikelab/error.hpp"
#include "spikelab/serialization.hpp"

namespace spikelab {
namespace {

// Structure-of-arrays state for a group of channels simulated together.
struct LaneBlock {
  std::vector<std::size_t> channels;
  std::vector<std::vector<double>> values;  // [state][lane]
  std::vector<double> input;                // [step][lane], time-major
  std::vector<std::uint8_t> spiked;

  std::size_t lanes() const { return channels.size(); }
};

struct GroupOutput {
  std::vector<SpikeEvent> events;
  std::vector<ChannelError> errors;
};

void advance(const kernels::KernelTable& k, const ModelParams& params, double dt, LaneBlock& b,
             std::size_t t) {
  const std::size_t n = b.lanes();
  std::span<const double> in(b.input.data() + t * n, n);
  std::span<std::uint8_t> spk(b.spiked.data(), n);
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LifParams>) {
          k.lif_step(p, dt, in, b.values[0], spk);
        } else if constexpr (std::is_same_v<P, IzhikevichParams>) {
          k.izhikevich_step(p, dt, in, b.values[0], b.values[1], spk);
        } else {
          k.mn_step(p, dt, in, b.values[0], b.values[1], b.values[2], b.values[3], spk);
        }
      },
      params);
}

// Removes lane `i` from the block, including its input column.
void drop_lane(LaneBlock& b, std::size_t i, std::size_t n_steps) {
  const std::size_t n = b.lanes();
  std::vector<double> input;
  input.reserve(n_steps * (n - 1));
  for (std::size_t t = 0; t < n_steps; ++t)
    for (std::size_t l = 0; l < n; ++l)
      if (l != i) input.push_back(b.input[t * n + l]);
  b.input = std::move(input);
  b.channels.erase(b.channels.begin() + static_cast<std::ptrdiff_t>(i));
  for (auto& v : b.values) v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
  b.spiked.pop_back();
}

GroupOutput simulate_group(const ModelParams& params, const CurrentMatrix& currents,
                           std::vector<std::size_t> channels, std::size_t stride,
                           const RunOptions& options, const kernels::KernelTable& k,
                           SimulationResult& result) {
  const auto& desc = builtin_descriptor(kind_of(params));
  const std::size_t n_steps = currents.length();
  const std::size_t n_vars = desc.value_count();
  const NeuronState init = initial_state(params);

  LaneBlock b;
  b.channels = std::move(channels);
  b.values.assign(n_vars, std::vector<double>(b.lanes()));
  for (std::size_t v = 0; v < n_vars; ++v) std::fill(b.values[v].begin(), b.values[v].end(), init.values[v]);
  b.spiked.assign(b.lanes(), 0);
  b.input.resize(n_steps * b.lanes());
  for (std::size_t l = 0; l < b.lanes(); ++l) {
    auto row = currents.samples.row(b.channels[l]);
    for (std::size_t t = 0; t < n_steps; ++t) b.input[t * b.lanes() + l] = row[t];
  }

  GroupOutput out;
  const std::size_t batch = std::max<std::size_t>(1, options.batch_steps);
  for (std::size_t t = 0; t < n_steps && b.lanes() > 0; ++t) {
    if (t % batch == 0) {
      if (options.cancel && options.cancel->load(std::memory_order_relaxed))
        throw Error(ErrorCode::cancelled, "run cancelled");
      if (options.progress && t > 0) options.progress(t, n_steps);
    }
    advance(k, params, currents.dt, b, t);

    for (std::size_t v = 0; v < n_vars; ++v) {
      std::size_t bad;
      while ((bad = k.find_nonfinite(b.values[v])) < b.lanes()) {
        const std::size_t ch = b.channels[bad];
        const DivergenceError err(t, desc.state_names[v], ch);
        out.errors.push_back({ch, t, desc.state_names[v], err.what()});
        for (auto& trace : result.state_traces) trace[ch].clear();
        if (!result.full_traces.empty())
          for (auto& trace : result.full_traces) trace[ch].clear();
        std::erase_if(out.events, [ch](const SpikeEvent& e) { return e.channel == ch; });
        drop_lane(b, bad, n_steps);
      }
    }

    for (std::size_t l = 0; l < b.lanes(); ++l)
      if (b.spiked[l]) out.events.push_back({t, b.channels[l]});
    if (t % stride == 0)
      for (std::size_t v = 0; v < n_vars; ++v)
        for (std::size_t l = 0; l < b.lanes(); ++l)
          result.state_traces[v][b.channels[l]][t / stride] = b.values[v][l];
    if (options.record_full_traces)
      for (std::size_t v = 0; v < n_vars; ++v)
        for (std::size_t l = 0; l < b.lanes(); ++l)
          result.full_traces[v][b.channels[l]][t] = b.values[v][l];
  }
  return out;
}

}  // namespace

void SpikeRaster::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.step >= n_steps || e.channel >= n_channels)
      throw Error(ErrorCode::invalid_input, "raster event " + std::to_string(i) + " out of range");
    if (i > 0 && !(events[i - 1] < e))
      throw Error(ErrorCode::invalid_input,
                  "raster events not strictly sorted at index " + std::to_string(i));
  }
}

std::vector<double> decimate_for_display(std::span<const double> full, std::size_t f) {
  if (f < 1) throw Error(ErrorCode::invalid_input, "decimation factor must be >= 1");
  if (full.empty() || (full.size() - 1) % f != 0)
    throw Error(ErrorCode::invalid_input,
                "trace length " + std::to_string(full.size()) + " is not (n-1)*" +
                    std::to_string(f) + "+1");
  const std::size_t n = (full.size() - 1) / f + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = full[i * f];
  return out;
}

SpikeStatistics spike_statistics(const SpikeRaster& raster, double dt_sim) {
  SpikeStatistics s;
  s.counts.assign(raster.n_channels, 0);
  s.rates_hz.assign(raster.n_channels, 0.0);
  for (const auto& e : raster.events) ++s.counts[e.channel];
  const double duration_s = static_cast<double>(raster.n_steps) * dt_sim / 1000.0;
  if (duration_s > 0.0)
    for (std::size_t c = 0; c < raster.n_channels; ++c)
      s.rates_hz[c] = static_cast<double>(s.counts[c]) / duration_s;
  return s;
}

std::string derive_run_id(const RunConfig& config, const TrialDataset& dataset) {
  nlohmann::json key{{"config", to_json(config)}, {"dataset", dataset.name}};
  return "run-" + fnv1a_hex(key.dump());
}

void validate_run_config(const RunConfig& config, const TrialDataset& dataset,
                         const ModelRegistry& registry) {
  const auto& desc = registry.describe(config.model_id);
  validate_assignment(desc, config.params);
  const ModelParams params = make_params(config.model_id, config.params);
  validate_invariants(params);
  config.preprocess.validate();
  const Trial& trial = select(dataset, config.selector.class_label, config.selector.repetition);
  if (config.preprocess.upsample_factor > 1 && trial.data.cols() < 2)
    throw Error(ErrorCode::invalid_input, "upsampling needs at least 2 samples",
                "preprocess.upsample_factor");
  const std::size_t channels = output_channel_count(config.preprocess, dataset.channel_names.size());
  if (!config.channel_mask.empty() && config.channel_mask.size() != channels)
    throw Error(ErrorCode::invalid_parameter,
                "channel_mask has " + std::to_string(config.channel_mask.size()) +
                    " entries, expected " + std::to_string(channels),
                "channel_mask");
}

SimulationResult simulate(const ModelParams& params, const CurrentMatrix& currents,
                          const std::vector<bool>& channel_mask, std::size_t stride,
                          const RunOptions& options) {
  validate_invariants(params);
  const auto& desc = builtin_descriptor(kind_of(params));
  const std::size_t n_channels = currents.channel_count();
  const std::size_t n_steps = currents.length();
  if (stride < 1) throw Error(ErrorCode::invalid_input, "display stride must be >= 1");
  if (n_steps == 0 || (n_steps - 1) % stride != 0)
    throw Error(ErrorCode::invalid_input, "current length is not (n-1)*f+1");
  if (!channel_mask.empty() && channel_mask.size() != n_channels)
    throw Error(ErrorCode::invalid_parameter, "channel_mask length does not match channels",
                "channel_mask");
  if (!(currents.dt > 0.0)) throw Error(ErrorCode::invalid_input, "dt must be > 0", "dt");
  for (double x : currents.samples.values())
    if (!std::isfinite(x)) throw Error(ErrorCode::invalid_input, "non-finite input current");

  SimulationResult r;
  r.model_id = desc.model_id;
  r.state_names = desc.state_names;
  r.channels = currents.channels;
  r.dt_sim = currents.dt;
  r.upsample_factor = stride;
  r.param_echo = to_assignment(params);
  r.channel_mask = channel_mask.empty() ? std::vector<bool>(n_channels, true) : channel_mask;
  r.run_id = options.run_id;

  const std::size_t display_len = (n_steps - 1) / stride + 1;
  std::vector<std::size_t> active;
  for (std::size_t c = 0; c < n_channels; ++c)
    if (r.channel_mask[c]) active.push_back(c);

  r.state_traces.assign(desc.value_count(), std::vector<std::vector<double>>(n_channels));
  if (options.record_full_traces)
    r.full_traces.assign(desc.value_count(), std::vector<std::vector<double>>(n_channels));
  r.input_traces.assign(n_channels, {});
  for (std::size_t c : active) {
    for (auto& trace : r.state_traces) trace[c].assign(display_len, 0.0);
    for (auto& trace : r.full_traces) trace[c].assign(n_steps, 0.0);
    r.input_traces[c] = decimate_for_display(currents.samples.row(c), stride);
  }

  const auto& k = kernels::table(options.isa.value_or(kernels::detect()));

  // Contiguous channel groups, one per worker. Groups write disjoint trace
  // slots; events are merged and sorted afterwards.
  const std::size_t workers =
      std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(1, active.size()));
  std::vector<std::vector<std::size_t>> groups(workers);
  for (std::size_t i = 0; i < active.size(); ++i) groups[i * workers / active.size()].push_back(active[i]);

  std::vector<GroupOutput> outputs(workers);
  if (workers == 1) {
    outputs[0] = simulate_group(params, currents, groups[0], stride, options, k, r);
  } else {
    std::vector<std::exception_ptr> failures(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            outputs[w] = simulate_group(params, currents, groups[w], stride, options, k, r);
          } catch (...) {
            failures[w] = std::current_exception();
          }
        });
    }
    for (auto& f : failures)
      if (f) std::rethrow_exception(f);
  }

  r.spike_raster.n_steps = n_steps;
  r.spike_raster.n_channels = n_channels;
  for (auto& out : outputs) {
    r.spike_raster.events.insert(r.spike_raster.events.end(), out.events.begin(), out.events.end());
    r.channel_errors.insert(r.channel_errors.end(), out.errors.begin(), out.errors.end());
  }
  std::sort(r.spike_raster.events.begin(), r.spike_raster.events.end());
  std::sort(r.channel_errors.begin(), r.channel_errors.end(),
            [](const ChannelError& a, const ChannelError& b) { return a.channel < b.channel; });
  return r;
}

SimulationResult run(const RunConfig& config, const TrialDataset& dataset, const RunOptions& options) {
  const ModelRegistry& registry = options.registry ? *options.registry : default_registry();
  validate_run_config(config, dataset, registry);

  const Trial& trial = select(dataset, config.selector.class_label, config.selector.repetition);
  const CurrentMatrix currents = apply(config.preprocess, trial, compute_stats(dataset));
  const ModelParams params = make_params(config.model_id, config.params);

  RunOptions opts = options;
  if (opts.run_id.empty()) opts.run_id = derive_run_id(config, dataset);
  SimulationResult r =
      simulate(params, currents, config.channel_mask, config.preprocess.upsample_factor, opts);
  r.preprocess = config.preprocess;
  r.selector = config.selector;
  return r;
}

}  // namespace spikelab
