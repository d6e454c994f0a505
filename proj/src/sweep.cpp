#include "spikelab/sweep.hpp"

#include "spikelab/error.hpp"
#include "spikelab/serialization.hpp"

namespace spikelab {

std::vector<double> sweep_values(const ModelDescriptor& desc, const SweepSpec& spec) {
  const ParamSpec* p = desc.find_param(spec.parameter);
  if (!p)
    throw Error(ErrorCode::invalid_parameter,
                "model '" + desc.model_id + "' has no parameter '" + spec.parameter + "'",
                spec.parameter);
  if (spec.steps < 1) throw Error(ErrorCode::invalid_parameter, "sweep needs at least one step", "steps");

  std::vector<double> values;
  for (std::size_t k = 0; k < spec.steps; ++k) {
    const double v = spec.steps == 1 ? spec.from
                               : spec.from + static_cast<double>(k) * (spec.to - spec.from) /
                                                 static_cast<double>(spec.steps - 1);
    if (!p->contains(v) || !p->on_grid(v))
      throw Error(ErrorCode::invalid_parameter,
                  "sweep value " + format_double(v) + " for '" + p->name +
                      "' is not on its grid: " + format_double(p->min) + " + n * " +
                      format_double(p->step) + ", up to " + format_double(p->max),
                  p->name);
    values.push_back(v);
  }
  return values;
}

SweepResult run_sweep(const RunConfig& base, const SweepSpec& spec, const TrialDataset& dataset,
                      const RunOptions& options) {
  const ModelRegistry& registry = options.registry ? *options.registry : default_registry();
  const auto values = sweep_values(registry.describe(base.model_id), spec);
  SweepResult out;
  out.parameter = spec.parameter;
  for (double v : values) {
    RunConfig cfg = base;
    cfg.params[spec.parameter] = v;
    SimulationResult r = run(cfg, dataset, options);
    if (out.channels.empty()) out.channels = r.channels;
    out.rows.push_back({v, spike_statistics(r.spike_raster, r.dt_sim)});
  }
  return out;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "value";
  for (const auto& c : result.channels) out += ",count_" + c;
  for (const auto& c : result.channels) out += ",rate_hz_" + c;
  out += '\n';
  for (const auto& row : result.rows) {
    out += format_double(row.value);
    for (auto n : row.statistics.counts) out += "," + std::to_string(n);
    for (double r : row.statistics.rates_hz) out += "," + format_double(r);
    out += '\n';
  }
  return out;
}

}  // namespace spikelab
