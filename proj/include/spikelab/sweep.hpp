#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spikelab/engine.hpp"

namespace spikelab {

struct SweepSpec {
  std::string parameter;
  double from = 0.0;
  double to = 0.0;
  std::size_t steps = 1;  // number of values, endpoints included
};

struct SweepRow {
  double value = 0.0;
  SpikeStatistics statistics;
};

struct SweepResult {
  std::string parameter;
  std::vector<std::string> channels;
  std::vector<SweepRow> rows;
};

/// Values from + k * (to - from) / (steps - 1). Every value must lie on the
/// parameter's slider grid; otherwise InvalidParameter lists the grid.
std::vector<double> sweep_values(const ModelDescriptor& descriptor, const SweepSpec& spec);

/// One run per value with `base` as the template. Rows keep value order.
SweepResult run_sweep(const RunConfig& base, const SweepSpec& spec, const TrialDataset& dataset,
                      const RunOptions& options = {});

/// value, count_<channel>..., rate_hz_<channel>...
std::string sweep_csv(const SweepResult& result);

}  // namespace spikelab
