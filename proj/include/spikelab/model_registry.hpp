#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spikelab/neuron_models.hpp"

namespace spikelab {

/// Model descriptors plus named presets. Immutable once built, so a single
/// instance can be shared between threads.
class ModelRegistry {
 public:
  /// Built-in descriptors with the presets bundled at compile time.
  static ModelRegistry bundled();
  /// Bundled presets, then entries from `preset_file` (same names override).
  static ModelRegistry with_preset_file(const std::filesystem::path& preset_file);

  /// Merges a preset document {model_id: {preset_name: {param: value}}}.
  /// Every preset must assign every parameter, in range and on the grid;
  /// violations raise MalformedFile whose field() is the key path.
  void merge_presets(const nlohmann::json& document);

  const ModelDescriptor& describe(std::string_view model_id) const;
  const ParamAssignment& preset(std::string_view model_id, std::string_view preset_name) const;

  /// lif, izhikevich, mn in that order.
  const std::vector<ModelDescriptor>& descriptors() const { return descriptors_; }

 private:
  ModelRegistry();
  ModelDescriptor& mutable_descriptor(std::string_view model_id);

  std::vector<ModelDescriptor> descriptors_;
};

/// Process-wide registry with the bundled presets.
const ModelRegistry& default_registry();

const ModelDescriptor& describe(std::string_view model_id);
const ParamAssignment& preset(std::string_view model_id, std::string_view preset_name);

/// Checks the descriptor invariants: state order, ParamSpec ranges and grid,
/// preset completeness. Throws Error(invalid_input) naming the first problem.
void check_descriptor(const ModelDescriptor& descriptor);

}  // namespace spikelab
