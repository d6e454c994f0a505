#include "spikelab/model_registry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bundled_presets.hpp"
#include "spikelab/error.hpp"

namespace spikelab {
namespace {

[[noreturn]] void malformed(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::malformed_file, "preset entry '" + path + "': " + why, path);
}

}  // namespace

ModelRegistry::ModelRegistry() {
  for (ModelKind kind : {ModelKind::lif, ModelKind::izhikevich, ModelKind::mn})
    descriptors_.push_back(builtin_descriptor(kind));
}

ModelRegistry ModelRegistry::bundled() {
  ModelRegistry registry;
  registry.merge_presets(nlohmann::json::parse(detail::kBundledPresets));
  for (const auto& d : registry.descriptors_) check_descriptor(d);
  return registry;
}

ModelRegistry ModelRegistry::with_preset_file(const std::filesystem::path& preset_file) {
  std::ifstream in(preset_file);
  if (!in) throw Error(ErrorCode::io_error, "cannot open preset file " + preset_file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::malformed_file,
                "preset file " + preset_file.string() + ": " + e.what());
  }
  ModelRegistry registry = bundled();
  registry.merge_presets(doc);
  return registry;
}

ModelDescriptor& ModelRegistry::mutable_descriptor(std::string_view id) {
  for (auto& d : descriptors_)
    if (d.model_id == id) return d;
  throw Error(ErrorCode::not_found, "unknown model '" + std::string(id) + "'", std::string(id));
}

void ModelRegistry::merge_presets(const nlohmann::json& document) {
  if (!document.is_object()) malformed("$", "top level must be an object of models");

  // Validate everything before touching the registry.
  std::vector<std::pair<ModelDescriptor*, std::pair<std::string, ParamAssignment>>> staged;
  for (const auto& [model, presets] : document.items()) {
    ModelDescriptor* desc = nullptr;
    for (auto& d : descriptors_)
      if (d.model_id == model) desc = &d;
    if (!desc) malformed(model, "unknown model");
    if (!presets.is_object()) malformed(model, "must be an object of presets");

    for (const auto& [name, values] : presets.items()) {
      const std::string path = model + "." + name;
      if (!values.is_object()) malformed(path, "must be an object of parameter values");
      ParamAssignment assignment;
      for (const auto& [param, value] : values.items()) {
        const std::string ppath = path + "." + param;
        const ParamSpec* spec = desc->find_param(param);
        if (!spec) malformed(ppath, "unknown parameter");
        if (!value.is_number()) malformed(ppath, "must be a number");
        const double v = value.get<double>();
        if (!spec->contains(v)) malformed(ppath, "out of range");
        if (!spec->on_grid(v)) malformed(ppath, "not on the parameter grid");
        assignment[param] = v;
      }
      for (const auto& spec : desc->param_specs)
        if (!assignment.contains(spec.name)) malformed(path + "." + spec.name, "missing");
      try {
        validate_invariants(make_params(parse_model_id(model), assignment));
      } catch (const Error& e) {
        malformed(path + "." + e.field(), e.what());
      }
      staged.push_back({desc, {name, std::move(assignment)}});
    }
  }
  for (auto& [desc, entry] : staged) desc->presets[entry.first] = std::move(entry.second);
}

const ModelDescriptor& ModelRegistry::describe(std::string_view id) const {
  for (const auto& d : descriptors_)
    if (d.model_id == id) return d;
  throw Error(ErrorCode::not_found,
              "unknown model '" + std::string(id) + "' (available: lif, izhikevich, mn)",
              std::string(id));
}

const ParamAssignment& ModelRegistry::preset(std::string_view id, std::string_view name) const {
  const auto& desc = describe(id);
  auto it = desc.presets.find(std::string(name));
  if (it == desc.presets.end()) {
    std::string known;
    for (const auto& [k, _] : desc.presets) known += (known.empty() ? "" : ", ") + k;
    throw Error(ErrorCode::not_found,
                "unknown preset '" + std::string(name) + "' for model '" + desc.model_id +
                    "' (available: " + known + ")",
                std::string(name));
  }
  return it->second;
}

const ModelRegistry& default_registry() {
  static const ModelRegistry registry = ModelRegistry::bundled();
  return registry;
}

const ModelDescriptor& describe(std::string_view model_id) {
  return default_registry().describe(model_id);
}

const ParamAssignment& preset(std::string_view model_id, std::string_view preset_name) {
  return default_registry().preset(model_id, preset_name);
}

void check_descriptor(const ModelDescriptor& d) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::invalid_input, "descriptor '" + d.model_id + "': " + why, d.model_id);
  };
  if (d.state_names.size() < 2 || d.state_names.front() != "V" || d.state_names.back() != "spk")
    fail("state names must begin with V and end with spk");
  for (const auto& s : d.param_specs) {
    if (!(s.step > 0.0)) fail(s.name + ": step must be > 0");
    if (!(s.min <= s.start && s.start <= s.max)) fail(s.name + ": start outside [min, max]");
    const double n = (s.max - s.min) / s.step;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, std::abs(n)))
      fail(s.name + ": range is not a multiple of step");
    if (!s.on_grid(s.start)) fail(s.name + ": start is not on the grid");
  }
  for (const auto& [name, values] : d.presets) {
    for (const auto& s : d.param_specs) {
      auto it = values.find(s.name);
      if (it == values.end()) fail("preset " + name + " is missing " + s.name);
      if (!s.contains(it->second)) fail("preset " + name + ": " + s.name + " out of range");
    }
  }
}

}  // namespace spikelab
