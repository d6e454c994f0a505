#include "spikelab/serialization.hpp"

#include <charconv>
#include <cstdio>

#include "spikelab/error.hpp"

namespace spikelab {
namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::invalid_parameter, path + ": " + why, path);
}

nlohmann::json optional_json(const auto& value) {
  return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

TrialSelector selector_from(const nlohmann::json& doc, const std::string& prefix) {
  TrialSelector s;
  if (doc.contains("class") && !doc["class"].is_null()) {
    if (!doc["class"].is_string()) invalid(prefix + "class", "expected a string");
    s.class_label = doc["class"].get<std::string>();
  }
  if (doc.contains("repetition") && !doc["repetition"].is_null()) {
    if (!doc["repetition"].is_number_integer()) invalid(prefix + "repetition", "expected an integer");
    s.repetition = doc["repetition"].get<std::int64_t>();
  }
  return s;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return {buf, res.ptr};
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const ParamSpec& s) {
  return {{"name", s.name}, {"min", s.min},     {"max", s.max},
          {"step", s.step}, {"start", s.start}, {"unit", s.unit}};
}

nlohmann::json to_json(const ModelDescriptor& d) {
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& s : d.param_specs) specs.push_back(to_json(s));
  nlohmann::json presets = nlohmann::json::object();
  for (const auto& [name, values] : d.presets) presets[name] = values;
  return {{"model_id", d.model_id},
          {"state_names", d.state_names},
          {"param_specs", std::move(specs)},
          {"presets", std::move(presets)}};
}

nlohmann::json to_json(const TrialSelector& s) {
  return {{"class", optional_json(s.class_label)}, {"repetition", optional_json(s.repetition)}};
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json pre;
  to_json(pre, c.preprocess);
  nlohmann::json j{{"model_id", c.model_id},
                   {"params", c.params},
                   {"preprocess", std::move(pre)},
                   {"class", optional_json(c.selector.class_label)},
                   {"repetition", optional_json(c.selector.repetition)}};
  if (!c.channel_mask.empty()) j["channel_mask"] = c.channel_mask;
  return j;
}

nlohmann::json to_json(const SpikeRaster& r) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : r.events) events.push_back({e.step, e.channel});
  return {{"n_steps", r.n_steps}, {"n_channels", r.n_channels}, {"events", std::move(events)}};
}

nlohmann::json to_json(const SpikeStatistics& s) {
  return {{"counts", s.counts}, {"rates_hz", s.rates_hz}};
}

nlohmann::json to_json(const SimulationResult& r) {
  nlohmann::json pre;
  to_json(pre, r.preprocess);
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : r.channel_errors)
    errors.push_back({{"channel", e.channel}, {"step", e.step}, {"variable", e.variable},
                      {"message", e.message}});
  // Keyed by state name; each entry is [channel][time].
  nlohmann::json traces = nlohmann::json::object();
  for (std::size_t v = 0; v < r.state_traces.size(); ++v) traces[r.state_names.at(v)] = r.state_traces[v];
  return {{"run_id", r.run_id},
          {"model_id", r.model_id},
          {"state_names", r.state_names},
          {"channels", r.channels},
          {"dt_sim", r.dt_sim},
          {"upsample_factor", r.upsample_factor},
          {"param_echo", r.param_echo},
          {"preprocess", std::move(pre)},
          {"selector", to_json(r.selector)},
          {"channel_mask", r.channel_mask},
          {"traces", std::move(traces)},
          {"input", r.input_traces},
          {"raster", to_json(r.spike_raster)},
          {"statistics", to_json(spike_statistics(r.spike_raster, r.dt_sim))},
          {"channel_errors", std::move(errors)},
          {"metadata", r.metadata}};
}

SimulationResult result_from_json(const nlohmann::json& doc) {
  try {
    SimulationResult r;
    r.run_id = doc.at("run_id").get<std::string>();
    r.model_id = doc.at("model_id").get<std::string>();
    r.state_names = doc.at("state_names").get<std::vector<std::string>>();
    r.channels = doc.at("channels").get<std::vector<std::string>>();
    r.dt_sim = doc.at("dt_sim").get<double>();
    r.upsample_factor = doc.at("upsample_factor").get<std::size_t>();
    r.param_echo = doc.at("param_echo").get<ParamAssignment>();
    from_json(doc.at("preprocess"), r.preprocess);
    r.selector = selector_from(doc.at("selector"), "selector.");
    r.channel_mask = doc.at("channel_mask").get<std::vector<bool>>();
    const auto& traces = doc.at("traces");
    for (std::size_t v = 0; v + 1 < r.state_names.size(); ++v)
      r.state_traces.push_back(traces.at(r.state_names[v]).get<std::vector<std::vector<double>>>());
    r.input_traces = doc.at("input").get<std::vector<std::vector<double>>>();
    const auto& raster = doc.at("raster");
    r.spike_raster.n_steps = raster.at("n_steps").get<std::size_t>();
    r.spike_raster.n_channels = raster.at("n_channels").get<std::size_t>();
    for (const auto& e : raster.at("events"))
      r.spike_raster.events.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
    for (const auto& e : doc.at("channel_errors"))
      r.channel_errors.push_back({e.at("channel").get<std::size_t>(), e.at("step").get<std::size_t>(),
                                  e.at("variable").get<std::string>(),
                                  e.at("message").get<std::string>()});
    r.metadata = doc.value("metadata", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_file, std::string("result document: ") + e.what());
  }
}

RunConfig run_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) invalid("$", "request body must be a JSON object");
  RunConfig c;
  for (const auto& item : doc.items()) {
    const std::string& key = item.key();
    static const char* known[] = {"model_id", "params", "preprocess", "class", "repetition",
                                  "channel_mask"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
      invalid(key, "unknown field");
  }
  if (!doc.contains("model_id") || !doc["model_id"].is_string())
    invalid("model_id", "required string");
  c.model_id = doc["model_id"].get<std::string>();
  if (doc.contains("params")) {
    const auto& p = doc["params"];
    if (!p.is_object()) invalid("params", "expected an object of numbers");
    for (const auto& [name, value] : p.items()) {
      if (!value.is_number()) invalid("params." + name, "expected a number");
      c.params[name] = value.get<double>();
    }
  }
  if (doc.contains("preprocess")) {
    try {
      from_json(doc["preprocess"], c.preprocess);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), "preprocess." + e.field());
    }
  }
  c.selector = selector_from(doc, "");
  if (doc.contains("channel_mask")) {
    const auto& m = doc["channel_mask"];
    if (!m.is_array()) invalid("channel_mask", "expected an array of booleans");
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i].is_boolean()) invalid("channel_mask[" + std::to_string(i) + "]", "expected a boolean");
      c.channel_mask.push_back(m[i].get<bool>());
    }
  }
  return c;
}

std::string raster_csv(const SpikeRaster& raster, double dt_sim) {
  std::string out = "step,channel,time_ms\n";
  for (const auto& e : raster.events) {
    out += std::to_string(e.step);
    out += ',';
    out += std::to_string(e.channel);
    out += ',';
    out += format_double(static_cast<double>(e.step) * dt_sim);
    out += '\n';
  }
  return out;
}

}  // namespace spikelab
