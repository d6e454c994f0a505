#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spikelab {

enum class ModelKind { lif, izhikevich, mn };

/// Slider metadata for one tunable parameter. Valid values are
/// min + n * step for integer n, clipped to [min, max].
struct ParamSpec {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  double step = 0.0;
  double start = 0.0;
  std::string unit;

  bool contains(double value) const { return value >= min && value <= max; }
  bool on_grid(double value) const;
  bool operator==(const ParamSpec&) const = default;
};

using ParamAssignment = std::map<std::string, double>;

/// Identity of a model as seen by clients. `state_names` always starts with
/// "V" and ends with "spk"; everything in between is an auxiliary variable.
struct ModelDescriptor {
  std::string model_id;
  std::vector<std::string> state_names;
  std::vector<ParamSpec> param_specs;
  std::map<std::string, ParamAssignment> presets;

  const ParamSpec* find_param(std::string_view name) const;
  ParamAssignment defaults() const;
  /// Continuous state variables, i.e. state_names without the trailing "spk".
  std::size_t value_count() const { return state_names.size() - 1; }
};

struct NeuronState {
  std::vector<double> values;  // ordered as state_names[0 .. last-1]
  bool spiked = false;

  bool operator==(const NeuronState&) const = default;
};

// Potentials in the unit the input is expressed in, times in ms.
struct LifParams {
  double tau_mem = 10.0;
  double r_mem = 1.0;
  double v_rest = 0.0;
  double v_th = 1.0;
  double v_reset = 0.0;
};

struct IzhikevichParams {
  double a = 0.02;
  double b = 0.2;
  double c = -65.0;
  double d = 8.0;
  double v_peak = 30.0;
};

// Generalized linear integrate-and-fire, adaptive threshold. Rates in 1/ms,
// potentials in mV, currents expressed as mV/ms (already divided by C).
struct MnParams {
  double a = 0.0;
  double A1 = 0.0;
  double A2 = 0.0;
  double b = 0.01;
  double G = 0.05;
  double k1 = 0.2;
  double k2 = 0.02;
  double R1 = 0.0;
  double R2 = 1.0;
  double E_L = -70.0;
  double V_r = -70.0;
  double Theta_r = -60.0;
  double Theta_inf = -50.0;
};

using ModelParams = std::variant<LifParams, IzhikevichParams, MnParams>;

ModelKind parse_model_id(std::string_view model_id);
std::string_view model_id(ModelKind kind);
ModelKind kind_of(const ModelParams& params);

/// Descriptor with state names and parameter specs but no presets.
const ModelDescriptor& builtin_descriptor(ModelKind kind);

/// Builds typed parameters from a name -> value map. Missing names take the
/// spec's start value; unknown names and violated model invariants raise
/// InvalidParameter naming the parameter.
ModelParams make_params(ModelKind kind, const ParamAssignment& assignment);
ModelParams make_params(std::string_view model_id, const ParamAssignment& assignment);

ParamAssignment to_assignment(const ModelParams& params);

/// Throws InvalidParameter if a model invariant (tau_mem > 0, v_th > v_reset,
/// a > 0, k1 > 0, ...) does not hold.
void validate_invariants(const ModelParams& params);

/// Throws InvalidParameter if any value is outside its range or off the
/// slider grid. Unknown names are rejected as well.
void validate_assignment(const ModelDescriptor& descriptor, const ParamAssignment& assignment);

NeuronState initial_state(const ModelParams& params);
NeuronState initial_state(std::string_view model_id, const ParamAssignment& assignment);

/// One forward-Euler step followed by the threshold test and reset rule.
/// Derivatives are evaluated on the incoming state. Throws DivergenceError
/// (step index 0) if the result is not finite.
NeuronState step(const ModelParams& params, const NeuronState& state, double input_current,
                 double dt);
NeuronState step(std::string_view model_id, const ParamAssignment& assignment,
                 const NeuronState& state, double input_current, double dt);

/// Potential the model resets V to after a spike.
double reset_potential(const ModelParams& params);

}  // namespace spikelab
