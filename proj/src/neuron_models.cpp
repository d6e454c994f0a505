#include "spikelab/neuron_models.hpp"

#include <array>
#include <cmath>

#include "spikelab/error.hpp"
#include "spikelab/kernels/lane.hpp"

namespace spikelab {
namespace {

constexpr double kGridTolerance = 1e-9;

ModelDescriptor make_lif_descriptor() {
  return {"lif",
          {"V", "spk"},
          {
              {"tau_mem", 0.1, 100.0, 0.1, 10.0, "ms"},
              {"r_mem", 0.0, 10.0, 0.01, 1.0, ""},
              {"v_rest", -2.0, 2.0, 0.01, 0.0, ""},
              {"v_th", 0.01, 5.0, 0.01, 1.0, ""},
              {"v_reset", -2.0, 2.0, 0.01, 0.0, ""},
          },
          {}};
}

ModelDescriptor make_izhikevich_descriptor() {
  return {"izhikevich",
          {"V", "u", "spk"},
          {
              {"a", 0.001, 0.2, 0.001, 0.02, "1/ms"},
              {"b", 0.0, 0.5, 0.005, 0.2, ""},
              {"c", -80.0, -40.0, 0.5, -65.0, "mV"},
              {"d", 0.0, 10.0, 0.05, 8.0, ""},
              {"v_peak", 0.0, 50.0, 1.0, 30.0, "mV"},
          },
          {}};
}

ModelDescriptor make_mn_descriptor() {
  return {"mn",
          {"V", "I1", "I2", "Theta", "spk"},
          {
              {"a", -0.1, 0.1, 0.001, 0.0, "1/ms"},
              {"A1", -20.0, 20.0, 0.1, 0.0, "mV/ms"},
              {"A2", -5.0, 5.0, 0.01, 0.0, "mV/ms"},
              {"b", 0.0, 0.1, 0.001, 0.01, "1/ms"},
              {"G", 0.0, 0.2, 0.001, 0.05, "1/ms"},
              {"k1", 0.01, 1.0, 0.01, 0.2, "1/ms"},
              {"k2", 0.001, 0.1, 0.001, 0.02, "1/ms"},
              {"R1", 0.0, 2.0, 0.01, 0.0, ""},
              {"R2", 0.0, 2.0, 0.01, 1.0, ""},
              {"E_L", -100.0, 0.0, 0.5, -70.0, "mV"},
              {"V_r", -100.0, 0.0, 0.5, -70.0, "mV"},
              {"Theta_r", -100.0, 0.0, 0.5, -60.0, "mV"},
              {"Theta_inf", -100.0, 0.0, 0.5, -50.0, "mV"},
          },
          {}};
}

struct Field {
  const char* name;
  double* slot;
};

std::array<Field, 5> fields(LifParams& p) {
  return {{{"tau_mem", &p.tau_mem},
           {"r_mem", &p.r_mem},
           {"v_rest", &p.v_rest},
           {"v_th", &p.v_th},
           {"v_reset", &p.v_reset}}};
}

std::array<Field, 5> fields(IzhikevichParams& p) {
  return {{{"a", &p.a}, {"b", &p.b}, {"c", &p.c}, {"d", &p.d}, {"v_peak", &p.v_peak}}};
}

std::array<Field, 13> fields(MnParams& p) {
  return {{{"a", &p.a},
           {"A1", &p.A1},
           {"A2", &p.A2},
           {"b", &p.b},
           {"G", &p.G},
           {"k1", &p.k1},
           {"k2", &p.k2},
           {"R1", &p.R1},
           {"R2", &p.R2},
           {"E_L", &p.E_L},
           {"V_r", &p.V_r},
           {"Theta_r", &p.Theta_r},
           {"Theta_inf", &p.Theta_inf}}};
}

[[noreturn]] void invalid(const std::string& name, const std::string& why) {
  throw Error(ErrorCode::invalid_parameter, "parameter '" + name + "': " + why, name);
}

template <typename Params>
Params fill(const ModelDescriptor& desc, const ParamAssignment& assignment) {
  Params p{};
  auto slots = fields(p);
  for (const auto& spec : desc.param_specs) {
    for (auto& f : slots)
      if (spec.name == f.name) *f.slot = spec.start;
  }
  for (const auto& [name, value] : assignment) {
    bool known = false;
    for (auto& f : slots) {
      if (name == f.name) {
        *f.slot = value;
        known = true;
      }
    }
    if (!known) invalid(name, "unknown parameter for model '" + desc.model_id + "'");
  }
  return p;
}

void check_finite(const char* name, double value) {
  if (!std::isfinite(value)) invalid(name, "must be finite");
}

template <typename Params>
void check_all_finite(Params p) {
  for (const auto& f : fields(p)) check_finite(f.name, *f.slot);
}

}  // namespace

bool ParamSpec::on_grid(double value) const {
  if (!(step > 0.0)) return false;
  const double n = (value - min) / step;
  return std::abs(n - std::round(n)) <= kGridTolerance * std::max(1.0, std::abs(n));
}

const ParamSpec* ModelDescriptor::find_param(std::string_view name) const {
  for (const auto& spec : param_specs)
    if (spec.name == name) return &spec;
  return nullptr;
}

ParamAssignment ModelDescriptor::defaults() const {
  ParamAssignment out;
  for (const auto& spec : param_specs) out[spec.name] = spec.start;
  return out;
}

ModelKind parse_model_id(std::string_view id) {
  if (id == "lif") return ModelKind::lif;
  if (id == "izhikevich") return ModelKind::izhikevich;
  if (id == "mn") return ModelKind::mn;
  throw Error(ErrorCode::not_found,
              "unknown model '" + std::string(id) + "' (available: lif, izhikevich, mn)",
              std::string(id));
}

std::string_view model_id(ModelKind kind) {
  switch (kind) {
    case ModelKind::lif: return "lif";
    case ModelKind::izhikevich: return "izhikevich";
    case ModelKind::mn: return "mn";
  }
  return "unknown";
}

ModelKind kind_of(const ModelParams& params) { return static_cast<ModelKind>(params.index()); }

const ModelDescriptor& builtin_descriptor(ModelKind kind) {
  static const ModelDescriptor lif = make_lif_descriptor();
  static const ModelDescriptor izh = make_izhikevich_descriptor();
  static const ModelDescriptor mn = make_mn_descriptor();
  switch (kind) {
    case ModelKind::lif: return lif;
    case ModelKind::izhikevich: return izh;
    case ModelKind::mn: return mn;
  }
  return lif;
}

ModelParams make_params(ModelKind kind, const ParamAssignment& assignment) {
  const auto& desc = builtin_descriptor(kind);
  ModelParams out;
  switch (kind) {
    case ModelKind::lif: out = fill<LifParams>(desc, assignment); break;
    case ModelKind::izhikevich: out = fill<IzhikevichParams>(desc, assignment); break;
    case ModelKind::mn: out = fill<MnParams>(desc, assignment); break;
  }
  validate_invariants(out);
  return out;
}

ModelParams make_params(std::string_view id, const ParamAssignment& assignment) {
  return make_params(parse_model_id(id), assignment);
}

ParamAssignment to_assignment(const ModelParams& params) {
  ParamAssignment out;
  std::visit(
      [&](auto p) {
        for (const auto& f : fields(p)) out[f.name] = *f.slot;
      },
      params);
  return out;
}

void validate_invariants(const ModelParams& params) {
  std::visit([](const auto& p) { check_all_finite(p); }, params);
  if (const auto* lif = std::get_if<LifParams>(&params)) {
    if (!(lif->tau_mem > 0.0)) invalid("tau_mem", "must be > 0");
    if (!(lif->v_th > lif->v_reset)) invalid("v_th", "must be greater than v_reset");
  } else if (const auto* izh = std::get_if<IzhikevichParams>(&params)) {
    if (!(izh->a > 0.0)) invalid("a", "must be > 0");
  } else if (const auto* mn = std::get_if<MnParams>(&params)) {
    if (!(mn->k1 > 0.0)) invalid("k1", "must be > 0");
    if (!(mn->k2 > 0.0)) invalid("k2", "must be > 0");
    if (!(mn->G >= 0.0)) invalid("G", "must be >= 0");
    if (!(mn->b >= 0.0)) invalid("b", "must be >= 0");
  }
}

void validate_assignment(const ModelDescriptor& desc, const ParamAssignment& assignment) {
  for (const auto& [name, value] : assignment) {
    const ParamSpec* spec = desc.find_param(name);
    if (!spec) invalid(name, "unknown parameter for model '" + desc.model_id + "'");
    if (!std::isfinite(value)) invalid(name, "must be finite");
    if (!spec->contains(value))
      invalid(name, "value " + std::to_string(value) + " outside [" + std::to_string(spec->min) +
                        ", " + std::to_string(spec->max) + "]");
    if (!spec->on_grid(value))
      invalid(name, "value " + std::to_string(value) + " is not on the slider grid (min " +
                        std::to_string(spec->min) + ", step " + std::to_string(spec->step) + ")");
  }
}

NeuronState initial_state(const ModelParams& params) {
  validate_invariants(params);
  NeuronState s;
  if (const auto* lif = std::get_if<LifParams>(&params)) {
    s.values = {lif->v_rest};
  } else if (const auto* izh = std::get_if<IzhikevichParams>(&params)) {
    s.values = {izh->c, izh->b * izh->c};
  } else if (const auto* mn = std::get_if<MnParams>(&params)) {
    s.values = {mn->E_L, 0.0, 0.0, mn->Theta_inf};
  }
  return s;
}

NeuronState initial_state(std::string_view id, const ParamAssignment& assignment) {
  return initial_state(make_params(id, assignment));
}

NeuronState step(const ModelParams& params, const NeuronState& state, double input_current,
                 double dt) {
  const auto& desc = builtin_descriptor(kind_of(params));
  if (state.values.size() != desc.value_count())
    throw Error(ErrorCode::invalid_input,
                "state has " + std::to_string(state.values.size()) + " values, model '" +
                    desc.model_id + "' needs " + std::to_string(desc.value_count()));
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw Error(ErrorCode::invalid_input, "dt must be finite and > 0", "dt");

  NeuronState next = state;
  auto& x = next.values;
  if (const auto* lif = std::get_if<LifParams>(&params)) {
    next.spiked = kernels::lane::lif(*lif, dt, input_current, x[0]);
  } else if (const auto* izh = std::get_if<IzhikevichParams>(&params)) {
    next.spiked = kernels::lane::izhikevich(*izh, dt, input_current, x[0], x[1]);
  } else if (const auto* mn = std::get_if<MnParams>(&params)) {
    next.spiked = kernels::lane::mn(*mn, dt, input_current, x[0], x[1], x[2], x[3]);
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i])) throw DivergenceError(0, desc.state_names[i]);
  return next;
}

NeuronState step(std::string_view id, const ParamAssignment& assignment, const NeuronState& state,
                 double input_current, double dt) {
  return step(make_params(id, assignment), state, input_current, dt);
}

double reset_potential(const ModelParams& params) {
  if (const auto* lif = std::get_if<LifParams>(&params)) return lif->v_reset;
  if (const auto* izh = std::get_if<IzhikevichParams>(&params)) return izh->c;
  return std::get<MnParams>(params).V_r;
}

}  // namespace spikelab
