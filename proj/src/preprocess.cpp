#include "spikelab/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "spikelab/dataset.hpp"
#include "spikelab/error.hpp"

namespace spikelab {
namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::invalid_parameter, "preprocess." + field + ": " + why, field);
}

// Maps any integer index onto [0, n) by mirror reflection with the edge
// sample repeated.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t k = i % period;
  if (k < 0) k += period;
  return static_cast<std::size_t>(k < static_cast<std::ptrdiff_t>(n) ? k : period - 1 - k);
}

}  // namespace

void PreprocessConfig::validate() const {
  if (upsample_factor < 1) invalid("upsample_factor", "must be >= 1");
  if (filter_enabled && !(filter_sigma > 0.0 && std::isfinite(filter_sigma)))
    invalid("filter_sigma", "must be > 0 when filtering is enabled");
  if (!(scale >= 0.0 && std::isfinite(scale))) invalid("scale", "must be finite and >= 0");
}

void to_json(nlohmann::json& j, const PreprocessConfig& c) {
  j = nlohmann::json{{"filter_enabled", c.filter_enabled}, {"filter_sigma", c.filter_sigma},
                     {"zero_offset", c.zero_offset},       {"split_signed", c.split_signed},
                     {"upsample_factor", c.upsample_factor}, {"scale", c.scale}};
}

void from_json(const nlohmann::json& j, PreprocessConfig& c) {
  if (!j.is_object()) invalid("$", "must be an object");
  auto flag = [&](const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) invalid(key, "must be a boolean");
    out = j[key].get<bool>();
  };
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) invalid(key, "must be a number");
    out = j[key].get<double>();
  };
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    static const char* known[] = {"filter_enabled", "filter_sigma", "zero_offset",
                                  "split_signed",   "upsample_factor", "scale"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
      invalid(key, "unknown field");
  }
  flag("filter_enabled", c.filter_enabled);
  number("filter_sigma", c.filter_sigma);
  flag("zero_offset", c.zero_offset);
  flag("split_signed", c.split_signed);
  number("scale", c.scale);
  if (j.contains("upsample_factor")) {
    const auto& f = j["upsample_factor"];
    if (!f.is_number_integer() || f.get<std::int64_t>() < 1)
      invalid("upsample_factor", "must be an integer >= 1");
    c.upsample_factor = f.get<std::size_t>();
  }
}

const std::vector<ParamSpec>& preprocess_controls() {
  static const std::vector<ParamSpec> controls{
      {"scale", 0.0, 10.0, 0.1, 1.0, ""},
      {"upsample_factor", 1.0, 100.0, 1.0, 1.0, ""},
      {"filter_sigma", 0.1, 10.0, 0.1, 1.0, "samples"},
  };
  return controls;
}

DatasetStats compute_stats(const TrialDataset& dataset) {
  if (dataset.trials.empty()) throw Error(ErrorCode::empty_dataset, "dataset has no trials");
  DatasetStats stats;
  stats.channel_names = dataset.channel_names;
  stats.sample_rate_hz = dataset.sample_rate_hz;
  stats.max_abs.assign(dataset.channel_names.size(), 0.0);
  for (const auto& trial : dataset.trials)
    for (std::size_t c = 0; c < trial.data.rows(); ++c)
      for (double x : trial.data.row(c)) stats.max_abs[c] = std::max(stats.max_abs[c], std::abs(x));
  return stats;
}

TrialDataset normalize_dataset(const TrialDataset& dataset) {
  const DatasetStats stats = compute_stats(dataset);
  TrialDataset out = dataset;
  for (auto& trial : out.trials)
    for (std::size_t c = 0; c < trial.data.rows(); ++c) {
      const double m = stats.max_abs[c];
      if (m == 0.0) continue;
      for (double& x : trial.data.row(c)) x /= m;
    }
  return out;
}

CurrentMatrix zero_offset(CurrentMatrix m) {
  for (std::size_t c = 0; c < m.samples.rows(); ++c) {
    auto row = m.samples.row(c);
    if (row.empty()) continue;
    const double first = row[0];
    for (double& x : row) x -= first;
  }
  return m;
}

CurrentMatrix split_signed(const CurrentMatrix& m) {
  CurrentMatrix out;
  out.dt = m.dt;
  out.samples = Matrix(2 * m.samples.rows(), m.samples.cols());
  for (std::size_t c = 0; c < m.samples.rows(); ++c) {
    const std::string label = c < m.channels.size() ? m.channels[c] : std::to_string(c);
    out.channels.push_back(label + "+");
    out.channels.push_back(label + "-");
    auto in = m.samples.row(c);
    auto pos = out.samples.row(2 * c);
    auto neg = out.samples.row(2 * c + 1);
    for (std::size_t t = 0; t < in.size(); ++t) {
      pos[t] = in[t] > 0.0 ? in[t] : 0.0;
      neg[t] = in[t] < 0.0 ? -in[t] : 0.0;
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_parameter, "sigma must be > 0", "filter_sigma");
  const auto radius = static_cast<std::ptrdiff_t>(4.0 * sigma + 0.5);
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double x = static_cast<double>(k) / sigma;
    w[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * x * x);
    sum += w[static_cast<std::size_t>(k + radius)];
  }
  for (double& x : w) x /= sum;
  return w;
}

CurrentMatrix smooth(const CurrentMatrix& m, double sigma) {
  const auto w = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(w.size() / 2);
  CurrentMatrix out = m;
  const std::size_t n = m.samples.cols();
  if (n == 0) return out;
  for (std::size_t c = 0; c < m.samples.rows(); ++c) {
    auto in = m.samples.row(c);
    auto dst = out.samples.row(c);
    for (std::size_t t = 0; t < n; ++t) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k)
        acc += w[static_cast<std::size_t>(k + radius)] *
               in[reflect_index(static_cast<std::ptrdiff_t>(t) + k, n)];
      dst[t] = acc;
    }
  }
  return out;
}

CurrentMatrix upsample(const CurrentMatrix& m, std::size_t f) {
  if (f < 1) throw Error(ErrorCode::invalid_input, "upsample factor must be >= 1", "upsample_factor");
  if (f == 1) return m;
  const std::size_t n = m.samples.cols();
  if (n < 2)
    throw Error(ErrorCode::invalid_input,
                "upsampling needs at least 2 samples per channel, got " + std::to_string(n),
                "upsample_factor");
  CurrentMatrix out;
  out.channels = m.channels;
  out.dt = m.dt / static_cast<double>(f);
  out.samples = Matrix(m.samples.rows(), (n - 1) * f + 1);
  const double inv_f = 1.0 / static_cast<double>(f);
  for (std::size_t c = 0; c < m.samples.rows(); ++c) {
    auto in = m.samples.row(c);
    auto dst = out.samples.row(c);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double a = in[i];
      const double delta = in[i + 1] - a;
      dst[i * f] = a;
      for (std::size_t j = 1; j < f; ++j)
        dst[i * f + j] = a + delta * (static_cast<double>(j) * inv_f);
    }
    dst[(n - 1) * f] = in[n - 1];
  }
  return out;
}

CurrentMatrix scale(CurrentMatrix m, double gain) {
  for (double& x : m.samples.values()) x *= gain;
  return m;
}

std::size_t output_channel_count(const PreprocessConfig& config, std::size_t input_channels) {
  return config.split_signed ? 2 * input_channels : input_channels;
}

CurrentMatrix apply(const PreprocessConfig& config, const Trial& trial, const DatasetStats& stats) {
  config.validate();
  if (trial.data.rows() != stats.max_abs.size())
    throw Error(ErrorCode::shape_mismatch, "trial channel count does not match dataset statistics");

  CurrentMatrix m;
  m.channels = stats.channel_names;
  m.samples = trial.data;
  m.dt = 1000.0 / stats.sample_rate_hz;
  for (std::size_t c = 0; c < m.samples.rows(); ++c) {
    const double peak = stats.max_abs[c];
    if (peak == 0.0) continue;
    for (double& x : m.samples.row(c)) x /= peak;
  }
  if (config.filter_enabled) m = smooth(m, config.filter_sigma);
  if (config.zero_offset) m = zero_offset(std::move(m));
  if (config.split_signed) m = split_signed(m);
  if (config.scale != 1.0) m = scale(std::move(m), config.scale);
  return upsample(m, config.upsample_factor);
}

}  // namespace spikelab
