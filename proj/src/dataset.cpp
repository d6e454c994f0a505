#include "spikelab/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "spikelab/error.hpp"

namespace spikelab {
namespace {

[[noreturn]] void malformed_field(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::malformed_file, path + ": " + why, path);
}

std::string key_string(const std::optional<std::string>& cls, const std::optional<std::int64_t>& rep) {
  return "(class=" + (cls ? *cls : std::string("<none>")) +
         ", repetition=" + (rep ? std::to_string(*rep) : std::string("<none>")) + ")";
}

// 53-bit uniform in [0, 1) from the raw engine output, so the sequence does
// not depend on the standard library's distribution implementations.
double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform(rng); }

std::string class_name(std::size_t k) {
  if (k < 26) return std::string(1, static_cast<char>('A' + k));
  return "class" + std::to_string(k);
}

}  // namespace

std::vector<std::string> TrialDataset::class_labels() const {
  std::set<std::string> labels;
  for (const auto& t : trials)
    if (t.class_label) labels.insert(*t.class_label);
  return {labels.begin(), labels.end()};
}

std::vector<std::int64_t> TrialDataset::repetitions(const std::optional<std::string>& cls) const {
  std::set<std::int64_t> reps;
  for (const auto& t : trials)
    if (t.class_label == cls && t.repetition) reps.insert(*t.repetition);
  return {reps.begin(), reps.end()};
}

bool TrialDataset::has_class_metadata() const {
  return std::any_of(trials.begin(), trials.end(), [](const Trial& t) { return t.class_label.has_value(); });
}

bool TrialDataset::has_repetition_metadata() const {
  return std::any_of(trials.begin(), trials.end(), [](const Trial& t) { return t.repetition.has_value(); });
}

void TrialDataset::validate() const {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw Error(ErrorCode::invalid_input, "sample_rate_hz must be > 0", "sample_rate_hz");
  if (channel_names.empty())
    throw Error(ErrorCode::shape_mismatch, "dataset has no channels", "channel_names");
  std::set<std::pair<std::optional<std::string>, std::optional<std::int64_t>>> keys;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    const std::string where = "trials[" + std::to_string(i) + "]";
    if (t.data.rows() != channel_names.size())
      throw Error(ErrorCode::shape_mismatch,
                  where + ": " + std::to_string(t.data.rows()) + " channels, expected " +
                      std::to_string(channel_names.size()),
                  where + ".data");
    if (t.data.cols() == 0)
      throw Error(ErrorCode::shape_mismatch, where + ": trial has no samples", where + ".data");
    for (double x : t.data.values())
      if (!std::isfinite(x))
        throw Error(ErrorCode::invalid_input, where + ": non-finite sample", where + ".data");
    if (t.repetition && *t.repetition < 0)
      throw Error(ErrorCode::invalid_input, where + ": negative repetition", where + ".repetition");
    if (!keys.emplace(t.class_label, t.repetition).second)
      throw Error(ErrorCode::duplicate_trial_key,
                  where + ": duplicate trial key " + key_string(t.class_label, t.repetition), where);
  }
}

TrialDataset dataset_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) malformed_field("$", "expected an object");
  TrialDataset d;

  if (doc.contains("name")) {
    if (!doc["name"].is_string()) malformed_field("name", "expected a string");
    d.name = doc["name"].get<std::string>();
  }
  if (!doc.contains("sample_rate_hz")) malformed_field("sample_rate_hz", "missing");
  if (!doc["sample_rate_hz"].is_number()) malformed_field("sample_rate_hz", "expected a number");
  d.sample_rate_hz = doc["sample_rate_hz"].get<double>();

  if (!doc.contains("channel_names")) malformed_field("channel_names", "missing");
  const auto& names = doc["channel_names"];
  if (!names.is_array()) malformed_field("channel_names", "expected an array of strings");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!names[i].is_string())
      malformed_field("channel_names[" + std::to_string(i) + "]", "expected a string");
    d.channel_names.push_back(names[i].get<std::string>());
  }

  if (!doc.contains("trials")) malformed_field("trials", "missing");
  const auto& trials = doc["trials"];
  if (!trials.is_array()) malformed_field("trials", "expected an array");
  if (trials.empty()) malformed_field("trials", "dataset has no trials");
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const std::string where = "trials[" + std::to_string(i) + "]";
    const auto& jt = trials[i];
    if (!jt.is_object()) malformed_field(where, "expected an object");
    Trial t;
    if (jt.contains("class") && !jt["class"].is_null()) {
      if (!jt["class"].is_string()) malformed_field(where + ".class", "expected a string");
      t.class_label = jt["class"].get<std::string>();
    }
    if (jt.contains("repetition") && !jt["repetition"].is_null()) {
      const auto& r = jt["repetition"];
      if (!r.is_number_integer() || r.get<std::int64_t>() < 0)
        malformed_field(where + ".repetition", "expected a non-negative integer");
      t.repetition = r.get<std::int64_t>();
    }
    if (!jt.contains("data")) malformed_field(where + ".data", "missing");
    const auto& data = jt["data"];
    if (!data.is_array()) malformed_field(where + ".data", "expected an array of channel arrays");
    if (data.size() != d.channel_names.size())
      throw Error(ErrorCode::shape_mismatch,
                  where + ".data: " + std::to_string(data.size()) + " channels, expected " +
                      std::to_string(d.channel_names.size()),
                  where + ".data");
    const std::size_t len = data.empty() ? 0 : (data[0].is_array() ? data[0].size() : 0);
    t.data = Matrix(data.size(), len);
    for (std::size_t c = 0; c < data.size(); ++c) {
      const std::string cpath = where + ".data[" + std::to_string(c) + "]";
      if (!data[c].is_array()) malformed_field(cpath, "expected an array of numbers");
      if (data[c].size() != len)
        throw Error(ErrorCode::shape_mismatch,
                    cpath + ": " + std::to_string(data[c].size()) + " samples, expected " +
                        std::to_string(len),
                    cpath);
      for (std::size_t s = 0; s < len; ++s) {
        const auto& v = data[c][s];
        if (!v.is_number()) malformed_field(cpath + "[" + std::to_string(s) + "]", "expected a number");
        t.data(c, s) = v.get<double>();
      }
    }
    d.trials.push_back(std::move(t));
  }
  try {
    d.validate();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::invalid_input) throw;
    throw Error(ErrorCode::malformed_file, e.what(), e.field());
  }
  return d;
}

TrialDataset parse_dataset(std::string_view text, std::string_view source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line/column for the message.
    const std::size_t offset = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(
                                     std::count(text.begin(), text.begin() + offset, '\n'));
    const auto last_nl = text.substr(0, offset).rfind('\n');
    const std::size_t col = offset - (last_nl == std::string_view::npos ? 0 : last_nl + 1) + 1;
    throw Error(ErrorCode::malformed_file,
                std::string(source) + ":" + std::to_string(line) + ":" + std::to_string(col) +
                    ": " + e.what(),
                "line " + std::to_string(line));
  }
  try {
    return dataset_from_json(doc);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(source) + ": " + e.what(), e.field());
  }
}

TrialDataset load(const std::filesystem::path& path, const LoadOptions& options) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot read " + path.string() + ": " + ec.message());
  if (size > options.max_bytes)
    throw Error(ErrorCode::file_too_large,
                path.string() + ": " + std::to_string(size) + " bytes exceeds the limit of " +
                    std::to_string(options.max_bytes));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), path.string());
}

nlohmann::json to_json(const TrialDataset& d) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : d.trials) {
    nlohmann::json jt;
    if (t.class_label) jt["class"] = *t.class_label;
    if (t.repetition) jt["repetition"] = *t.repetition;
    jt["data"] = t.data.to_rows();
    trials.push_back(std::move(jt));
  }
  return {{"name", d.name},
          {"sample_rate_hz", d.sample_rate_hz},
          {"channel_names", d.channel_names},
          {"trials", std::move(trials)}};
}

std::string serialize(const TrialDataset& d) { return to_json(d).dump(); }

void save(const TrialDataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << serialize(d) << '\n';
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

nlohmann::json metadata_json(const TrialDataset& d) {
  nlohmann::json reps = nlohmann::json::object();
  for (const auto& cls : d.class_labels()) reps[cls] = d.repetitions(cls);
  nlohmann::json out{{"name", d.name},
                     {"sample_rate_hz", d.sample_rate_hz},
                     {"channel_names", d.channel_names},
                     {"trial_count", d.trials.size()},
                     {"samples_per_trial", d.trials.empty() ? 0 : d.trials.front().data.cols()},
                     {"classes", d.class_labels()},
                     {"repetitions", std::move(reps)}};
  if (!d.has_class_metadata() && d.has_repetition_metadata())
    out["unlabelled_repetitions"] = d.repetitions(std::nullopt);
  return out;
}

const Trial& select(const TrialDataset& d, const std::optional<std::string>& cls,
                    const std::optional<std::int64_t>& rep) {
  for (const auto& t : d.trials)
    if (t.class_label == cls && t.repetition == rep) return t;

  auto join = [](const auto& items) {
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (const auto& x : items) {
      os << (first ? "" : ", ") << x;
      first = false;
    }
    os << '}';
    return os.str();
  };
  const auto classes = d.class_labels();
  const bool class_known = cls ? std::find(classes.begin(), classes.end(), *cls) != classes.end()
                               : std::any_of(d.trials.begin(), d.trials.end(),
                                             [](const Trial& t) { return !t.class_label; });
  if (!class_known)
    throw Error(ErrorCode::not_found,
                "no trial for " + key_string(cls, rep) + "; valid classes: " + join(classes),
                "class");
  throw Error(ErrorCode::not_found,
              "no trial for " + key_string(cls, rep) + "; valid repetitions: " +
                  join(d.repetitions(cls)),
              "repetition");
}

TrialDataset synthesize_example(std::size_t n_classes, std::size_t n_repetitions,
                                std::size_t n_channels, std::size_t n_samples, std::uint64_t seed,
                                double sample_rate_hz) {
  if (n_classes < 1 || n_repetitions < 1 || n_channels < 1 || n_samples < 1)
    throw Error(ErrorCode::invalid_input, "synthesize_example: all counts must be >= 1");

  struct Bump {
    double amplitude, center, width;
  };
  const double n = static_cast<double>(n_samples);

  TrialDataset d;
  d.name = "synthetic-" + std::to_string(seed);
  d.sample_rate_hz = sample_rate_hz;
  for (std::size_t c = 0; c < n_channels; ++c) d.channel_names.push_back("ch" + std::to_string(c));

  std::mt19937_64 class_rng(seed);
  for (std::size_t k = 0; k < n_classes; ++k) {
    // Per-class template: one positive and one negative bump per channel.
    // |positive| + |negative| <= 1 keeps every sample inside [-1, 1].
    std::vector<std::array<Bump, 2>> pattern(n_channels);
    for (auto& bumps : pattern) {
      bumps[0] = {uniform(class_rng, 0.3, 0.6), uniform(class_rng, 0.15, 0.85) * n,
                  uniform(class_rng, 0.03, 0.12) * n};
      bumps[1] = {-uniform(class_rng, 0.1, 0.35), uniform(class_rng, 0.15, 0.85) * n,
                  uniform(class_rng, 0.03, 0.12) * n};
    }
    for (std::size_t r = 0; r < n_repetitions; ++r) {
      std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (1 + k * n_repetitions + r)));
      Trial t;
      t.class_label = class_name(k);
      t.repetition = static_cast<std::int64_t>(r);
      t.data = Matrix(n_channels, n_samples);
      for (std::size_t c = 0; c < n_channels; ++c) {
        const double gain = uniform(rng, 0.85, 1.0);
        const double shift = uniform(rng, -0.02, 0.02) * n;
        for (std::size_t s = 0; s < n_samples; ++s) {
          double x = 0.0;
          for (const auto& b : pattern[c]) {
            const double z = (static_cast<double>(s) - b.center - shift) / std::max(b.width, 1.0);
            x += gain * b.amplitude * std::exp(-0.5 * z * z);
          }
          x += uniform(rng, -0.02, 0.02);
          t.data(c, s) = std::clamp(x, -1.0, 1.0);
        }
      }
      d.trials.push_back(std::move(t));
    }
  }
  return d;
}

}  // namespace spikelab
