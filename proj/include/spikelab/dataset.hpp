#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spikelab/matrix.hpp"

namespace spikelab {

struct Trial {
  std::optional<std::string> class_label;
  std::optional<std::int64_t> repetition;
  Matrix data;  // channel x time

  bool operator==(const Trial&) const = default;
};

/// On disk this is a single JSON document:
///
///   {"name": str, "sample_rate_hz": num, "channel_names": [str, ...],
///    "trials": [{"class": str?, "repetition": int?, "data": [[num, ...], ...]}]}
///
/// `data` is channel-major: one inner array per channel. "class" and
/// "repetition" are optional per trial.
struct TrialDataset {
  std::string name;
  double sample_rate_hz = 1.0;
  std::vector<std::string> channel_names;
  std::vector<Trial> trials;

  std::vector<std::string> class_labels() const;
  std::vector<std::int64_t> repetitions(const std::optional<std::string>& class_label) const;
  bool has_class_metadata() const;
  bool has_repetition_metadata() const;

  /// Throws ShapeMismatch, DuplicateTrialKey or InvalidInput.
  void validate() const;

  bool operator==(const TrialDataset&) const = default;
};

struct LoadOptions {
  std::uint64_t max_bytes = 512ull * 1024 * 1024;
};

TrialDataset load(const std::filesystem::path& path, const LoadOptions& options = {});
/// `source` is used in error messages only.
TrialDataset parse_dataset(std::string_view text, std::string_view source = "<memory>");
TrialDataset dataset_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const TrialDataset& dataset);
std::string serialize(const TrialDataset& dataset);
void save(const TrialDataset& dataset, const std::filesystem::path& path);

/// Class/repetition summary for the selection controls.
nlohmann::json metadata_json(const TrialDataset& dataset);

/// Unique trial with exactly these keys. NotFound lists the valid keys at the
/// level that failed to match.
const Trial& select(const TrialDataset& dataset, const std::optional<std::string>& class_label,
                    const std::optional<std::int64_t>& repetition);

/// Seed-reproducible dataset of smooth per-class bump patterns with signed
/// excursions; every sample lies in [-1, 1].
TrialDataset synthesize_example(std::size_t n_classes, std::size_t n_repetitions,
                                std::size_t n_channels, std::size_t n_samples, std::uint64_t seed,
                                double sample_rate_hz = 100.0);

}  // namespace spikelab
