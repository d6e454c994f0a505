#include "spikelab/error.hpp"

namespace spikelab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::invalid_parameter: return "invalid_parameter";
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::numerical_divergence: return "numerical_divergence";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::malformed_file: return "malformed_file";
    case ErrorCode::duplicate_trial_key: return "duplicate_trial_key";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::file_too_large: return "file_too_large";
    case ErrorCode::precondition_failed: return "precondition_failed";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::cancelled: return "cancelled";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, std::string message, std::string field)
    : std::runtime_error(std::move(message)), code_(code), field_(std::move(field)) {}

DivergenceError::DivergenceError(std::size_t step, std::string variable, std::size_t channel)
    : Error(ErrorCode::numerical_divergence,
            "non-finite value in '" + variable + "' at step " + std::to_string(step) +
                " (channel " + std::to_string(channel) + ")",
            variable),
      step_(step),
      channel_(channel) {}

}  // namespace spikelab
