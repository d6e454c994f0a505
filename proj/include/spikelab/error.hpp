#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spikelab {

enum class ErrorCode {
  not_found,
  invalid_parameter,
  invalid_input,
  numerical_divergence,
  empty_dataset,
  malformed_file,
  duplicate_trial_key,
  shape_mismatch,
  file_too_large,
  precondition_failed,
  conflict,
  cancelled,
  io_error,
};

std::string_view to_string(ErrorCode code);

/// Base for every error raised by the library. `field()` names the offending
/// parameter, key path or identifier when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

/// A state variable became NaN or infinite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, std::string variable, std::size_t channel = 0);

  std::size_t step() const noexcept { return step_; }
  const std::string& variable() const noexcept { return field(); }
  std::size_t channel() const noexcept { return channel_; }

 private:
  std::size_t step_;
  std::size_t channel_;
};

}  // namespace spikelab
