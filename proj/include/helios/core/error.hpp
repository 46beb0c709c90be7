#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace helios {

/// Failure categories. Each maps onto one CLI exit status (see exit_status()).
enum class ErrorCode {
  dimension,
  numeric,
  parameter,
  degenerate_batch,
  absent_gradient,
  tape,
  empty_dataset,
  encoding,
  integrity,
  split,
  format,
  consistency,
  config,
  usage,
  masking,
  solver,
  calibration,
  no_daylight,
  io,
  divergence,
};

std::string_view to_string(ErrorCode code);

/// Process exit status for a failure of the given kind:
/// 1 usage, 2 config, 3 data integrity, 4 numeric/divergence.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace helios
