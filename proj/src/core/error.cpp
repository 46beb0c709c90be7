#include "helios/core/error.hpp"

namespace helios {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::degenerate_batch: return "degenerate_batch";
    case ErrorCode::absent_gradient: return "absent_gradient";
    case ErrorCode::tape: return "tape";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::encoding: return "encoding";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::split: return "split";
    case ErrorCode::format: return "format";
    case ErrorCode::consistency: return "consistency";
    case ErrorCode::config: return "config";
    case ErrorCode::usage: return "usage";
    case ErrorCode::masking: return "masking";
    case ErrorCode::solver: return "solver";
    case ErrorCode::calibration: return "calibration";
    case ErrorCode::no_daylight: return "no_daylight";
    case ErrorCode::io: return "io";
    case ErrorCode::divergence: return "divergence";
  }
  return "unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::usage:
      return 1;
    case ErrorCode::config:
    case ErrorCode::parameter:
    case ErrorCode::dimension:
    case ErrorCode::masking:
      return 2;
    case ErrorCode::empty_dataset:
    case ErrorCode::encoding:
    case ErrorCode::integrity:
    case ErrorCode::split:
    case ErrorCode::format:
    case ErrorCode::consistency:
    case ErrorCode::no_daylight:
    case ErrorCode::io:
      return 3;
    default:
      return 4;
  }
}

}  // namespace helios
