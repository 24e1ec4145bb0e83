#include "rectidistill/error.hpp"

namespace rectidistill {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::divergence_infinite: return "divergence-infinite";
    case ErrorCode::oracle_failure: return "oracle-failure";
    case ErrorCode::invalid_batch: return "invalid-batch";
    case ErrorCode::rectify_not_applicable: return "rectify-not-applicable";
    case ErrorCode::invalid_partner: return "invalid-partner";
    case ErrorCode::degenerate_pair: return "degenerate-pair";
    case ErrorCode::invalid_subset: return "invalid-subset";
    case ErrorCode::invalid_schedule: return "invalid-schedule";
    case ErrorCode::invalid_architecture: return "invalid-architecture";
    case ErrorCode::training_diverged: return "training-diverged";
    case ErrorCode::checkpoint_parse: return "checkpoint-parse";
    case ErrorCode::csv_parse: return "csv-parse";
    case ErrorCode::invalid_setup: return "invalid-setup";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace rectidistill
