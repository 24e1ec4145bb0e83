#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rectidistill {

enum class ErrorCode {
  invalid_input,
  invalid_parameter,
  divergence_infinite,
  oracle_failure,
  invalid_batch,
  rectify_not_applicable,
  invalid_partner,
  degenerate_pair,
  invalid_subset,
  invalid_schedule,
  invalid_architecture,
  training_diverged,
  checkpoint_parse,
  csv_parse,
  invalid_setup,
  config,
  io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace rectidistill
