#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hetplan {

enum class ErrorCode {
  kInvalidInput,
  kParseError,
  kEmptyWindow,
  kNoPath,
  kInfeasibleConfig,
  kNoFeasibleConfig,
  kTooManyStages,
  kInfeasiblePartition,
  kInfeasible,
  kInvalidPlan,
  kInsufficientMemory,
  kNoSurvivingPhasePair,
};

std::string_view error_code_name(ErrorCode code);

// All planner failures surface as this exception; `code()` is what callers
// branch on (the CLI maps codes to exit statuses).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hetplan
