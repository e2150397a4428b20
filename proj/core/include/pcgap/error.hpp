#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pcgap {

/// Failure categories raised by the library. Every throwing operation raises
/// `pcgap::Error` tagged with one of these.
enum class ErrorCode {
  kStabilityViolation,
  kInvalidNoise,
  kInvalidArgument,
  kConvergenceFailure,
  kDegenerateVariance,
  kNoConvergence,
  kNotPSD,
  kNoSignChange,
  kDivergedLoss,
  kHiddenStateOverflow,
  kAllDegenerate,
  kTrajectoryBlowup,
  kZeroVariance,
  kTaskFailed,
  kInvalidCount,
  kDegenerateTable,
  kEmptyInput,
  kEmptyGrid,
  kCorruptRecords,
  kInvalidConfig,
  kIoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pcgap
