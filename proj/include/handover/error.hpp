#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace handover {

enum class ErrorCode {
  GazeParallel,
  GazeAway,
  NonMonotonicTime,
  InvalidRotation,
  TargetOutOfGrid,
  DimensionMismatch,
  ShapeMismatch,
  GridMismatch,
  EmptyDataset,
  NonFiniteLoss,
  GoalOutOfWorkspace,
  GoalInsideZone,
  NoProgress,
  ObjectOutOfWorkspace,
  TrialTimeout,
  TooFewSamples,
  IoFailure,
  ParseError,
  InvalidConfig,
  ModelUnavailable,
  UnknownSession,
  MalformedMessage,
};

std::string_view to_string(ErrorCode code);

/// Every library failure is reported through this type; `code()` identifies
/// the contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace handover
