#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lsrlab {

enum class ErrorCode {
  // score-core
  WrongSlotCount,
  BadSymbol,
  DanglingContinuation,
  UnknownToken,
  EmptyChord,
  // attributes
  DegenerateValues,
  // ndgrad
  ShapeMismatch,
  NonFinite,
  NotScalarRoot,
  TapeConsumed,
  KeyMismatch,
  BadCheckpoint,
  // models
  IndexOutOfVocab,
  MissingTargets,
  BatchTooSmall,
  ConfigInvalid,
  // eval
  LengthMismatch,
  DegenerateInput,
  EmptySubset,
  ZeroVector,
  // datasets
  Io,
  ParseError,
  EmptyCorpus,
  TooSmall,
  InfeasibleProfile,
  // harness
  TrainingDiverged,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
/// location() is the slot (parse errors) or 1-based line (corpus errors), -1 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, long location = -1)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        location_(location) {}

  ErrorCode code() const noexcept { return code_; }
  long location() const noexcept { return location_; }

 private:
  ErrorCode code_;
  long location_;
};

}  // namespace lsrlab
