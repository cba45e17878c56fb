#pragma once

#include <stdexcept>
#include <string>

namespace qsdse {

enum class ErrorCode {
  MissingImplementations,
  FusionTargetMismatch,
  UnknownImpl,
  ForbiddenConfiguration,
  IncompleteConfiguration,
  InvalidCostTable,
  NotAChain,
  NoFeasiblePath,
  SpaceTooLarge,
  TooFewEpisodes,
  UnknownState,
  EmptyRow,
  EmptyInput,
  UnknownConfiguration,
  MissingReferenceImpl,
  NonFoldablePlacement,
  DegenerateRange,
  EmptyHistogram,
  NoRunsAfterWarmup,
  ConflictingDuplicates,
  UnknownPreset,
  Io,
};

/// Single exception type for the whole library; the code carries the kind.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

} // namespace qsdse
