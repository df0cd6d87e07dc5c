#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperq {

enum class ErrorCode {
  // model
  NonPermutationPreference,
  FractionsNotNormalized,
  NonPositiveRate,
  DimensionMismatch,
  LayerOutOfRange,
  // transitions
  NotUpwardNeighbor,
  StateSpaceTooLarge,
  CacheMismatch,
  // birthdeath
  DegenerateRates,
  UnstableSystem,
  // solvers
  InnerDiverged,
  FixedPointSingular,
  NotConverged,
  WorkerFailure,
  InsufficientSamples,
  NegativeSlope,
  // baseline
  OracleTooLarge,
  SingularSystem,
  // simulator / metrics
  MissingTravelTimes,
  InvalidSpec,
  SaturatedSystem,
  LengthMismatch,
  AllReferenceZero,
  // io
  ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace hyperq
