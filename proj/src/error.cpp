#include "hyperq/error.hpp"

namespace hyperq {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPermutationPreference: return "NonPermutationPreference";
    case ErrorCode::FractionsNotNormalized: return "FractionsNotNormalized";
    case ErrorCode::NonPositiveRate: return "NonPositiveRate";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LayerOutOfRange: return "LayerOutOfRange";
    case ErrorCode::NotUpwardNeighbor: return "NotUpwardNeighbor";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::CacheMismatch: return "CacheMismatch";
    case ErrorCode::DegenerateRates: return "DegenerateRates";
    case ErrorCode::UnstableSystem: return "UnstableSystem";
    case ErrorCode::InnerDiverged: return "InnerDiverged";
    case ErrorCode::FixedPointSingular: return "FixedPointSingular";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::WorkerFailure: return "WorkerFailure";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NegativeSlope: return "NegativeSlope";
    case ErrorCode::OracleTooLarge: return "OracleTooLarge";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::MissingTravelTimes: return "MissingTravelTimes";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::SaturatedSystem: return "SaturatedSystem";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllReferenceZero: return "AllReferenceZero";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace hyperq
