#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lorentz_ci {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveHeight,
  DegenerateTangentPlane,
  GridMismatch,
  NotPositiveDefinite,
  DefectOutsideCone,
  NotSpacelike,
  MetricNotRiemannian,
  TargetBelowOne,
  IntermediateMetricNotRiemannian,
  CorrugationBudgetExceeded,
  SolverDiverged,
  NoAdmissibleDelta,
  SearchFailed,
  RelatorNotSatisfied,
  DegenerateInput,
  AlphaNotAboveOne,
  NotSpacelikeGraph,
  RayMissesHull,
  FundamentalDomainNotCovered,
  ConfigError,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveHeight: return "NonPositiveHeight";
    case ErrorCode::DegenerateTangentPlane: return "DegenerateTangentPlane";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DefectOutsideCone: return "DefectOutsideCone";
    case ErrorCode::NotSpacelike: return "NotSpacelike";
    case ErrorCode::MetricNotRiemannian: return "MetricNotRiemannian";
    case ErrorCode::TargetBelowOne: return "TargetBelowOne";
    case ErrorCode::IntermediateMetricNotRiemannian: return "IntermediateMetricNotRiemannian";
    case ErrorCode::CorrugationBudgetExceeded: return "CorrugationBudgetExceeded";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::NoAdmissibleDelta: return "NoAdmissibleDelta";
    case ErrorCode::SearchFailed: return "SearchFailed";
    case ErrorCode::RelatorNotSatisfied: return "RelatorNotSatisfied";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::AlphaNotAboveOne: return "AlphaNotAboveOne";
    case ErrorCode::NotSpacelikeGraph: return "NotSpacelikeGraph";
    case ErrorCode::RayMissesHull: return "RayMissesHull";
    case ErrorCode::FundamentalDomainNotCovered: return "FundamentalDomainNotCovered";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this exception; `code()`
/// is stable and machine-readable, `what()` carries the human context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lorentz_ci
