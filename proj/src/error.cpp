#include "handover/error.hpp"

#include <omp.h>

#include "handover/parallel.hpp"

namespace handover {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::GazeParallel: return "GazeParallel";
    case ErrorCode::GazeAway: return "GazeAway";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::TargetOutOfGrid: return "TargetOutOfGrid";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::GoalOutOfWorkspace: return "GoalOutOfWorkspace";
    case ErrorCode::GoalInsideZone: return "GoalInsideZone";
    case ErrorCode::NoProgress: return "NoProgress";
    case ErrorCode::ObjectOutOfWorkspace: return "ObjectOutOfWorkspace";
    case ErrorCode::TrialTimeout: return "TrialTimeout";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ModelUnavailable: return "ModelUnavailable";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
  }
  return "Unknown";
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace handover
