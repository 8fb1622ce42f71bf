#include "depgraph/error.hpp"

namespace depgraph {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::NoFailingTest: return "NoFailingTest";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
    case ErrorCode::InconsistentCounts: return "InconsistentCounts";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::EmptyFailingTests: return "EmptyFailingTests";
    case ErrorCode::UnknownMethodFile: return "UnknownMethodFile";
    case ErrorCode::MissingChangeFacts: return "MissingChangeFacts";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteResult: return "NonFiniteResult";
    case ErrorCode::UnattributedNode: return "UnattributedNode";
    case ErrorCode::NoMethodNodes: return "NoMethodNodes";
    case ErrorCode::TruthNotInCandidates: return "TruthNotInCandidates";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyRanking: return "EmptyRanking";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile:
    case ErrorCode::SchemaViolation:
    case ErrorCode::DanglingReference:
    case ErrorCode::NoFailingTest:
      return true;
    default:
      return false;
  }
}

}  // namespace depgraph
