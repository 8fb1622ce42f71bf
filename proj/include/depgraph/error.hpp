#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace depgraph {

enum class ErrorCode {
  MissingFile,
  SchemaViolation,
  DanglingReference,
  NoFailingTest,
  UnknownMethod,
  InconsistentCounts,
  EmptyGraph,
  EmptyFailingTests,
  UnknownMethodFile,
  MissingChangeFacts,
  ShapeMismatch,
  NonFiniteResult,
  UnattributedNode,
  NoMethodNodes,
  TruthNotInCandidates,
  NonFiniteLoss,
  EmptyRanking,
  InfeasibleConfig,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// True for errors caused by malformed input facts (mapped to CLI exit code 1).
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace depgraph
