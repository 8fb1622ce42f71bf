#pragma once

// In-memory records for the fact files a frontend exports per fault:
// code.jsonl, calls.jsonl, coverage.jsonl, changes.jsonl and labels.json.

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depgraph/error.hpp"

namespace depgraph {

using MethodId = std::string;
using StatementId = std::string;
using TestId = std::string;

// Statement-level node taxonomy. MethodDeclaration is reserved for method
// roots; the remaining thirteen kinds are the only statement kinds accepted.
enum class AstNodeKind : std::uint8_t {
  MethodDeclaration = 0,
  IfStatement,
  ReturnStatement,
  ForStatement,
  WhileStatement,
  DoStatement,
  SwitchStatement,
  TryStatement,
  ThrowStatement,
  AssertStatement,
  BreakStatement,
  ContinueStatement,
  LocalVariableDeclaration,
  ExpressionStatement,
};

inline constexpr int kNodeTaxonomyVersion = 1;
inline constexpr std::size_t kStatementKindCount = 13;
inline constexpr std::size_t kAstNodeKindCount = kStatementKindCount + 1;

const std::array<AstNodeKind, kStatementKindCount>& statement_kinds();
std::string_view to_string(AstNodeKind kind);
std::optional<AstNodeKind> parse_ast_node_kind(std::string_view name);

struct LineSpan {
  int start = 1;
  int end = 1;

  bool valid() const { return start >= 1 && start <= end; }
  // Closed-interval overlap.
  bool intersects(const LineSpan& other) const {
    return start <= other.end && other.start <= end;
  }
  auto operator<=>(const LineSpan&) const = default;
};

struct MethodFact {
  MethodId id;
  LineSpan span;
  auto operator<=>(const MethodFact&) const = default;
};

struct StatementFact {
  StatementId id;
  MethodId owner;
  AstNodeKind kind = AstNodeKind::ExpressionStatement;
  LineSpan span;
  auto operator<=>(const StatementFact&) const = default;
};

// Child edges carry the AST hierarchy (parent -> child); Sequence edges link
// consecutive siblings (earlier -> later).
enum class CodeEdgeKind : std::uint8_t { Child = 0, Sequence = 1 };

struct CodeEdge {
  std::string from;
  std::string to;
  CodeEdgeKind kind = CodeEdgeKind::Child;
  auto operator<=>(const CodeEdge&) const = default;
};

struct CodeFacts {
  std::vector<MethodFact> methods;
  std::vector<StatementFact> statements;
  std::vector<CodeEdge> edges;
};

struct CallEdge {
  std::string caller;  // a MethodId, or a TestId for test-entry edges
  MethodId callee;
  auto operator<=>(const CallEdge&) const = default;
};

struct CallFacts {
  std::vector<CallEdge> edges;
};

enum class TestOutcome : std::uint8_t { Pass = 0, Fail = 1 };

struct TestFact {
  TestId id;
  TestOutcome outcome = TestOutcome::Pass;
  auto operator<=>(const TestFact&) const = default;
};

struct CoveragePair {
  TestId test;
  StatementId statement;
  auto operator<=>(const CoveragePair&) const = default;
};

struct CoverageFacts {
  std::vector<TestFact> tests;
  std::vector<CoveragePair> covered;
};

struct Commit {
  std::string id;
  std::int64_t timestamp = 0;  // seconds since epoch
  auto operator<=>(const Commit&) const = default;
};

struct Hunk {
  std::string commit;
  std::string file;
  LineSpan span;
  int lines_added = 0;
  int lines_deleted = 0;
  auto operator<=>(const Hunk&) const = default;
};

struct ChangeFacts {
  std::vector<Commit> commits;
  std::vector<Hunk> hunks;
  std::map<MethodId, std::string> method_files;
};

struct FaultInstance {
  std::string fault_id;
  CodeFacts code;
  CallFacts calls;
  CoverageFacts coverage;
  std::optional<ChangeFacts> changes;
  std::vector<MethodId> ground_truth;  // sorted, unique
  std::optional<std::int64_t> faulty_commit_ts;

  std::vector<TestId> failing_tests() const;
};

struct Violation {
  std::string fault_id;
  ErrorCode code = ErrorCode::SchemaViolation;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool empty() const { return violations.empty(); }
};

// Sorts every record set and collapses exact duplicates. Conflicting records
// (same id, different payload) are kept so validation can report them.
void canonicalize(FaultInstance& instance);

// All invariant violations of one instance, in a deterministic order.
std::vector<Violation> check_instance(const FaultInstance& instance);

ValidationReport validate_corpus(std::span<const FaultInstance> instances);

// Loads the fact files under `dir`; the fault id is the directory name.
// Throws Error with the code of the first violation found.
FaultInstance load_fault_instance(const std::filesystem::path& dir);

// Canonical serialization: sorted records, sorted keys, one JSON object per
// line. Loading the written files reproduces an identical instance.
struct SerializedInstance {
  std::string code;
  std::string calls;
  std::string coverage;
  std::optional<std::string> changes;
  std::string labels;
};

SerializedInstance serialize(const FaultInstance& instance);
void write_fault_instance(const FaultInstance& instance,
                          const std::filesystem::path& dir);

// A path may be an instance directory (contains code.jsonl), a project
// directory of instances, or a corpus root of project directories.
// Returns project name -> instances sorted by fault id.
std::map<std::string, std::vector<FaultInstance>> load_corpus(
    const std::filesystem::path& root);

struct InstanceLocation {
  std::string project;
  std::filesystem::path dir;
};

// Instance directories under `root` using the same layout rules, sorted.
std::vector<InstanceLocation> discover_instances(const std::filesystem::path& root);

}  // namespace depgraph
