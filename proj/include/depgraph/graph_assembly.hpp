#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depgraph/ast_graph.hpp"
#include "depgraph/facts.hpp"
#include "depgraph/tensor.hpp"

namespace depgraph {

// GraceStyle keeps everything covered by a failing test; DepGraph further
// drops methods the static call graph cannot reach from a failing test and
// adds call edges between the survivors.
enum class AssemblyMode : std::uint8_t { GraceStyle, DepGraph };

std::string_view to_string(AssemblyMode mode);
std::optional<AssemblyMode> parse_assembly_mode(std::string_view name);

enum class NodeRole : std::uint8_t { Method, Statement, Test };
enum class EdgeKind : std::uint8_t { Code, Call, Coverage };

std::string_view to_string(NodeRole role);
std::string_view to_string(EdgeKind kind);

struct GraphNode {
  NodeRole role = NodeRole::Statement;
  std::string id;
  AstNodeKind kind = AstNodeKind::MethodDeclaration;  // code nodes
  TestOutcome outcome = TestOutcome::Pass;            // test nodes
};

struct GraphEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  EdgeKind kind = EdgeKind::Code;
  auto operator<=>(const GraphEdge&) const = default;
};

// Vocabulary of node kind codes: AST kinds first, then one code for tests.
inline constexpr int kTestKindCode = static_cast<int>(kAstNodeKindCount);
inline constexpr int kNodeKindVocabulary = kTestKindCode + 1;

// Per-node features. Only the fields matching the node's role are non-zero.
struct AttributeVector {
  int node_kind_code = 0;
  double test_correlation = 0.0;           // method nodes
  std::array<double, 4> change{};           // churn_all, churn_recent, mmc_all, mmc_recent
  double test_outcome = 0.0;                // test nodes: Pass = 0, Fail = 1

  bool operator==(const AttributeVector&) const = default;
};

struct UnifiedGraph {
  std::string fault_id;
  AssemblyMode mode = AssemblyMode::DepGraph;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::vector<AttributeVector> node_attrs;  // empty until attributes are attached

  std::optional<std::size_t> index_of(std::string_view id) const;
  std::vector<std::size_t> method_nodes() const;
  std::size_t count(NodeRole role) const;
  std::size_t count(EdgeKind kind) const;
};

// Symmetrically normalized adjacency with self-loops,
// D^-1/2 (A + I) D^-1/2, stored sparse.
struct NormalizedAdjacency {
  std::size_t n = 0;
  SparseMatrix matrix;
};

UnifiedGraph assemble(const FaultInstance& instance, AssemblyMode mode);

NormalizedAdjacency normalize_adjacency(const UnifiedGraph& graph);

// GraceStyle vs DepGraph sizes. Throws InconsistentCounts if `after` has more
// nodes; more edges is allowed (added Call edges) and gives a negative pct_edges.
ReductionStat reduction_stats(const UnifiedGraph& before, const UnifiedGraph& after);

// Reorders nodes so that new index i holds old node order[i]; edges and
// attributes follow.
UnifiedGraph permute_nodes(const UnifiedGraph& graph, std::span<const std::size_t> order);

std::string graph_to_json(const UnifiedGraph& graph);

}  // namespace depgraph
