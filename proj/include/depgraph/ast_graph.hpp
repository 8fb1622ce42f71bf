#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "depgraph/facts.hpp"

namespace depgraph {

// Statement-level graph of a single method: the method declaration is the
// root, statements hang off it through Child edges, and Sequence edges link
// consecutive siblings. Token-level AST nodes never appear here.
struct MethodGraph {
  MethodId root;
  std::vector<std::pair<StatementId, AstNodeKind>> nodes;  // sorted by id
  std::vector<CodeEdge> edges;                              // sorted

  std::size_t node_count() const { return nodes.size() + 1; }
  std::size_t edge_count() const { return edges.size(); }
};

MethodGraph build_method_graph(const CodeFacts& code, const MethodId& method);

// Size of a graph before and after pruning, with the percentage removed.
struct ReductionStat {
  std::size_t nodes_before = 0;
  std::size_t nodes_after = 0;
  std::size_t edges_before = 0;
  std::size_t edges_after = 0;
  double pct_nodes = 0.0;
  double pct_edges = 0.0;
};

// (before - after) / before * 100, rounded to two decimals; 0 when before is 0.
double reduction_percentage(double before, double after);

ReductionStat make_reduction_stat(std::size_t nodes_before, std::size_t nodes_after,
                                  std::size_t edges_before, std::size_t edges_after);

// Compares externally supplied token-level graph sizes with a pruned method
// graph.
ReductionStat count_token_savings(std::pair<std::size_t, std::size_t> token_graph_size,
                                  const MethodGraph& pruned);

}  // namespace depgraph
