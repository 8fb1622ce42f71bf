#include "depgraph/ast_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

namespace depgraph {

MethodGraph build_method_graph(const CodeFacts& code, const MethodId& method) {
  auto mit = std::find_if(code.methods.begin(), code.methods.end(),
                          [&](const auto& m) { return m.id == method; });
  if (mit == code.methods.end()) throw Error(ErrorCode::UnknownMethod, method);

  MethodGraph g;
  g.root = method;
  std::set<std::string> members{method};
  for (const auto& s : code.statements) {
    if (s.owner == method) {
      g.nodes.emplace_back(s.id, s.kind);
      members.insert(s.id);
    }
  }
  std::sort(g.nodes.begin(), g.nodes.end());

  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& e : code.edges) {
    bool from_in = members.count(e.from) > 0;
    bool to_in = members.count(e.to) > 0;
    if (from_in != to_in) {
      throw Error(ErrorCode::SchemaViolation,
                  fmt::format("code edge {} -> {} leaves method {}", e.from, e.to, method));
    }
    if (!from_in) continue;
    if (e.to == method) {
      throw Error(ErrorCode::SchemaViolation, "incoming edge to method root " + method);
    }
    g.edges.push_back(e);
    succ[e.from].push_back(e.to);
  }
  std::sort(g.edges.begin(), g.edges.end());

  // Every statement must hang off the root.
  std::set<std::string> seen{method};
  std::vector<std::string> stack{method};
  while (!stack.empty()) {
    auto node = std::move(stack.back());
    stack.pop_back();
    for (const auto& next : succ[node]) {
      if (seen.insert(next).second) stack.push_back(next);
    }
  }
  for (const auto& [sid, _] : g.nodes) {
    if (!seen.count(sid)) {
      throw Error(ErrorCode::SchemaViolation,
                  fmt::format("statement {} is not reachable from root {}", sid, method));
    }
  }
  return g;
}

double reduction_percentage(double before, double after) {
  if (before <= 0.0) return 0.0;
  return std::round((before - after) / before * 100.0 * 100.0) / 100.0;
}

ReductionStat make_reduction_stat(std::size_t nodes_before, std::size_t nodes_after,
                                  std::size_t edges_before, std::size_t edges_after) {
  if (nodes_after > nodes_before || edges_after > edges_before) {
    throw Error(ErrorCode::InconsistentCounts,
                fmt::format("after ({}, {}) exceeds before ({}, {})", nodes_after, edges_after,
                            nodes_before, edges_before));
  }
  ReductionStat r;
  r.nodes_before = nodes_before;
  r.nodes_after = nodes_after;
  r.edges_before = edges_before;
  r.edges_after = edges_after;
  r.pct_nodes = reduction_percentage(static_cast<double>(nodes_before),
                                     static_cast<double>(nodes_after));
  r.pct_edges = reduction_percentage(static_cast<double>(edges_before),
                                     static_cast<double>(edges_after));
  return r;
}

ReductionStat count_token_savings(std::pair<std::size_t, std::size_t> token_graph_size,
                                  const MethodGraph& pruned) {
  return make_reduction_stat(token_graph_size.first, pruned.node_count(),
                             token_graph_size.second, pruned.edge_count());
}

}  // namespace depgraph
