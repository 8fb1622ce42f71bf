#include "depgraph/graph_assembly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "depgraph/call_graph.hpp"

namespace depgraph {

std::string_view to_string(AssemblyMode mode) {
  return mode == AssemblyMode::GraceStyle ? "grace" : "depgraph";
}

std::optional<AssemblyMode> parse_assembly_mode(std::string_view name) {
  if (name == "grace") return AssemblyMode::GraceStyle;
  if (name == "depgraph") return AssemblyMode::DepGraph;
  return std::nullopt;
}

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Method: return "method";
    case NodeRole::Statement: return "statement";
    case NodeRole::Test: return "test";
  }
  return "?";
}

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Code: return "code";
    case EdgeKind::Call: return "call";
    case EdgeKind::Coverage: return "coverage";
  }
  return "?";
}

std::optional<std::size_t> UnifiedGraph::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> UnifiedGraph::method_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].role == NodeRole::Method) out.push_back(i);
  }
  return out;
}

std::size_t UnifiedGraph::count(NodeRole role) const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [&](const auto& n) { return n.role == role; }));
}

std::size_t UnifiedGraph::count(EdgeKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      edges.begin(), edges.end(), [&](const auto& e) { return e.kind == kind; }));
}

UnifiedGraph assemble(const FaultInstance& instance, AssemblyMode mode) {
  const auto failing_list = instance.failing_tests();
  const std::set<std::string> failing(failing_list.begin(), failing_list.end());

  std::unordered_map<std::string, const StatementFact*> stmt;
  for (const auto& s : instance.code.statements) stmt.emplace(s.id, &s);

  // Statements covered by at least one failing test, and their methods.
  std::set<StatementId> kept_stmts;
  for (const auto& c : instance.coverage.covered) {
    if (failing.count(c.test) && stmt.count(c.statement)) kept_stmts.insert(c.statement);
  }
  std::set<MethodId> kept_methods;
  for (const auto& s : kept_stmts) kept_methods.insert(stmt.at(s)->owner);

  if (mode == AssemblyMode::DepGraph) {
    auto cg = build_call_graph(instance.calls);
    auto reach = reachable_from(cg, failing);
    std::erase_if(kept_methods, [&](const auto& m) { return !reach.count(m); });
    std::erase_if(kept_stmts, [&](const auto& s) { return !kept_methods.count(stmt.at(s)->owner); });
  }
  if (kept_methods.empty()) {
    throw Error(ErrorCode::EmptyGraph,
                fmt::format("{}: no failing-test coverage survives {} assembly",
                            instance.fault_id, to_string(mode)));
  }

  std::map<TestId, TestOutcome> kept_tests;
  std::map<TestId, TestOutcome> outcome;
  for (const auto& t : instance.coverage.tests) outcome.emplace(t.id, t.outcome);
  for (const auto& c : instance.coverage.covered) {
    if (kept_stmts.count(c.statement)) kept_tests.emplace(c.test, outcome.at(c.test));
  }

  UnifiedGraph g;
  g.fault_id = instance.fault_id;
  g.mode = mode;
  std::unordered_map<std::string, std::size_t> index;
  auto add_node = [&](GraphNode n) {
    index.emplace(n.id, g.nodes.size());
    g.nodes.push_back(std::move(n));
  };
  for (const auto& m : kept_methods) {
    add_node({NodeRole::Method, m, AstNodeKind::MethodDeclaration, TestOutcome::Pass});
  }
  for (const auto& s : kept_stmts) {
    add_node({NodeRole::Statement, s, stmt.at(s)->kind, TestOutcome::Pass});
  }
  for (const auto& [t, o] : kept_tests) {
    add_node({NodeRole::Test, t, AstNodeKind::MethodDeclaration, o});
  }

  std::set<GraphEdge> edges;
  for (const auto& e : instance.code.edges) {
    auto f = index.find(e.from);
    auto t = index.find(e.to);
    if (f != index.end() && t != index.end()) edges.insert({f->second, t->second, EdgeKind::Code});
  }
  for (const auto& c : instance.coverage.covered) {
    if (!kept_stmts.count(c.statement)) continue;
    const auto t = index.at(c.test);
    edges.insert({index.at(c.statement), t, EdgeKind::Coverage});
    edges.insert({index.at(stmt.at(c.statement)->owner), t, EdgeKind::Coverage});
  }
  if (mode == AssemblyMode::DepGraph) {
    for (const auto& e : instance.calls.edges) {
      if (kept_methods.count(e.caller) && kept_methods.count(e.callee)) {
        edges.insert({index.at(e.caller), index.at(e.callee), EdgeKind::Call});
      }
    }
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

NormalizedAdjacency normalize_adjacency(const UnifiedGraph& graph) {
  const std::size_t n = graph.nodes.size();
  std::vector<std::set<std::size_t>> nbr(n);
  for (std::size_t i = 0; i < n; ++i) nbr[i].insert(i);
  for (const auto& e : graph.edges) {
    nbr[e.from].insert(e.to);
    nbr[e.to].insert(e.from);
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(nbr[i].size()));
  }
  NormalizedAdjacency adj;
  adj.n = n;
  auto& m = adj.matrix;
  m.rows = m.cols = n;
  m.row_ptr.assign(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : nbr[i]) {
      m.col_index.push_back(j);
      m.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    m.row_ptr.push_back(m.col_index.size());
  }
  return adj;
}

ReductionStat reduction_stats(const UnifiedGraph& before, const UnifiedGraph& after) {
  if (before.fault_id != after.fault_id) {
    throw Error(ErrorCode::InconsistentCounts,
                fmt::format("graphs of different instances: {} vs {}", before.fault_id,
                            after.fault_id));
  }
  // Pruning only removes nodes, but DepGraph mode adds Call edges, so the edge
  // count may grow and the edge percentage go negative.
  if (after.nodes.size() > before.nodes.size()) {
    throw Error(ErrorCode::InconsistentCounts,
                fmt::format("{}: {} nodes after pruning exceed {} before", before.fault_id,
                            after.nodes.size(), before.nodes.size()));
  }
  ReductionStat r;
  r.nodes_before = before.nodes.size();
  r.nodes_after = after.nodes.size();
  r.edges_before = before.edges.size();
  r.edges_after = after.edges.size();
  r.pct_nodes = reduction_percentage(static_cast<double>(r.nodes_before),
                                     static_cast<double>(r.nodes_after));
  r.pct_edges = reduction_percentage(static_cast<double>(r.edges_before),
                                     static_cast<double>(r.edges_after));
  return r;
}

UnifiedGraph permute_nodes(const UnifiedGraph& graph, std::span<const std::size_t> order) {
  const std::size_t n = graph.nodes.size();
  if (order.size() != n) throw Error(ErrorCode::ShapeMismatch, "permutation size");
  std::vector<std::size_t> new_index(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (order[i] >= n || new_index[order[i]] != n) {
      throw Error(ErrorCode::InvalidArgument, "not a permutation");
    }
    new_index[order[i]] = i;
  }
  UnifiedGraph out;
  out.fault_id = graph.fault_id;
  out.mode = graph.mode;
  for (auto old : order) {
    out.nodes.push_back(graph.nodes[old]);
    if (!graph.node_attrs.empty()) out.node_attrs.push_back(graph.node_attrs[old]);
  }
  for (const auto& e : graph.edges) {
    out.edges.push_back({new_index[e.from], new_index[e.to], e.kind});
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

std::string graph_to_json(const UnifiedGraph& graph) {
  using json = nlohmann::json;
  json nodes = json::array();
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    json j = {{"index", i}, {"role", to_string(n.role)}, {"id", n.id}};
    if (n.role == NodeRole::Test) {
      j["outcome"] = n.outcome == TestOutcome::Fail ? "fail" : "pass";
    } else {
      j["kind"] = to_string(n.kind);
    }
    if (!graph.node_attrs.empty()) {
      const auto& a = graph.node_attrs[i];
      j["attrs"] = {{"kind_code", a.node_kind_code},
                    {"test_correlation", a.test_correlation},
                    {"change", a.change},
                    {"test_outcome", a.test_outcome}};
    }
    nodes.push_back(std::move(j));
  }
  json edges = json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}});
  }
  json out = {{"fault_id", graph.fault_id},
              {"mode", to_string(graph.mode)},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)}};
  return out.dump(1) + "\n";
}

}  // namespace depgraph
