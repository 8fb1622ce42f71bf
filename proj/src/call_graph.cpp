#include "depgraph/call_graph.hpp"

#include <deque>

namespace depgraph {

const std::set<MethodId>& CallGraph::callees(const std::string& caller) const {
  static const std::set<MethodId> kNone;
  auto it = adjacency.find(caller);
  return it == adjacency.end() ? kNone : it->second;
}

CallGraph build_call_graph(const CallFacts& calls, const std::set<MethodId>& methods) {
  CallGraph g;
  for (const auto& m : methods) g.adjacency[m];
  for (const auto& e : calls.edges) {
    g.adjacency[e.caller].insert(e.callee);
    g.adjacency[e.callee];
  }
  return g;
}

std::set<std::string> reachable_from(const CallGraph& graph, const std::set<std::string>& roots) {
  std::set<std::string> seen(roots.begin(), roots.end());
  std::deque<std::string> queue(roots.begin(), roots.end());
  while (!queue.empty()) {
    auto node = std::move(queue.front());
    queue.pop_front();
    for (const auto& callee : graph.callees(node)) {
      if (seen.insert(callee).second) queue.push_back(callee);
    }
  }
  return seen;
}

}  // namespace depgraph
