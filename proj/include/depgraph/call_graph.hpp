#pragma once

#include <map>
#include <set>
#include <string>

#include "depgraph/facts.hpp"

namespace depgraph {

// Static caller -> callee relation. Keys cover every corpus method plus any
// test ids that appear as callers of test-entry edges.
struct CallGraph {
  std::map<std::string, std::set<MethodId>> adjacency;

  const std::set<MethodId>& callees(const std::string& caller) const;
};

CallGraph build_call_graph(const CallFacts& calls, const std::set<MethodId>& methods = {});

// Every node reachable from `roots` along call edges, roots included.
std::set<std::string> reachable_from(const CallGraph& graph, const std::set<std::string>& roots);

}  // namespace depgraph
