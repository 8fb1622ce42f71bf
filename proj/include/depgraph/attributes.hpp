#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depgraph/facts.hpp"
#include "depgraph/graph_assembly.hpp"

namespace depgraph {

// Lower-case word fragments of an identifier, split at camel-case
// boundaries, digit runs and non-alphanumerics. Kept in order, with repeats.
using TokenBag = std::vector<std::string>;

TokenBag tokenize(std::string_view identifier);

// Bare method or test name from an id such as "pkg.Cls#testFoo(int)".
std::string simple_name(std::string_view id);

// max over failing tests of |tokens(method) & tokens(test)| / |tokens(test)|,
// with set semantics on both bags.
double test_correlation(std::string_view method_name, std::span<const std::string> failing_tests);

inline constexpr std::int64_t kRecentWindowSeconds = 15'778'800;  // 182.625 days

struct ChangeMetrics {
  std::int64_t churn_all = 0;
  std::int64_t churn_recent = 0;
  std::int64_t mmc_all = 0;
  std::int64_t mmc_recent = 0;

  bool operator==(const ChangeMetrics&) const = default;
};

ChangeMetrics change_metrics(const MethodId& method, const ChangeFacts& changes,
                             std::int64_t faulty_ts, const LineSpan& method_span);

struct AttributeConfig {
  bool code_change = true;
};

// Fills node_attrs for every node of `graph`. Change metrics are log1p-scaled
// and then min-max normalized over the graph's method nodes.
UnifiedGraph attach_attributes(UnifiedGraph graph, const FaultInstance& instance,
                               const AttributeConfig& config);

}  // namespace depgraph
