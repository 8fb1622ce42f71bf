#include "depgraph/attributes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include <fmt/format.h>

namespace depgraph {

namespace {

enum class CharClass { Lower, Upper, Digit, Other };

CharClass classify(char c) {
  auto u = static_cast<unsigned char>(c);
  if (std::islower(u)) return CharClass::Lower;
  if (std::isupper(u)) return CharClass::Upper;
  if (std::isdigit(u)) return CharClass::Digit;
  return CharClass::Other;
}

std::set<std::string> token_set(std::string_view identifier) {
  auto bag = tokenize(identifier);
  return {bag.begin(), bag.end()};
}

}  // namespace

TokenBag tokenize(std::string_view id) {
  TokenBag out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::exchange(cur, {}));
  };
  for (std::size_t i = 0; i < id.size(); ++i) {
    const auto cls = classify(id[i]);
    if (cls == CharClass::Other) {
      flush();
      continue;
    }
    if (!cur.empty()) {
      const auto prev = classify(id[i - 1]);
      bool boundary = false;
      if (cls == CharClass::Digit) {
        boundary = prev != CharClass::Digit;
      } else if (prev == CharClass::Digit) {
        boundary = true;
      } else if (cls == CharClass::Upper) {
        boundary = prev == CharClass::Lower;
      } else if (prev == CharClass::Upper && cur.size() > 1 &&
                 classify(id[i - 2]) == CharClass::Upper) {
        // "HTMLDoc": the last capital of an acronym starts the next word.
        char last = cur.back();
        cur.pop_back();
        flush();
        cur.push_back(last);
      }
      if (boundary) flush();
    }
    cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(id[i]))));
  }
  flush();
  return out;
}

std::string simple_name(std::string_view id) {
  auto hash = id.find('#');
  std::string_view name = id;
  auto paren = name.find('(');
  if (paren != std::string_view::npos) name = name.substr(0, paren);
  if (hash != std::string_view::npos && hash < name.size()) {
    name = name.substr(hash + 1);
  } else {
    auto dot = name.rfind('.');
    if (dot != std::string_view::npos) name = name.substr(dot + 1);
  }
  return std::string(name);
}

double test_correlation(std::string_view method_name, std::span<const std::string> failing_tests) {
  if (failing_tests.empty()) {
    throw Error(ErrorCode::EmptyFailingTests, std::string(method_name));
  }
  const auto wm = token_set(method_name);
  double best = 0.0;
  for (const auto& test : failing_tests) {
    const auto wt = token_set(test);
    if (wt.empty()) continue;
    std::size_t common = 0;
    for (const auto& tok : wt) common += wm.count(tok);
    best = std::max(best, static_cast<double>(common) / static_cast<double>(wt.size()));
  }
  return best;
}

ChangeMetrics change_metrics(const MethodId& method, const ChangeFacts& changes,
                             std::int64_t faulty_ts, const LineSpan& method_span) {
  auto fit = changes.method_files.find(method);
  if (fit == changes.method_files.end()) throw Error(ErrorCode::UnknownMethodFile, method);
  std::map<std::string, std::int64_t> ts;
  for (const auto& c : changes.commits) ts.emplace(c.id, c.timestamp);

  ChangeMetrics m;
  std::set<std::string> modifying, modifying_recent;
  for (const auto& h : changes.hunks) {
    if (h.file != fit->second || !h.span.intersects(method_span)) continue;
    auto tit = ts.find(h.commit);
    if (tit == ts.end()) throw Error(ErrorCode::DanglingReference, "commit " + h.commit);
    const std::int64_t lines = static_cast<std::int64_t>(h.lines_added) + h.lines_deleted;
    m.churn_all += lines;
    modifying.insert(h.commit);
    if (tit->second >= faulty_ts - kRecentWindowSeconds && tit->second < faulty_ts) {
      m.churn_recent += lines;
      modifying_recent.insert(h.commit);
    }
  }
  m.mmc_all = static_cast<std::int64_t>(modifying.size());
  m.mmc_recent = static_cast<std::int64_t>(modifying_recent.size());
  return m;
}

UnifiedGraph attach_attributes(UnifiedGraph graph, const FaultInstance& instance,
                               const AttributeConfig& config) {
  if (config.code_change && (!instance.changes || !instance.faulty_commit_ts)) {
    throw Error(ErrorCode::MissingChangeFacts,
                instance.fault_id + ": change attributes requested without change facts");
  }
  std::vector<std::string> failing_names;
  for (const auto& t : instance.failing_tests()) failing_names.push_back(simple_name(t));

  std::map<MethodId, LineSpan> spans;
  for (const auto& m : instance.code.methods) spans.emplace(m.id, m.span);

  const std::size_t n = graph.nodes.size();
  graph.node_attrs.assign(n, AttributeVector{});

  std::vector<std::size_t> methods;
  std::vector<std::array<double, 4>> raw;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = graph.nodes[i];
    auto& a = graph.node_attrs[i];
    switch (node.role) {
      case NodeRole::Test:
        a.node_kind_code = kTestKindCode;
        a.test_outcome = node.outcome == TestOutcome::Fail ? 1.0 : 0.0;
        break;
      case NodeRole::Statement:
        a.node_kind_code = static_cast<int>(node.kind);
        break;
      case NodeRole::Method: {
        a.node_kind_code = static_cast<int>(AstNodeKind::MethodDeclaration);
        a.test_correlation = test_correlation(simple_name(node.id), failing_names);
        if (config.code_change) {
          auto cm = change_metrics(node.id, *instance.changes, *instance.faulty_commit_ts,
                                   spans.at(node.id));
          methods.push_back(i);
          raw.push_back({std::log1p(static_cast<double>(cm.churn_all)),
                         std::log1p(static_cast<double>(cm.churn_recent)),
                         std::log1p(static_cast<double>(cm.mmc_all)),
                         std::log1p(static_cast<double>(cm.mmc_recent))});
        }
        break;
      }
    }
  }
  for (std::size_t f = 0; f < 4; ++f) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      lo = k == 0 ? raw[k][f] : std::min(lo, raw[k][f]);
      hi = k == 0 ? raw[k][f] : std::max(hi, raw[k][f]);
    }
    for (std::size_t k = 0; k < raw.size(); ++k) {
      graph.node_attrs[methods[k]].change[f] = hi > lo ? (raw[k][f] - lo) / (hi - lo) : 0.0;
    }
  }
  return graph;
}

}  // namespace depgraph
