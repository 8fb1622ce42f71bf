#include "depgraph/sbfl.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace depgraph {

double ochiai(const SpectrumCounts& c) {
  const double denom = std::sqrt(static_cast<double>(c.a_ef + c.a_nf) *
                                 static_cast<double>(c.a_ef + c.a_ep));
  if (denom == 0.0) return 0.0;
  return static_cast<double>(c.a_ef) / denom;
}

std::optional<Aggregation> parse_aggregation(std::string_view name) {
  if (name == "max") return Aggregation::Max;
  if (name == "mean") return Aggregation::Mean;
  if (name == "sum") return Aggregation::Sum;
  return std::nullopt;
}

std::vector<std::pair<StatementId, SpectrumCounts>> statement_spectra(
    const FaultInstance& instance) {
  std::map<TestId, TestOutcome> outcome;
  for (const auto& t : instance.coverage.tests) outcome.emplace(t.id, t.outcome);
  std::uint64_t total_fail = 0, total_pass = 0;
  for (const auto& [_, o] : outcome) (o == TestOutcome::Fail ? total_fail : total_pass)++;

  std::map<StatementId, std::set<TestId>> covering;
  for (const auto& s : instance.code.statements) covering[s.id];
  for (const auto& c : instance.coverage.covered) covering[c.statement].insert(c.test);

  std::vector<std::pair<StatementId, SpectrumCounts>> out;
  for (const auto& [sid, tests] : covering) {
    SpectrumCounts c;
    for (const auto& t : tests) {
      (outcome.at(t) == TestOutcome::Fail ? c.a_ef : c.a_ep)++;
    }
    c.a_nf = total_fail - c.a_ef;
    c.a_np = total_pass - c.a_ep;
    out.emplace_back(sid, c);
  }
  return out;
}

std::vector<ScoredMethod> rank_methods_ochiai(const FaultInstance& instance,
                                              Aggregation aggregation) {
  std::map<StatementId, MethodId> owner;
  for (const auto& s : instance.code.statements) owner.emplace(s.id, s.owner);
  std::map<MethodId, std::vector<double>> per_method;
  for (const auto& m : instance.code.methods) per_method[m.id];
  for (const auto& [sid, counts] : statement_spectra(instance)) {
    per_method[owner.at(sid)].push_back(ochiai(counts));
  }

  std::vector<ScoredMethod> out;
  for (const auto& [mid, scores] : per_method) {
    double s = 0.0;
    if (!scores.empty()) {
      switch (aggregation) {
        case Aggregation::Max:
          s = *std::max_element(scores.begin(), scores.end());
          break;
        case Aggregation::Sum:
          for (double v : scores) s += v;
          break;
        case Aggregation::Mean:
          for (double v : scores) s += v;
          s /= static_cast<double>(scores.size());
          break;
      }
    }
    out.push_back({mid, s});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

}  // namespace depgraph
