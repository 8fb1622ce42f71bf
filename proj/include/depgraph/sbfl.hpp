#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "depgraph/facts.hpp"

namespace depgraph {

struct SpectrumCounts {
  std::uint64_t a_ef = 0;  // failing tests executing the statement
  std::uint64_t a_nf = 0;  // failing tests not executing it
  std::uint64_t a_ep = 0;  // passing tests executing it
  std::uint64_t a_np = 0;  // passing tests not executing it
};

// a_ef / sqrt((a_ef + a_nf)(a_ef + a_ep)); 0 when the denominator is 0.
double ochiai(const SpectrumCounts& c);

enum class Aggregation : std::uint8_t { Max, Mean, Sum };

std::optional<Aggregation> parse_aggregation(std::string_view name);

struct ScoredMethod {
  MethodId id;
  double score = 0.0;
};

// Per-statement spectra of every statement in the instance, keyed by id.
std::vector<std::pair<StatementId, SpectrumCounts>> statement_spectra(const FaultInstance& instance);

// Every method of the instance, scored from its statements and sorted by
// descending score with ties in id order. Methods without statements score 0.
std::vector<ScoredMethod> rank_methods_ochiai(const FaultInstance& instance,
                                              Aggregation aggregation = Aggregation::Max);

}  // namespace depgraph
