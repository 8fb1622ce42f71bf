#pragma once

// Desk-scale fault corpora with known ground truth. The generator records
// which covered methods the static call graph can reach from the failing
// tests and how large each assembly mode's graph must be, so pruning and
// reduction accounting can be checked against construction-time bookkeeping.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "depgraph/facts.hpp"

namespace depgraph {

enum class Difficulty : std::uint8_t { Easy, Medium, Hard };

std::string_view to_string(Difficulty d);
std::optional<Difficulty> parse_difficulty(std::string_view name);

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t n_methods = 20;
  std::size_t min_statements = 2;
  std::size_t max_statements = 6;
  std::size_t n_tests = 12;
  double fail_fraction = 0.25;
  // Share of the non-faulty methods covered by failing tests that no call
  // path from a failing test reaches.
  double unreachable_covered_fraction = 0.25;
  Difficulty difficulty = Difficulty::Easy;
  // Commits per method over the simulated history; 0 omits change facts.
  double change_density = 1.0;
  bool faulty_churn_boost = true;
  std::size_t n_faulty = 1;
  std::string project = "p0";
  std::string fault_id = "p0-f000";
};

// Defaults for a difficulty level.
GeneratorConfig preset(Difficulty difficulty, std::uint64_t seed = 1);

struct GeneratorTruth {
  std::set<MethodId> covered_methods;              // covered by >= 1 failing test
  std::set<MethodId> reachable_covered_methods;    // ... and statically reachable
  std::set<MethodId> unreachable_covered_methods;  // ... and not reachable
  std::set<MethodId> reachable_methods;            // every method reachable from failing tests
  std::size_t grace_nodes = 0, grace_edges = 0;
  std::size_t depgraph_nodes = 0, depgraph_edges = 0;
};

struct GeneratedInstance {
  FaultInstance instance;
  GeneratorTruth truth;
};

GeneratedInstance generate_instance(const GeneratorConfig& config);

// Projects "p0".."p{n-1}", each with `n_instances` faults whose seeds are
// derived from config.seed, the project index and the instance index.
std::map<std::string, std::vector<GeneratedInstance>> generate_corpus(const GeneratorConfig& config,
                                                                      std::size_t n_instances,
                                                                      std::size_t n_projects);

std::map<std::string, std::vector<FaultInstance>> instances_of(
    const std::map<std::string, std::vector<GeneratedInstance>>& corpus);

}  // namespace depgraph
