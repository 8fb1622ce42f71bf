#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depgraph/ggnn.hpp"
#include "depgraph/sbfl.hpp"

namespace depgraph {

inline constexpr std::array<std::size_t, 4> kTopN = {1, 3, 5, 10};

struct RankScore {
  double first_rank = 0.0;
  double avg_rank = 0.0;
  std::array<bool, 4> hit{};  // first_rank <= 1, 3, 5, 10
  bool miss = false;          // some faulty method is absent from the ranking
};

// 1-based ranks. Faulty methods missing from `ranked` get rank |ranked| + 1.
RankScore score_ranking(std::span<const MethodId> ranked, std::span<const MethodId> truth);

// A way of producing a ranked list for one fault: either a GGNN trained
// with `setup`, or the Ochiai baseline.
struct Technique {
  std::string name;
  bool learned = true;
  TrainingSetup setup;
  Aggregation aggregation = Aggregation::Max;
};

Technique depgraph_technique(bool code_change = true);
Technique grace_technique(bool code_change = false);
Technique ochiai_technique(Aggregation aggregation = Aggregation::Max);

// "depgraph", "depgraph-nocc", "grace", "ochiai".
std::optional<Technique> parse_technique(std::string_view name);

struct MetricRow {
  std::string project;
  std::string technique;
  std::size_t instances = 0;
  double top1 = 0, top3 = 0, top5 = 0, top10 = 0;
  double mfr = 0, mar = 0;
  double misses = 0;
};

struct InstanceOutcome {
  std::string project;
  std::string technique;
  std::string fault_id;
  RankScore score;
};

struct EvaluationReport {
  std::vector<MetricRow> rows;  // per (project, technique), then one "Total" row per technique
  std::vector<InstanceOutcome> outcomes;

  const MetricRow* find(std::string_view project, std::string_view technique) const;
  std::string to_csv() const;
};

struct EvalOptions {
  std::size_t jobs = 1;
  TrainConfig train;  // overrides each learned technique's training hyperparameters
};

// Per project: for each fault, train on the project's other faults and rank
// the held-out one.
EvaluationReport leave_one_out(const std::map<std::string, std::vector<FaultInstance>>& corpus,
                               std::span<const Technique> techniques, const EvalOptions& options);

EvaluationReport leave_one_out(std::span<const FaultInstance> corpus,
                               std::span<const Technique> techniques, const EvalOptions& options,
                               const std::string& project = "project");

// Per target project: one model per other project, each evaluated on the
// target; the row holds the mean of every metric over those models.
EvaluationReport cross_project(const std::map<std::string, std::vector<FaultInstance>>& corpora,
                               std::span<const Technique> techniques, const EvalOptions& options);

// Ranked method ids for one instance with already-trained parameters.
std::vector<MethodId> rank_with_model(const FaultInstance& instance, const GgnnParameters& params,
                                      const TrainingSetup& setup);

}  // namespace depgraph
