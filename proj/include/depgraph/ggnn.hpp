#pragma once

// Gated graph network that ranks candidate methods of a unified coverage
// graph. Node features come from kind embeddings (plus method attributes),
// five gated propagation steps over the normalized adjacency refine them,
// and a linear head followed by a softmax over method nodes scores the
// candidates. Training minimizes the listwise loss -sum log p(faulty).

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "depgraph/attributes.hpp"
#include "depgraph/graph_assembly.hpp"
#include "depgraph/tensor.hpp"

namespace depgraph {

inline constexpr std::size_t kPropagationSteps = 5;
inline constexpr std::size_t kMethodAttributeCount = 5;  // correlation + 4 change metrics

// One field per learned tensor. T is Tensor2 for values and Var for the
// tape-bound view of the same parameters.
template <typename T>
struct GgnnTensors {
  T method_kind_embedding;  // vocabulary x (d-1)
  T kind_embedding;         // vocabulary x d
  T fail_offset;            // 1 x d, added to failing-test rows
  T attr_mix;               // 5 x 1, method attributes -> last feature
  T attr_bias;              // 1 x 1
  T w_forget, w_input, w_cell;  // d x d, shared across steps
  T b_forget, b_input, b_cell;  // 1 x d
  std::array<T, kPropagationSteps> norm_gain;   // 1 x d each
  std::array<T, kPropagationSteps> norm_shift;  // 1 x d each
  T head_w;  // d x 1
  T head_b;  // 1 x 1

  // Calls f(name, field_of_each...) for every tensor, in a fixed order.
  template <typename F, typename... Others>
  void visit(F&& f, Others&... others);
  template <typename F, typename... Others>
  void visit(F&& f, const Others&... others) const;
};

using GgnnParameters = GgnnTensors<Tensor2>;
using BoundParameters = GgnnTensors<Var>;

std::size_t embedding_dim(const GgnnParameters& params);

// Uniform(-0.1, 0.1) from a seeded 64-bit Mersenne Twister; layer-norm gains
// start at 1 and shifts at 0.
GgnnParameters initialize_parameters(std::size_t dim, std::uint64_t seed);

BoundParameters bind(Tape& tape, const GgnnParameters& params);

// Graph plus everything derived from it that a forward pass needs.
struct PreparedGraph {
  UnifiedGraph graph;
  NormalizedAdjacency adjacency;
  std::vector<std::size_t> candidates;  // method node indices
  std::vector<MethodId> truth;          // faulty methods present among candidates
  std::vector<MethodId> missing_truth;  // faulty methods pruned away
};

PreparedGraph prepare(const FaultInstance& instance, AssemblyMode mode,
                      const AttributeConfig& attributes);
PreparedGraph prepare(UnifiedGraph attributed_graph, std::span<const MethodId> ground_truth);

Var embed(Tape& tape, const BoundParameters& params, const UnifiedGraph& graph);

// One gated update of the cell states: f * c + i * g with the three gates
// computed from the aggregated neighbour message. No residual, no norm.
Var gated_update(Tape& tape, const BoundParameters& params, Var message, Var cell);

Var propagate(Tape& tape, const BoundParameters& params, Var features,
              const NormalizedAdjacency& adjacency);

// Raw scores y' = z W + b of the candidate rows, as a 1 x m row.
Var score_candidates(Tape& tape, const BoundParameters& params, Var z,
                     std::span<const std::size_t> candidates);

struct RankedMethod {
  MethodId id;
  double probability = 0.0;
  double raw = 0.0;
};

// Candidates in descending probability; ties broken by method id.
struct RankingOutput {
  std::vector<RankedMethod> ranked;

  double probability(std::string_view id) const;
  std::vector<MethodId> order() const;
};

RankingOutput make_ranking(const UnifiedGraph& graph, std::span<const std::size_t> candidates,
                           const Tensor2& probabilities, const Tensor2& raw);

RankingOutput score_and_rank(const GgnnParameters& params, const PreparedGraph& prepared);

double listwise_loss(const RankingOutput& out, std::span<const MethodId> truth);

// Listwise loss of a prepared graph recorded on `tape`; requires at least
// one faulty method among the candidates.
Var listwise_loss(Tape& tape, const BoundParameters& params, const PreparedGraph& prepared);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 10;
  std::size_t dim = 32;
  std::uint64_t seed = 42;
};

struct TrainResult {
  GgnnParameters params;
  std::vector<double> epoch_loss;  // summed over instances
  std::size_t skipped = 0;         // instances whose faulty methods were pruned
};

using EpochLogger = std::function<void(std::size_t epoch, double loss)>;

// Plain gradient descent, one graph per step, graphs visited in the order
// given. Instances without a faulty candidate are skipped.
TrainResult train(std::span<const PreparedGraph* const> graphs, const TrainConfig& config,
                  const EpochLogger& log = {});

struct TrainingSetup {
  AssemblyMode mode = AssemblyMode::DepGraph;
  AttributeConfig attributes;
  TrainConfig train;
};

// Assembles, attributes and trains on `corpus` sorted by fault id.
TrainResult train(std::span<const FaultInstance> corpus, const TrainingSetup& setup,
                  const EpochLogger& log = {});

struct Checkpoint {
  GgnnParameters params;
  TrainingSetup setup;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

template <typename T>
template <typename F, typename... Others>
void GgnnTensors<T>::visit(F&& f, Others&... o) {
  f("method_kind_embedding", method_kind_embedding, o.method_kind_embedding...);
  f("kind_embedding", kind_embedding, o.kind_embedding...);
  f("fail_offset", fail_offset, o.fail_offset...);
  f("attr_mix", attr_mix, o.attr_mix...);
  f("attr_bias", attr_bias, o.attr_bias...);
  f("w_forget", w_forget, o.w_forget...);
  f("w_input", w_input, o.w_input...);
  f("w_cell", w_cell, o.w_cell...);
  f("b_forget", b_forget, o.b_forget...);
  f("b_input", b_input, o.b_input...);
  f("b_cell", b_cell, o.b_cell...);
  for (std::size_t t = 0; t < kPropagationSteps; ++t) {
    f("norm_gain_" + std::to_string(t), norm_gain[t], o.norm_gain[t]...);
    f("norm_shift_" + std::to_string(t), norm_shift[t], o.norm_shift[t]...);
  }
  f("head_w", head_w, o.head_w...);
  f("head_b", head_b, o.head_b...);
}

template <typename T>
template <typename F, typename... Others>
void GgnnTensors<T>::visit(F&& f, const Others&... o) const {
  const_cast<GgnnTensors<T>&>(*this).visit(
      [&f](const std::string& name, const auto&... fields) { f(name, fields...); },
      const_cast<Others&>(o)...);
}

}  // namespace depgraph
