#include "depgraph/ggnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace depgraph {

namespace {

using json = nlohmann::json;

// Uniform in [lo, hi) from the top 53 bits; identical on every platform.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Tensor2 random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  Tensor2 t(rows, cols);
  for (auto& v : t.data()) v = uniform(rng, -0.1, 0.1);
  return t;
}

}  // namespace

std::size_t embedding_dim(const GgnnParameters& params) { return params.kind_embedding.cols(); }

GgnnParameters initialize_parameters(std::size_t dim, std::uint64_t seed) {
  if (dim < 4) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be >= 4");
  const auto vocab = static_cast<std::size_t>(kNodeKindVocabulary);
  std::mt19937_64 rng(seed);
  GgnnParameters p;
  p.method_kind_embedding = random_tensor(rng, vocab, dim - 1);
  p.kind_embedding = random_tensor(rng, vocab, dim);
  p.fail_offset = random_tensor(rng, 1, dim);
  p.attr_mix = random_tensor(rng, kMethodAttributeCount, 1);
  p.attr_bias = random_tensor(rng, 1, 1);
  p.w_forget = random_tensor(rng, dim, dim);
  p.w_input = random_tensor(rng, dim, dim);
  p.w_cell = random_tensor(rng, dim, dim);
  p.b_forget = random_tensor(rng, 1, dim);
  p.b_input = random_tensor(rng, 1, dim);
  p.b_cell = random_tensor(rng, 1, dim);
  for (std::size_t t = 0; t < kPropagationSteps; ++t) {
    p.norm_gain[t] = Tensor2(1, dim, 1.0);
    p.norm_shift[t] = Tensor2(1, dim, 0.0);
  }
  p.head_w = random_tensor(rng, dim, 1);
  p.head_b = random_tensor(rng, 1, 1);
  return p;
}

BoundParameters bind(Tape& tape, const GgnnParameters& params) {
  BoundParameters bound;
  bound.visit([&](const std::string&, Var& var, const Tensor2& value) {
    var = tape.parameter(value);
  }, params);
  return bound;
}

// ---------------------------------------------------------------------------
// Preparation

PreparedGraph prepare(UnifiedGraph graph, std::span<const MethodId> ground_truth) {
  if (graph.node_attrs.size() != graph.nodes.size()) {
    throw Error(ErrorCode::UnattributedNode, graph.fault_id + ": attributes not attached");
  }
  PreparedGraph p;
  p.adjacency = normalize_adjacency(graph);
  p.candidates = graph.method_nodes();
  if (p.candidates.empty()) throw Error(ErrorCode::NoMethodNodes, graph.fault_id);
  for (const auto& m : ground_truth) {
    auto idx = graph.index_of(m);
    if (idx && graph.nodes[*idx].role == NodeRole::Method) {
      p.truth.push_back(m);
    } else {
      p.missing_truth.push_back(m);
    }
  }
  p.graph = std::move(graph);
  return p;
}

PreparedGraph prepare(const FaultInstance& instance, AssemblyMode mode,
                      const AttributeConfig& attributes) {
  return prepare(attach_attributes(assemble(instance, mode), instance, attributes),
                 instance.ground_truth);
}

// ---------------------------------------------------------------------------
// Forward pass

Var embed(Tape& tape, const BoundParameters& params, const UnifiedGraph& graph) {
  const std::size_t n = graph.nodes.size();
  if (graph.node_attrs.size() != n) {
    throw Error(ErrorCode::UnattributedNode, graph.fault_id + ": attributes not attached");
  }
  std::vector<std::size_t> method_kinds, other_kinds, position(n);
  std::vector<double> attrs;
  std::size_t methods = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (graph.nodes[i].role == NodeRole::Method) ++methods;
  }
  std::size_t next_method = 0, next_other = methods;
  Tensor2 fail_column(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = graph.node_attrs[i];
    const auto code = static_cast<std::size_t>(a.node_kind_code);
    if (graph.nodes[i].role == NodeRole::Method) {
      position[i] = next_method++;
      method_kinds.push_back(code);
      attrs.push_back(a.test_correlation);
      attrs.insert(attrs.end(), a.change.begin(), a.change.end());
    } else {
      position[i] = next_other++;
      other_kinds.push_back(code);
    }
    fail_column(i, 0) = a.test_outcome;
  }

  std::optional<Var> stacked;
  if (methods > 0) {
    Var kind_part = tape.gather_rows(params.method_kind_embedding, method_kinds);
    Var attr_values = tape.constant(Tensor2(methods, kMethodAttributeCount, std::move(attrs)));
    Var mixed = tape.add_row(tape.matmul(attr_values, params.attr_mix), params.attr_bias);
    stacked = tape.concat_cols(kind_part, mixed);
  }
  if (methods < n) {
    Var others = tape.gather_rows(params.kind_embedding, other_kinds);
    stacked = stacked ? tape.concat_rows(*stacked, others) : others;
  }
  Var x = tape.gather_rows(*stacked, position);
  Var fails = tape.constant(std::move(fail_column));
  return tape.add(x, tape.matmul(fails, params.fail_offset));
}

Var gated_update(Tape& tape, const BoundParameters& params, Var message, Var cell) {
  Var forget = tape.sigmoid(tape.add_row(tape.matmul(message, params.w_forget), params.b_forget));
  Var input = tape.sigmoid(tape.add_row(tape.matmul(message, params.w_input), params.b_input));
  Var candidate = tape.tanh(tape.add_row(tape.matmul(message, params.w_cell), params.b_cell));
  return tape.add(tape.hadamard(forget, cell), tape.hadamard(input, candidate));
}

Var propagate(Tape& tape, const BoundParameters& params, Var features,
              const NormalizedAdjacency& adjacency) {
  if (tape.value(features).rows() != adjacency.n) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} feature rows for {} nodes", tape.value(features).rows(),
                            adjacency.n));
  }
  Var cell = features;
  for (std::size_t t = 0; t < kPropagationSteps; ++t) {
    Var message = tape.spmm(adjacency.matrix, cell);
    Var updated = gated_update(tape, params, message, cell);
    cell = tape.layer_norm(tape.add(updated, cell), params.norm_gain[t], params.norm_shift[t]);
  }
  return cell;
}

Var score_candidates(Tape& tape, const BoundParameters& params, Var z,
                     std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::NoMethodNodes, "no candidates to score");
  Var rows = tape.gather_rows(z, {candidates.begin(), candidates.end()});
  Var raw = tape.add_row(tape.matmul(rows, params.head_w), params.head_b);
  return tape.transpose(raw);
}

double RankingOutput::probability(std::string_view id) const {
  for (const auto& r : ranked) {
    if (r.id == id) return r.probability;
  }
  return 0.0;
}

std::vector<MethodId> RankingOutput::order() const {
  std::vector<MethodId> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.id);
  return out;
}

RankingOutput make_ranking(const UnifiedGraph& graph, std::span<const std::size_t> candidates,
                           const Tensor2& probabilities, const Tensor2& raw) {
  RankingOutput out;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    out.ranked.push_back({graph.nodes[candidates[k]].id, probabilities(0, k), raw(0, k)});
  }
  std::sort(out.ranked.begin(), out.ranked.end(), [](const auto& a, const auto& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.id < b.id;
  });
  return out;
}

RankingOutput score_and_rank(const GgnnParameters& params, const PreparedGraph& prepared) {
  Tape tape;
  auto bound = bind(tape, params);
  Var z = propagate(tape, bound, embed(tape, bound, prepared.graph), prepared.adjacency);
  Var raw = score_candidates(tape, bound, z, prepared.candidates);
  Var p = tape.softmax_rows(raw);
  return make_ranking(prepared.graph, prepared.candidates, tape.value(p), tape.value(raw));
}

double listwise_loss(const RankingOutput& out, std::span<const MethodId> truth) {
  double loss = 0.0;
  for (const auto& m : truth) {
    auto it = std::find_if(out.ranked.begin(), out.ranked.end(),
                           [&](const auto& r) { return r.id == m; });
    if (it == out.ranked.end()) throw Error(ErrorCode::TruthNotInCandidates, m);
    loss -= std::log(it->probability);
  }
  return loss;
}

Var listwise_loss(Tape& tape, const BoundParameters& params, const PreparedGraph& prepared) {
  if (prepared.truth.empty()) {
    throw Error(ErrorCode::TruthNotInCandidates,
                prepared.graph.fault_id + ": every faulty method was pruned");
  }
  Var z = propagate(tape, params, embed(tape, params, prepared.graph), prepared.adjacency);
  Var raw = score_candidates(tape, params, z, prepared.candidates);
  Var p = tape.softmax_rows(raw);
  Tensor2 mask(1, prepared.candidates.size());
  for (std::size_t k = 0; k < prepared.candidates.size(); ++k) {
    const auto& id = prepared.graph.nodes[prepared.candidates[k]].id;
    if (std::find(prepared.truth.begin(), prepared.truth.end(), id) != prepared.truth.end()) {
      mask(0, k) = 1.0;
    }
  }
  Var picked = tape.hadamard(tape.log(p), tape.constant(std::move(mask)));
  return tape.scale(tape.sum(picked), -1.0);
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(std::span<const PreparedGraph* const> graphs, const TrainConfig& config,
                  const EpochLogger& log) {
  TrainResult result;
  result.params = initialize_parameters(config.dim, config.seed);
  for (const auto* g : graphs) {
    if (g->truth.empty()) ++result.skipped;
  }
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto* g : graphs) {
      if (g->truth.empty()) continue;
      Tape tape;
      auto bound = bind(tape, result.params);
      Var loss;
      try {
        loss = listwise_loss(tape, bound, *g);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFiniteResult) throw;
        throw Error(ErrorCode::NonFiniteLoss,
                    fmt::format("{} (epoch {}): {}", g->graph.fault_id, epoch + 1, e.what()));
      }
      const double value = tape.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteLoss,
                    fmt::format("{} (epoch {})", g->graph.fault_id, epoch + 1));
      }
      total += value;
      tape.backward(loss);
      result.params.visit([&](const std::string&, Tensor2& param, const Var& var) {
        const auto grad = tape.grad(var).data();
        auto data = param.data();
        for (std::size_t i = 0; i < data.size(); ++i) data[i] -= config.learning_rate * grad[i];
      }, bound);
    }
    result.epoch_loss.push_back(total);
    if (log) log(epoch + 1, total);
  }
  return result;
}

TrainResult train(std::span<const FaultInstance> corpus, const TrainingSetup& setup,
                  const EpochLogger& log) {
  if (corpus.empty()) throw Error(ErrorCode::InvalidArgument, "empty training corpus");
  std::vector<const FaultInstance*> ordered;
  for (const auto& inst : corpus) ordered.push_back(&inst);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->fault_id < b->fault_id; });
  std::vector<PreparedGraph> prepared;
  prepared.reserve(ordered.size());
  for (const auto* inst : ordered) {
    prepared.push_back(prepare(*inst, setup.mode, setup.attributes));
  }
  std::vector<const PreparedGraph*> view;
  for (const auto& p : prepared) view.push_back(&p);
  return train(view, setup.train, log);
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json tensors = json::object();
  ckpt.params.visit([&](const std::string& name, const Tensor2& t) {
    tensors[name] = {{"rows", t.rows()}, {"cols", t.cols()},
                     {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  });
  json out = {
      {"format", "depgraph-ggnn"},
      {"version", 1},
      {"dim", embedding_dim(ckpt.params)},
      {"propagation_steps", kPropagationSteps},
      {"kind_vocabulary", kNodeKindVocabulary},
      {"node_taxonomy_version", kNodeTaxonomyVersion},
      {"mode", to_string(ckpt.setup.mode)},
      {"code_change", ckpt.setup.attributes.code_change},
      {"train",
       {{"learning_rate", ckpt.setup.train.learning_rate},
        {"epochs", ckpt.setup.train.epochs},
        {"seed", ckpt.setup.train.seed}}},
      {"tensors", std::move(tensors)},
  };
  return out.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    if (j.at("format") != "depgraph-ggnn" || j.at("version") != 1) {
      throw Error(ErrorCode::SchemaViolation, "not a version 1 depgraph checkpoint");
    }
    if (j.at("propagation_steps") != kPropagationSteps ||
        j.at("kind_vocabulary") != kNodeKindVocabulary) {
      throw Error(ErrorCode::SchemaViolation, "checkpoint built for a different architecture");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("checkpoint: {}", e.what()));
  }
  Checkpoint ckpt;
  const auto dim = j.at("dim").get<std::size_t>();
  ckpt.params = initialize_parameters(dim, 0);
  auto mode = parse_assembly_mode(j.at("mode").get<std::string>());
  if (!mode) throw Error(ErrorCode::SchemaViolation, "checkpoint: unknown mode");
  ckpt.setup.mode = *mode;
  ckpt.setup.attributes.code_change = j.at("code_change").get<bool>();
  ckpt.setup.train.dim = dim;
  ckpt.setup.train.learning_rate = j.at("train").at("learning_rate").get<double>();
  ckpt.setup.train.epochs = j.at("train").at("epochs").get<std::size_t>();
  ckpt.setup.train.seed = j.at("train").at("seed").get<std::uint64_t>();
  const auto& tensors = j.at("tensors");
  ckpt.params.visit([&](const std::string& name, Tensor2& t) {
    if (!tensors.contains(name)) throw Error(ErrorCode::SchemaViolation, "missing tensor " + name);
    const auto& e = tensors.at(name);
    auto rows = e.at("rows").get<std::size_t>();
    auto cols = e.at("cols").get<std::size_t>();
    if (rows != t.rows() || cols != t.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint tensor " + name);
    }
    t = Tensor2(rows, cols, e.at("data").get<std::vector<double>>());
    if (!t.all_finite()) throw Error(ErrorCode::NonFiniteResult, "checkpoint tensor " + name);
  });
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::MissingFile, path.string());
  out << checkpoint_to_json(checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace depgraph
