#include "depgraph/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

namespace depgraph {

namespace {

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string format_count(double v) {
  if (v == std::floor(v)) return fmt::format("{}", static_cast<long long>(v));
  return fmt::format("{:.3f}", v);
}

MetricRow aggregate(const std::string& project, const std::string& technique,
                    std::span<const RankScore> scores) {
  MetricRow row{project, technique, scores.size()};
  for (const auto& s : scores) {
    row.top1 += s.hit[0];
    row.top3 += s.hit[1];
    row.top5 += s.hit[2];
    row.top10 += s.hit[3];
    row.mfr += s.first_rank;
    row.mar += s.avg_rank;
    row.misses += s.miss;
  }
  if (!scores.empty()) {
    row.mfr /= static_cast<double>(scores.size());
    row.mar /= static_cast<double>(scores.size());
  }
  return row;
}

// Sums Top-N and miss counts; MFR/MAR weighted by instance count.
MetricRow total_row(const std::string& technique, std::span<const MetricRow> rows) {
  MetricRow total{"Total", technique, 0};
  for (const auto& r : rows) {
    if (r.technique != technique) continue;
    total.instances += r.instances;
    total.top1 += r.top1;
    total.top3 += r.top3;
    total.top5 += r.top5;
    total.top10 += r.top10;
    total.misses += r.misses;
    total.mfr += r.mfr * static_cast<double>(r.instances);
    total.mar += r.mar * static_cast<double>(r.instances);
  }
  if (total.instances > 0) {
    total.mfr /= static_cast<double>(total.instances);
    total.mar /= static_cast<double>(total.instances);
  }
  return total;
}

std::vector<const FaultInstance*> sorted_view(std::span<const FaultInstance> list) {
  std::vector<const FaultInstance*> out;
  for (const auto& i : list) out.push_back(&i);
  std::sort(out.begin(), out.end(),
            [](const auto* a, const auto* b) { return a->fault_id < b->fault_id; });
  return out;
}

// Prepared graph of an instance, or nothing when pruning empties the graph.
std::optional<PreparedGraph> try_prepare(const FaultInstance& inst, const TrainingSetup& setup) {
  try {
    return prepare(inst, setup.mode, setup.attributes);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyGraph) return std::nullopt;
    throw;
  }
}

RankScore score_prepared(const std::optional<PreparedGraph>& prepared, const FaultInstance& inst,
                         const GgnnParameters& params) {
  if (!prepared) {
    // Nothing survived: every faulty method sits past the full method list.
    RankScore s;
    s.first_rank = s.avg_rank = static_cast<double>(inst.code.methods.size() + 1);
    s.miss = true;
    return s;
  }
  auto order = score_and_rank(params, *prepared).order();
  return score_ranking(order, inst.ground_truth);
}

RankScore score_ochiai(const FaultInstance& inst, Aggregation aggregation) {
  std::vector<MethodId> order;
  for (const auto& m : rank_methods_ochiai(inst, aggregation)) order.push_back(m.id);
  return score_ranking(order, inst.ground_truth);
}

TrainingSetup with_overrides(TrainingSetup setup, const EvalOptions& options) {
  setup.train = options.train;
  return setup;
}

}  // namespace

RankScore score_ranking(std::span<const MethodId> ranked, std::span<const MethodId> truth) {
  if (ranked.empty()) throw Error(ErrorCode::EmptyRanking, "empty ranking");
  if (truth.empty()) throw Error(ErrorCode::InvalidArgument, "empty ground truth");
  std::unordered_map<std::string_view, std::size_t> rank_of;
  for (std::size_t i = 0; i < ranked.size(); ++i) rank_of.emplace(ranked[i], i + 1);

  RankScore s;
  const std::set<MethodId> unique(truth.begin(), truth.end());
  double first = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (const auto& m : unique) {
    auto it = rank_of.find(m);
    double r = static_cast<double>(ranked.size() + 1);
    if (it != rank_of.end()) {
      r = static_cast<double>(it->second);
    } else {
      s.miss = true;
    }
    first = std::min(first, r);
    total += r;
  }
  s.first_rank = first;
  s.avg_rank = total / static_cast<double>(unique.size());
  for (std::size_t k = 0; k < kTopN.size(); ++k) {
    s.hit[k] = first <= static_cast<double>(kTopN[k]);
  }
  return s;
}

Technique depgraph_technique(bool code_change) {
  Technique t;
  t.name = code_change ? "DepGraph" : "DepGraph-noCC";
  t.setup.mode = AssemblyMode::DepGraph;
  t.setup.attributes.code_change = code_change;
  return t;
}

Technique grace_technique(bool code_change) {
  Technique t;
  t.name = code_change ? "GNN-CC" : "GNN";
  t.setup.mode = AssemblyMode::GraceStyle;
  t.setup.attributes.code_change = code_change;
  return t;
}

Technique ochiai_technique(Aggregation aggregation) {
  Technique t;
  t.name = "Ochiai";
  t.learned = false;
  t.aggregation = aggregation;
  return t;
}

std::optional<Technique> parse_technique(std::string_view name) {
  if (name == "depgraph") return depgraph_technique(true);
  if (name == "depgraph-nocc") return depgraph_technique(false);
  if (name == "grace") return grace_technique(false);
  if (name == "ochiai") return ochiai_technique();
  return std::nullopt;
}

const MetricRow* EvaluationReport::find(std::string_view project, std::string_view technique) const {
  for (const auto& r : rows) {
    if (r.project == project && r.technique == technique) return &r;
  }
  return nullptr;
}

std::string EvaluationReport::to_csv() const {
  std::string out = "project,technique,top1,top3,top5,top10,mfr,mar,misses\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{:.3f},{:.3f},{}\n", r.project, r.technique,
                       format_count(r.top1), format_count(r.top3), format_count(r.top5),
                       format_count(r.top10), r.mfr, r.mar, format_count(r.misses));
  }
  return out;
}

std::vector<MethodId> rank_with_model(const FaultInstance& instance, const GgnnParameters& params,
                                      const TrainingSetup& setup) {
  return score_and_rank(params, prepare(instance, setup.mode, setup.attributes)).order();
}

EvaluationReport leave_one_out(const std::map<std::string, std::vector<FaultInstance>>& corpus,
                               std::span<const Technique> techniques, const EvalOptions& options) {
  EvaluationReport report;
  for (const auto& [project, list] : corpus) {
    if (list.size() < 2) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("leave-one-out needs >= 2 instances in project {}", project));
    }
    const auto view = sorted_view(list);
    for (const auto& tech : techniques) {
      std::vector<RankScore> scores(view.size());
      if (!tech.learned) {
        for (std::size_t i = 0; i < view.size(); ++i) {
          scores[i] = score_ochiai(*view[i], tech.aggregation);
        }
      } else {
        const auto setup = with_overrides(tech.setup, options);
        std::vector<std::optional<PreparedGraph>> prepared(view.size());
        parallel_for(view.size(), options.jobs,
                     [&](std::size_t i) { prepared[i] = try_prepare(*view[i], setup); });
        parallel_for(view.size(), options.jobs, [&](std::size_t held_out) {
          std::vector<const PreparedGraph*> training;
          for (std::size_t j = 0; j < view.size(); ++j) {
            if (j != held_out && prepared[j]) training.push_back(&*prepared[j]);
          }
          try {
            auto model = train(training, setup.train);
            scores[held_out] = score_prepared(prepared[held_out], *view[held_out], model.params);
          } catch (const Error& e) {
            throw Error(e.code(), fmt::format("fold {} ({}): {}", view[held_out]->fault_id,
                                              tech.name, e.what()));
          }
        });
      }
      for (std::size_t i = 0; i < view.size(); ++i) {
        report.outcomes.push_back({project, tech.name, view[i]->fault_id, scores[i]});
      }
      report.rows.push_back(aggregate(project, tech.name, scores));
    }
  }
  auto project_rows = report.rows;
  for (const auto& tech : techniques) report.rows.push_back(total_row(tech.name, project_rows));
  return report;
}

EvaluationReport leave_one_out(std::span<const FaultInstance> corpus,
                               std::span<const Technique> techniques, const EvalOptions& options,
                               const std::string& project) {
  std::map<std::string, std::vector<FaultInstance>> one{
      {project, std::vector<FaultInstance>(corpus.begin(), corpus.end())}};
  return leave_one_out(one, techniques, options);
}

EvaluationReport cross_project(const std::map<std::string, std::vector<FaultInstance>>& corpora,
                               std::span<const Technique> techniques, const EvalOptions& options) {
  if (corpora.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "cross-project evaluation needs >= 2 projects");
  }
  std::vector<std::string> projects;
  for (const auto& [name, _] : corpora) projects.push_back(name);

  EvaluationReport report;
  for (const auto& tech : techniques) {
    const auto setup = with_overrides(tech.setup, options);

    // prepared[p][i]: graph of instance i of project p.
    std::vector<std::vector<const FaultInstance*>> views;
    std::vector<std::vector<std::optional<PreparedGraph>>> prepared(projects.size());
    for (const auto& p : projects) views.push_back(sorted_view(corpora.at(p)));

    std::vector<GgnnParameters> models(projects.size());
    if (tech.learned) {
      for (std::size_t p = 0; p < projects.size(); ++p) {
        prepared[p].resize(views[p].size());
        parallel_for(views[p].size(), options.jobs,
                     [&](std::size_t i) { prepared[p][i] = try_prepare(*views[p][i], setup); });
      }
      parallel_for(projects.size(), options.jobs, [&](std::size_t p) {
        std::vector<const PreparedGraph*> training;
        for (const auto& g : prepared[p]) {
          if (g) training.push_back(&*g);
        }
        try {
          models[p] = train(training, setup.train).params;
        } catch (const Error& e) {
          throw Error(e.code(), fmt::format("model for {} ({}): {}", projects[p], tech.name,
                                            e.what()));
        }
      });
    }

    for (std::size_t target = 0; target < projects.size(); ++target) {
      std::vector<MetricRow> per_model;
      for (std::size_t source = 0; source < projects.size(); ++source) {
        if (source == target) continue;
        std::vector<RankScore> scores(views[target].size());
        for (std::size_t i = 0; i < views[target].size(); ++i) {
          scores[i] = tech.learned
                          ? score_prepared(prepared[target][i], *views[target][i], models[source])
                          : score_ochiai(*views[target][i], tech.aggregation);
          report.outcomes.push_back({projects[target], tech.name + "@" + projects[source],
                                     views[target][i]->fault_id, scores[i]});
        }
        per_model.push_back(aggregate(projects[target], tech.name, scores));
      }
      MetricRow mean{projects[target], tech.name, views[target].size()};
      const double k = static_cast<double>(per_model.size());
      for (const auto& r : per_model) {
        mean.top1 += r.top1 / k;
        mean.top3 += r.top3 / k;
        mean.top5 += r.top5 / k;
        mean.top10 += r.top10 / k;
        mean.mfr += r.mfr / k;
        mean.mar += r.mar / k;
        mean.misses += r.misses / k;
      }
      report.rows.push_back(mean);
    }
  }
  auto project_rows = report.rows;
  for (const auto& tech : techniques) report.rows.push_back(total_row(tech.name, project_rows));
  return report;
}

}  // namespace depgraph
