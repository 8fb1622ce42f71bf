#include "depgraph/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "depgraph/evaluation.hpp"
#include "depgraph/facts.hpp"
#include "depgraph/ggnn.hpp"
#include "depgraph/graph_assembly.hpp"
#include "depgraph/sbfl.hpp"
#include "depgraph/synthetic.hpp"

namespace depgraph {

namespace fs = std::filesystem;
using nlohmann::json;

void apply_config_json(CliConfig& c, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config: expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "paths") c.paths = value.get<std::vector<std::string>>();
      else if (key == "mode") c.mode = value.get<std::string>();
      else if (key == "code_change") c.code_change = value.get<bool>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "dim") c.dim = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "jobs") c.jobs = value.get<std::size_t>();
      else if (key == "protocol") c.protocol = value.get<std::string>();
      else if (key == "techniques") c.techniques = value.get<std::vector<std::string>>();
      else if (key == "aggregation") c.aggregation = value.get<std::string>();
      else if (key == "checkpoint") c.checkpoint = value.get<std::string>();
      else if (key == "output") c.output = value.get<std::string>();
      else if (key == "preset") c.preset = value.get<std::string>();
      else if (key == "projects") c.projects = value.get<std::size_t>();
      else if (key == "instances") c.instances = value.get<std::size_t>();
      else if (key == "methods") c.methods = value.get<std::size_t>();
      else if (key == "unreachable") c.unreachable = value.get<double>();
      else if (key == "no_changes") c.no_changes = value.get<bool>();
      else throw Error(ErrorCode::InvalidArgument, "config: unknown key " + key);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
}

namespace {

struct Io {
  std::ostream& out;
  std::ostream& err;
};

void emit(const CliConfig& c, const std::string& text, Io io) {
  if (c.output.empty()) {
    io.out << text;
    return;
  }
  const fs::path path(c.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::MissingFile, "cannot write " + c.output);
  f << text;
  io.err << "wrote " << c.output << "\n";
}

AssemblyMode mode_of(const CliConfig& c) {
  auto m = parse_assembly_mode(c.mode);
  if (!m) throw Error(ErrorCode::InvalidArgument, "unknown mode " + c.mode);
  return *m;
}

bool all_have_changes(std::span<const FaultInstance> list) {
  return std::all_of(list.begin(), list.end(),
                     [](const FaultInstance& i) { return i.changes.has_value(); });
}

TrainConfig train_config(const CliConfig& c) {
  return TrainConfig{c.lr, c.epochs, c.dim, c.seed};
}

std::vector<FaultInstance> flatten(const std::map<std::string, std::vector<FaultInstance>>& corpus) {
  std::vector<FaultInstance> all;
  for (const auto& [_, list] : corpus) all.insert(all.end(), list.begin(), list.end());
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.fault_id < b.fault_id; });
  return all;
}

std::map<std::string, std::vector<FaultInstance>> load_paths(const CliConfig& c) {
  std::map<std::string, std::vector<FaultInstance>> merged;
  for (const auto& p : c.paths) {
    for (auto& [project, list] : load_corpus(p)) {
      auto& dst = merged[project];
      dst.insert(dst.end(), std::make_move_iterator(list.begin()),
                 std::make_move_iterator(list.end()));
    }
  }
  for (auto& [_, list] : merged) {
    std::sort(list.begin(), list.end(),
              [](const auto& a, const auto& b) { return a.fault_id < b.fault_id; });
  }
  return merged;
}

const FaultInstance& only_instance(const std::vector<FaultInstance>& all) {
  if (all.size() != 1) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("expected one fault instance, found {}", all.size()));
  }
  return all.front();
}

std::string ranked_csv(const std::string& fault_id,
                       const std::vector<std::pair<MethodId, double>>& ranked) {
  std::string csv = "instance_id,rank,method_id,score\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    csv += fmt::format("{},{},{},{}\n", fault_id, i + 1, ranked[i].first, ranked[i].second);
  }
  return csv;
}

int cmd_ingest(const CliConfig& c, Io io) {
  std::size_t ok = 0, bad = 0;
  for (const auto& p : c.paths) {
    for (const auto& loc : discover_instances(p)) {
      try {
        auto inst = load_fault_instance(loc.dir);
        io.out << fmt::format("ok {}/{}\n", loc.project, inst.fault_id);
        ++ok;
      } catch (const Error& e) {
        io.out << fmt::format("invalid {}/{}: {}\n", loc.project,
                              loc.dir.filename().string(), e.what());
        ++bad;
        if (!is_validation_error(e.code())) throw;
      }
    }
  }
  io.err << fmt::format("{} valid, {} invalid\n", ok, bad);
  return bad == 0 ? 0 : 1;
}

int cmd_build_graph(const CliConfig& c, Io io) {
  const auto all = flatten(load_paths(c));
  const auto& inst = only_instance(all);
  auto graph = assemble(inst, mode_of(c));
  const bool cc = c.code_change.value_or(inst.changes.has_value());
  graph = attach_attributes(std::move(graph), inst, AttributeConfig{cc});
  emit(c, graph_to_json(graph) + "\n", io);
  return 0;
}

int cmd_stats(const CliConfig& c, Io io) {
  std::string csv = "instance_id,nodes_before,nodes_after,edges_before,edges_after,pct_nodes,pct_edges\n";
  for (const auto& inst : flatten(load_paths(c))) {
    const auto s = reduction_stats(assemble(inst, AssemblyMode::GraceStyle),
                                   assemble(inst, AssemblyMode::DepGraph));
    csv += fmt::format("{},{},{},{},{},{:.2f},{:.2f}\n", inst.fault_id, s.nodes_before,
                       s.nodes_after, s.edges_before, s.edges_after, s.pct_nodes, s.pct_edges);
  }
  emit(c, csv, io);
  return 0;
}

int cmd_train(const CliConfig& c, Io io) {
  const auto all = flatten(load_paths(c));
  TrainingSetup setup;
  setup.mode = mode_of(c);
  setup.attributes.code_change = c.code_change.value_or(all_have_changes(all));
  setup.train = train_config(c);
  io.err << fmt::format("training on {} instances ({}, code change {})\n", all.size(),
                        to_string(setup.mode), setup.attributes.code_change ? "on" : "off");
  auto result = train(all, setup, [&](std::size_t epoch, double loss) {
    io.err << fmt::format("epoch {} loss {:.6f}\n", epoch, loss);
  });
  if (result.skipped > 0) {
    io.err << fmt::format("{} instances skipped: faulty methods pruned\n", result.skipped);
  }
  const std::string text = checkpoint_to_json(Checkpoint{std::move(result.params), setup});
  emit(c, text, io);
  return 0;
}

int cmd_rank(const CliConfig& c, Io io) {
  if (c.checkpoint.empty()) throw Error(ErrorCode::InvalidArgument, "--checkpoint is required");
  const auto all = flatten(load_paths(c));
  const auto& inst = only_instance(all);
  const auto cp = load_checkpoint(c.checkpoint);
  const auto prepared = prepare(inst, cp.setup.mode, cp.setup.attributes);
  const auto out = score_and_rank(cp.params, prepared);
  std::vector<std::pair<MethodId, double>> ranked;
  for (const auto& r : out.ranked) ranked.emplace_back(r.id, r.probability);
  emit(c, ranked_csv(inst.fault_id, ranked), io);
  return 0;
}

int cmd_baseline(const CliConfig& c, Io io) {
  const auto agg = parse_aggregation(c.aggregation);
  if (!agg) throw Error(ErrorCode::InvalidArgument, "unknown aggregation " + c.aggregation);
  const auto all = flatten(load_paths(c));
  const auto& inst = only_instance(all);
  std::vector<std::pair<MethodId, double>> ranked;
  for (const auto& s : rank_methods_ochiai(inst, *agg)) ranked.emplace_back(s.id, s.score);
  emit(c, ranked_csv(inst.fault_id, ranked), io);
  return 0;
}

int cmd_eval(const CliConfig& c, Io io) {
  const auto corpus = load_paths(c);
  std::vector<Technique> techniques;
  for (const auto& name : c.techniques) {
    auto t = parse_technique(name);
    if (!t) throw Error(ErrorCode::InvalidArgument, "unknown technique " + name);
    techniques.push_back(*t);
  }
  const bool changes = all_have_changes(flatten(corpus));
  for (auto& t : techniques) {
    if (!t.learned || !t.setup.attributes.code_change) continue;
    // An explicit flag decides; otherwise fall back to no change features
    // when the corpus has none.
    t.setup.attributes.code_change = c.code_change.value_or(changes);
  }
  EvalOptions options;
  options.jobs = std::max<std::size_t>(1, c.jobs);
  options.train = train_config(c);
  io.err << fmt::format("{} evaluation over {} project(s)\n", c.protocol, corpus.size());
  EvaluationReport report;
  if (c.protocol == "loo") {
    report = leave_one_out(corpus, techniques, options);
  } else if (c.protocol == "cross") {
    report = cross_project(corpus, techniques, options);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown protocol " + c.protocol);
  }
  emit(c, report.to_csv(), io);
  return 0;
}

int cmd_gen_corpus(const CliConfig& c, Io io) {
  const auto d = parse_difficulty(c.preset);
  if (!d) throw Error(ErrorCode::InvalidArgument, "unknown preset " + c.preset);
  if (c.output.empty()) throw Error(ErrorCode::InvalidArgument, "--output directory is required");
  auto cfg = preset(*d, c.seed);
  if (c.methods) cfg.n_methods = *c.methods;
  if (c.unreachable) cfg.unreachable_covered_fraction = *c.unreachable;
  if (c.no_changes) cfg.change_density = 0.0;
  const auto corpus = generate_corpus(cfg, c.instances, c.projects);
  std::size_t n = 0;
  for (const auto& [project, list] : corpus) {
    for (const auto& g : list) {
      write_fault_instance(g.instance, fs::path(c.output) / project / g.instance.fault_id);
      ++n;
    }
  }
  io.err << fmt::format("wrote {} instances under {}\n", n, c.output);
  return 0;
}

void add_paths(CLI::App* sub, CliConfig& c, const std::string& what) {
  sub->add_option("paths", c.paths, what)->required()->check(CLI::ExistingPath);
}

void add_mode(CLI::App* sub, CliConfig& c) {
  sub->add_option("--mode", c.mode, "graph assembly mode")
      ->check(CLI::IsMember({"grace", "depgraph"}));
}

void add_code_change(CLI::App* sub, CliConfig& c) {
  sub->add_flag_callback("--with-code-change", [&c] { c.code_change = true; },
                         "use change-history attributes");
  sub->add_flag_callback("--no-code-change", [&c] { c.code_change = false; },
                         "zero the change-history attributes");
}

void add_train(CLI::App* sub, CliConfig& c) {
  sub->add_option("--lr", c.lr, "learning rate");
  sub->add_option("--epochs", c.epochs, "training epochs");
  sub->add_option("--dim", c.dim, "embedding size")->check(CLI::Range(4, 4096));
  sub->add_option("--seed", c.seed, "initialization seed");
}

void add_output(CLI::App* sub, CliConfig& c) {
  sub->add_option("-o,--output", c.output, "output path (standard output when omitted)");
}

// Removes --config (anywhere on the line) before the real parse so that the
// file's contents become defaults that explicit flags can still override.
std::optional<std::string> take_config_path(std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  return path;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CliConfig c;
  Io io{out, err};
  try {
    if (auto path = take_config_path(args)) {
      std::ifstream f(*path);
      if (!f) throw Error(ErrorCode::MissingFile, "config file " + *path);
      std::stringstream buf;
      buf << f.rdbuf();
      apply_config_json(c, buf.str());
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Fault localization over unified coverage graphs"};
  app.require_subcommand(1);
  // Parsed by take_config_path; registered here for --help only.
  std::string config_help;
  app.add_option("--config", config_help, "JSON file with default option values");

  auto* ingest = app.add_subcommand("ingest", "validate fact directories and print a report");
  add_paths(ingest, c, "instance, project or corpus directories");

  auto* build = app.add_subcommand("build-graph", "assemble one instance and dump graph JSON");
  add_paths(build, c, "instance directory");
  add_mode(build, c);
  add_code_change(build, c);
  add_output(build, c);

  auto* stats = app.add_subcommand("stats", "grace-vs-depgraph reduction CSV");
  add_paths(stats, c, "instance, project or corpus directories");
  add_output(stats, c);

  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  add_paths(tr, c, "training instances");
  add_mode(tr, c);
  add_code_change(tr, c);
  add_train(tr, c);
  add_output(tr, c);

  auto* rank = app.add_subcommand("rank", "ranked-method CSV for one instance");
  add_paths(rank, c, "instance directory");
  rank->add_option("--checkpoint", c.checkpoint, "checkpoint written by train");
  add_output(rank, c);

  auto* ev = app.add_subcommand("eval", "leave-one-out or cross-project report CSV");
  add_paths(ev, c, "project or corpus directories");
  ev->add_option("--protocol", c.protocol, "loo or cross")
      ->check(CLI::IsMember({"loo", "cross"}));
  ev->add_option("--technique", c.techniques,
                 "depgraph, depgraph-nocc, grace or ochiai (repeatable)");
  ev->add_option("--jobs", c.jobs, "parallel folds");
  add_code_change(ev, c);
  add_train(ev, c);
  add_output(ev, c);

  auto* base = app.add_subcommand("baseline", "Ochiai ranked-method CSV for one instance");
  add_paths(base, c, "instance directory");
  base->add_option("--aggregation", c.aggregation, "max, mean or sum")
      ->check(CLI::IsMember({"max", "mean", "sum"}));
  add_output(base, c);

  auto* gen = app.add_subcommand("gen-corpus", "write a synthetic corpus");
  gen->add_option("--seed", c.seed, "corpus seed");
  gen->add_option("--projects", c.projects, "number of projects");
  gen->add_option("--instances", c.instances, "faults per project");
  gen->add_option("--preset", c.preset, "easy, medium or hard")
      ->check(CLI::IsMember({"easy", "medium", "hard"}));
  gen->add_option("--methods", c.methods, "methods per fault");
  gen->add_option("--unreachable", c.unreachable, "unreachable covered fraction")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_flag("--no-changes", c.no_changes, "omit change facts");
  add_output(gen, c);

  try {
    // Techniques given on the command line replace the configured list.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    const auto configured_techniques = c.techniques;
    c.techniques.clear();
    app.parse(reversed);
    if (c.techniques.empty()) c.techniques = configured_techniques;
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    c.subcommand = sub->get_name();
    if (c.subcommand == "ingest") return cmd_ingest(c, io);
    if (c.subcommand == "build-graph") return cmd_build_graph(c, io);
    if (c.subcommand == "stats") return cmd_stats(c, io);
    if (c.subcommand == "train") return cmd_train(c, io);
    if (c.subcommand == "rank") return cmd_rank(c, io);
    if (c.subcommand == "eval") return cmd_eval(c, io);
    if (c.subcommand == "baseline") return cmd_baseline(c, io);
    if (c.subcommand == "gen-corpus") return cmd_gen_corpus(c, io);
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace depgraph
