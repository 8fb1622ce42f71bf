#include "depgraph/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace depgraph {

namespace {

constexpr std::array<std::string_view, 30> kVerbs = {
    "get",     "set",     "parse",  "read",    "write",   "build",    "find",   "check",
    "load",    "save",    "apply",  "merge",   "split",   "format",   "escape", "unescape",
    "encode",  "decode",  "compute", "update", "resolve", "create",   "remove", "append",
    "validate", "convert", "flush", "open",    "close",   "reset"};

constexpr std::array<std::string_view, 30> kNouns = {
    "Token",  "Entity", "Buffer", "Node",    "Value",  "String",  "Map",    "List",
    "Header", "Record", "Field",  "Option",  "Stream", "Path",    "Number", "Date",
    "Char",   "Array",  "Key",    "Index",   "Cache",  "Range",   "State",  "Type",
    "Name",   "Element", "Config", "Writer", "Reader", "Parser"};

constexpr std::array<AstNodeKind, 6> kBlockKinds = {
    AstNodeKind::IfStatement,     AstNodeKind::ForStatement,    AstNodeKind::WhileStatement,
    AstNodeKind::DoStatement,     AstNodeKind::SwitchStatement, AstNodeKind::TryStatement};

constexpr std::int64_t kFaultyCommitTs = 1'600'000'000;
constexpr std::int64_t kDay = 86'400;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Portable draws on top of mt19937_64 (the standard distributions are
// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  template <typename C>
  const auto& pick(const C& c) { return c[below(c.size())]; }

 private:
  std::mt19937_64 engine_;
};

struct StmtPlan {
  StatementId id;
  AstNodeKind kind;
  LineSpan span;
  std::optional<std::size_t> parent;  // index within the method; nullopt = root
};

struct MethodPlan {
  MethodId id;
  std::string name;
  std::string file;
  LineSpan span;
  std::vector<StmtPlan> stmts;
  std::vector<CodeEdge> edges;
};

enum class Role { Faulty, Helper, Unreachable, ReachableOther, Other };

std::string capitalize(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "?";
}

std::optional<Difficulty> parse_difficulty(std::string_view name) {
  if (name == "easy") return Difficulty::Easy;
  if (name == "medium") return Difficulty::Medium;
  if (name == "hard") return Difficulty::Hard;
  return std::nullopt;
}

GeneratorConfig preset(Difficulty difficulty, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.difficulty = difficulty;
  switch (difficulty) {
    case Difficulty::Easy:
      cfg.unreachable_covered_fraction = 0.25;
      break;
    case Difficulty::Medium:
      cfg.unreachable_covered_fraction = 0.4;
      break;
    case Difficulty::Hard:
      cfg.unreachable_covered_fraction = 0.4;
      cfg.n_tests = 14;
      break;
  }
  return cfg;
}

GeneratedInstance generate_instance(const GeneratorConfig& cfg) {
  auto infeasible = [&](const std::string& why) {
    return Error(ErrorCode::InfeasibleConfig, fmt::format("{}: {}", cfg.fault_id, why));
  };
  if (cfg.fail_fraction < 0 || cfg.fail_fraction > 1 || cfg.unreachable_covered_fraction < 0 ||
      cfg.unreachable_covered_fraction > 1) {
    throw infeasible("fractions must lie in [0, 1]");
  }
  if (cfg.n_methods < 2) throw infeasible("need at least two methods");
  if (cfg.min_statements < 1 || cfg.min_statements > cfg.max_statements) {
    throw infeasible("statement range must satisfy 1 <= min <= max");
  }
  if (cfg.n_faulty < 1 || cfg.n_faulty >= cfg.n_methods) throw infeasible("bad faulty count");
  const std::size_t n_fail = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(cfg.fail_fraction * static_cast<double>(cfg.n_tests))));
  if (n_fail > cfg.n_tests) throw infeasible("more failing tests than tests");
  const std::size_t n_pass = cfg.n_tests - n_fail;

  const std::size_t non_faulty = cfg.n_methods - cfg.n_faulty;
  const std::size_t covered = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(0.5 * static_cast<double>(non_faulty))));
  const std::size_t unreachable = static_cast<std::size_t>(
      std::lround(cfg.unreachable_covered_fraction * static_cast<double>(covered)));
  const std::size_t helpers = covered - unreachable;
  // Failing tests enter the code under test through reachable helpers.
  if (helpers < 1) throw infeasible("no reachable helper left to call the faulty method");
  if (cfg.difficulty == Difficulty::Easy && (n_fail < 2 || helpers < 2)) {
    throw infeasible("easy preset needs >= 2 failing tests and >= 2 reachable helpers");
  }

  Rng rng(cfg.seed);
  const std::size_t n = cfg.n_methods;

  // --- Methods, statements, AST edges ------------------------------------
  std::vector<MethodPlan> methods(n);
  std::set<std::string> used_names;
  std::size_t line = 1;
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = methods[i];
    const std::size_t cls = i / 4;
    if (i % 4 == 0) line = 1;
    std::string name;
    do {
      name = std::string(rng.pick(kVerbs)) + std::string(rng.pick(kNouns));
      if (rng.chance(0.3)) name += rng.pick(kNouns);
    } while (!used_names.insert(name).second);
    m.name = name;
    m.id = fmt::format("org.{}.C{}#{}()", cfg.project, cls, name);
    m.file = fmt::format("src/{}/C{}.java", cfg.project, cls);
    const std::size_t s = rng.between(cfg.min_statements, cfg.max_statements);
    m.span = {static_cast<int>(line), static_cast<int>(line + s + 1)};
    std::vector<std::vector<std::size_t>> children(s + 1);  // slot s = root
    for (std::size_t j = 0; j < s; ++j) {
      StmtPlan st;
      st.id = fmt::format("{}.C{}.{}#s{}", cfg.project, cls, name, j);
      st.kind = rng.pick(statement_kinds());
      st.span = {static_cast<int>(line + 1 + j), static_cast<int>(line + 1 + j)};
      std::vector<std::size_t> blocks;
      for (std::size_t p = 0; p < j; ++p) {
        if (std::find(kBlockKinds.begin(), kBlockKinds.end(), m.stmts[p].kind) != kBlockKinds.end()) {
          blocks.push_back(p);
        }
      }
      if (!blocks.empty() && rng.chance(0.5)) st.parent = rng.pick(blocks);
      children[st.parent.value_or(s)].push_back(j);
      m.stmts.push_back(std::move(st));
    }
    for (std::size_t j = 0; j < s; ++j) {
      const auto& st = m.stmts[j];
      m.edges.push_back({st.parent ? m.stmts[*st.parent].id : m.id, st.id, CodeEdgeKind::Child});
    }
    for (const auto& kids : children) {
      for (std::size_t k = 1; k < kids.size(); ++k) {
        m.edges.push_back({m.stmts[kids[k - 1]].id, m.stmts[kids[k]].id, CodeEdgeKind::Sequence});
      }
    }
    line += s + 3;
  }

  // --- Roles ----------------------------------------------------------------
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<Role> role(n, Role::Other);
  std::vector<std::size_t> faulty, helper, unreach, reach_other;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < cfg.n_faulty; ++k) faulty.push_back(order[pos++]);
  for (std::size_t k = 0; k < helpers; ++k) helper.push_back(order[pos++]);
  for (std::size_t k = 0; k < unreachable; ++k) unreach.push_back(order[pos++]);
  for (auto i : faulty) role[i] = Role::Faulty;
  for (auto i : helper) role[i] = Role::Helper;
  for (auto i : unreach) role[i] = Role::Unreachable;
  for (; pos < n; ++pos) {
    if (rng.chance(0.3)) {
      role[order[pos]] = Role::ReachableOther;
      reach_other.push_back(order[pos]);
    }
  }
  auto is_reachable = [&](std::size_t i) {
    return role[i] == Role::Faulty || role[i] == Role::Helper || role[i] == Role::ReachableOther;
  };

  // --- Tests ----------------------------------------------------------------
  const auto& primary = methods[faulty.front()].name;
  auto words_of = [](const std::string& name) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : name) {
      if (std::isupper(static_cast<unsigned char>(c)) && !cur.empty()) out.push_back(std::exchange(cur, {}));
      cur.push_back(c);
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  };
  struct TestPlan {
    TestId id;
    bool fail;
    std::set<std::size_t> entry_calls;                          // methods
    std::map<std::size_t, std::set<std::size_t>> covers;        // method -> stmt indices
  };
  std::vector<TestPlan> tests;
  std::set<std::string> used_tests;
  auto unique_test = [&](std::string base) {
    std::string id = fmt::format("org.{}.Tests#{}", cfg.project, base);
    for (std::size_t k = 2; !used_tests.insert(id).second; ++k) {
      id = fmt::format("org.{}.Tests#{}{}", cfg.project, base, k);
    }
    return id;
  };
  for (std::size_t j = 0; j < n_fail; ++j) {
    std::string base;
    switch (cfg.difficulty) {
      case Difficulty::Easy:
        base = "test" + capitalize(primary);
        break;
      case Difficulty::Medium: {
        auto words = words_of(primary);
        base = "test" + capitalize(words.front()) + std::string(rng.pick(kNouns));
        break;
      }
      case Difficulty::Hard:
        base = "test" + capitalize(rng.pick(kVerbs)) + std::string(rng.pick(kNouns));
        break;
    }
    tests.push_back({unique_test(base), true, {}, {}});
  }
  for (std::size_t j = 0; j < n_pass; ++j) {
    const auto& target = methods[rng.below(n)].name;
    tests.push_back({unique_test("test" + capitalize(target)), false, {}, {}});
  }

  auto cover_some = [&](std::set<std::size_t>& out, std::size_t method) {
    const auto s = methods[method].stmts.size();
    out.insert(0);
    for (std::size_t k = 1; k < s; ++k) {
      if (rng.chance(0.6)) out.insert(k);
    }
  };
  auto cover_all = [&](std::set<std::size_t>& out, std::size_t method) {
    for (std::size_t k = 0; k < methods[method].stmts.size(); ++k) out.insert(k);
  };

  // Failing tests: enter through helpers (round-robin) and cover every
  // statement of the faulty methods.
  for (std::size_t j = 0; j < n_fail; ++j) {
    auto& t = tests[j];
    const auto entry = helper[j % helper.size()];
    t.entry_calls.insert(entry);
    cover_some(t.covers[entry], entry);
    for (auto f : faulty) cover_all(t.covers[f], f);
  }
  // Every other covered method gets a non-empty set of failing tests.
  auto assign_failing = [&](std::size_t m) {
    std::set<std::size_t> chosen;
    for (std::size_t j = 0; j < n_fail; ++j) {
      if (tests[j].covers.count(m)) chosen.insert(j);
    }
    bool all = false;
    switch (cfg.difficulty) {
      case Difficulty::Easy: all = false; break;
      case Difficulty::Medium: all = rng.chance(0.5); break;
      case Difficulty::Hard: all = rng.chance(0.7); break;
    }
    if (all) {
      for (std::size_t j = 0; j < n_fail; ++j) chosen.insert(j);
    } else {
      if (chosen.empty()) chosen.insert(rng.below(n_fail));
      const std::size_t limit = cfg.difficulty == Difficulty::Easy ? n_fail - 1 : n_fail;
      for (std::size_t j = 0; j < n_fail && chosen.size() < limit; ++j) {
        if (rng.chance(0.3)) chosen.insert(j);
      }
    }
    for (auto j : chosen) cover_some(tests[j].covers[m], m);
  };
  for (auto h : helper) assign_failing(h);
  for (auto u : unreach) assign_failing(u);

  // Passing tests cover a few random methods; the faulty methods only
  // outside the easy preset.
  const double faulty_pass_rate = cfg.difficulty == Difficulty::Easy     ? 0.0
                                  : cfg.difficulty == Difficulty::Medium ? 0.3
                                                                         : 0.6;
  for (std::size_t j = n_fail; j < tests.size(); ++j) {
    auto& t = tests[j];
    const std::size_t k = rng.between(2, 5);
    for (std::size_t c = 0; c < k; ++c) {
      auto m = rng.below(n);
      if (role[m] == Role::Faulty) continue;
      if (c == 0) t.entry_calls.insert(m);
      cover_some(t.covers[m], m);
    }
    for (auto f : faulty) {
      if (rng.chance(faulty_pass_rate)) cover_some(t.covers[f], f);
    }
  }

  // --- Static call edges ----------------------------------------------------
  std::set<std::pair<std::size_t, std::size_t>> calls;
  std::vector<std::size_t> reach_list;  // reachable methods in attachment order
  for (auto h : helper) reach_list.push_back(h);
  // Helpers beyond the failing tests' entry points hang off earlier helpers.
  for (std::size_t k = std::min(n_fail, helper.size()); k < helper.size(); ++k) {
    calls.insert({helper[rng.below(k)], helper[k]});
  }
  for (auto f : faulty) calls.insert({rng.pick(helper), f});
  reach_list.insert(reach_list.end(), faulty.begin(), faulty.end());
  for (auto r : reach_other) calls.insert({rng.pick(reach_list), r});
  reach_list.insert(reach_list.end(), reach_other.begin(), reach_other.end());
  // Extra edges: reachable methods call only reachable ones; the rest call
  // anything.
  for (std::size_t e = 0; e < n; ++e) {
    const auto caller = rng.below(n);
    const auto callee = is_reachable(caller) ? rng.pick(reach_list) : rng.below(n);
    calls.insert({caller, callee});
  }

  // --- Assemble the instance --------------------------------------------------
  FaultInstance inst;
  inst.fault_id = cfg.fault_id;
  for (const auto& m : methods) {
    inst.code.methods.push_back({m.id, m.span});
    for (const auto& s : m.stmts) inst.code.statements.push_back({s.id, m.id, s.kind, s.span});
    inst.code.edges.insert(inst.code.edges.end(), m.edges.begin(), m.edges.end());
  }
  for (const auto& [a, b] : calls) inst.calls.edges.push_back({methods[a].id, methods[b].id});
  for (const auto& t : tests) {
    inst.coverage.tests.push_back({t.id, t.fail ? TestOutcome::Fail : TestOutcome::Pass});
    for (auto m : t.entry_calls) inst.calls.edges.push_back({t.id, methods[m].id});
    for (const auto& [m, stmts] : t.covers) {
      for (auto s : stmts) inst.coverage.covered.push_back({t.id, methods[m].stmts[s].id});
    }
  }
  for (auto f : faulty) inst.ground_truth.push_back(methods[f].id);

  if (cfg.change_density > 0) {
    ChangeFacts ch;
    for (const auto& m : methods) ch.method_files.emplace(m.id, m.file);
    std::size_t next_commit = 0;
    auto add_commit = [&](std::int64_t ts) {
      auto id = fmt::format("c{:04}", next_commit++);
      ch.commits.push_back({id, ts});
      return id;
    };
    auto touch = [&](const std::string& commit, std::size_t m, int add_lo, int add_hi) {
      const auto& span = methods[m].span;
      const int first = span.start + static_cast<int>(rng.below(
                                         static_cast<std::size_t>(span.end - span.start + 1)));
      const int last = std::min(span.end, first + static_cast<int>(rng.below(3)));
      const int add = add_lo + static_cast<int>(rng.below(static_cast<std::size_t>(add_hi - add_lo + 1)));
      const int del = static_cast<int>(rng.below(static_cast<std::size_t>(add_hi / 2 + 1)));
      ch.hunks.push_back({commit, methods[m].file, {first, last}, add, del});
    };
    const auto n_commits = static_cast<std::size_t>(
        std::lround(cfg.change_density * static_cast<double>(n)));
    for (std::size_t c = 0; c < n_commits; ++c) {
      const auto age = kDay + static_cast<std::int64_t>(rng.below(3 * 365 * kDay));
      auto id = add_commit(kFaultyCommitTs - age);
      const std::size_t touched = rng.between(1, 3);
      for (std::size_t k = 0; k < touched; ++k) touch(id, rng.below(n), 1, 8);
    }
    if (cfg.faulty_churn_boost) {
      for (auto f : faulty) {
        for (int k = 0; k < 3; ++k) {
          const auto age = kDay + static_cast<std::int64_t>(rng.below(150 * kDay));
          touch(add_commit(kFaultyCommitTs - age), f, 10, 30);
        }
      }
    }
    inst.changes = std::move(ch);
    inst.faulty_commit_ts = kFaultyCommitTs;
  }
  canonicalize(inst);

  // --- Bookkeeping ------------------------------------------------------------
  GeneratedInstance out;
  auto& truth = out.truth;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_reachable(i)) truth.reachable_methods.insert(methods[i].id);
  }
  for (auto i : faulty) truth.reachable_covered_methods.insert(methods[i].id);
  for (auto i : helper) truth.reachable_covered_methods.insert(methods[i].id);
  for (auto i : unreach) truth.unreachable_covered_methods.insert(methods[i].id);
  truth.covered_methods = truth.reachable_covered_methods;
  truth.covered_methods.insert(truth.unreachable_covered_methods.begin(),
                               truth.unreachable_covered_methods.end());

  auto graph_size = [&](bool depgraph) {
    auto kept = [&](std::size_t m) {
      return role[m] == Role::Faulty || role[m] == Role::Helper ||
             (!depgraph && role[m] == Role::Unreachable);
    };
    // Statements covered by failing tests, per kept method.
    std::map<std::size_t, std::set<std::size_t>> stmts;
    for (std::size_t j = 0; j < n_fail; ++j) {
      for (const auto& [m, s] : tests[j].covers) {
        if (kept(m)) stmts[m].insert(s.begin(), s.end());
      }
    }
    std::size_t nodes = stmts.size(), edges = 0;
    for (const auto& [m, s] : stmts) {
      nodes += s.size();
      const auto& plan = methods[m];
      auto present = [&](const std::string& id) {
        if (id == plan.id) return true;
        for (auto k : s) {
          if (plan.stmts[k].id == id) return true;
        }
        return false;
      };
      for (const auto& e : plan.edges) edges += present(e.from) && present(e.to);
    }
    for (const auto& t : tests) {
      bool any = false;
      for (const auto& [m, s] : t.covers) {
        auto it = stmts.find(m);
        if (it == stmts.end()) continue;
        std::size_t hits = 0;
        for (auto k : s) hits += it->second.count(k);
        if (hits > 0) {
          any = true;
          edges += hits + 1;  // statement edges plus one method-level edge
        }
      }
      nodes += any;
    }
    if (depgraph) {
      for (const auto& [a, b] : calls) edges += stmts.count(a) && stmts.count(b);
    }
    return std::pair{nodes, edges};
  };
  std::tie(truth.grace_nodes, truth.grace_edges) = graph_size(false);
  std::tie(truth.depgraph_nodes, truth.depgraph_edges) = graph_size(true);

  out.instance = std::move(inst);
  return out;
}

std::map<std::string, std::vector<GeneratedInstance>> generate_corpus(const GeneratorConfig& config,
                                                                      std::size_t n_instances,
                                                                      std::size_t n_projects) {
  if (n_instances < 1 || n_projects < 1) {
    throw Error(ErrorCode::InvalidArgument, "corpus needs >= 1 project and >= 1 instance");
  }
  std::map<std::string, std::vector<GeneratedInstance>> corpus;
  for (std::size_t p = 0; p < n_projects; ++p) {
    const auto project = fmt::format("p{}", p);
    const auto project_seed = splitmix64(config.seed ^ splitmix64(p + 1));
    auto& list = corpus[project];
    for (std::size_t i = 0; i < n_instances; ++i) {
      GeneratorConfig cfg = config;
      cfg.project = project;
      cfg.fault_id = fmt::format("{}-f{:03}", project, i);
      cfg.seed = splitmix64(project_seed ^ splitmix64(0x1000 + i));
      list.push_back(generate_instance(cfg));
    }
  }
  return corpus;
}

std::map<std::string, std::vector<FaultInstance>> instances_of(
    const std::map<std::string, std::vector<GeneratedInstance>>& corpus) {
  std::map<std::string, std::vector<FaultInstance>> out;
  for (const auto& [project, list] : corpus) {
    for (const auto& g : list) out[project].push_back(g.instance);
  }
  return out;
}

}  // namespace depgraph
