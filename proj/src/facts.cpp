#include "depgraph/facts.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

namespace depgraph {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, kAstNodeKindCount> kKindNames = {
    "MethodDeclaration",  "IfStatement",       "ReturnStatement",
    "ForStatement",       "WhileStatement",    "DoStatement",
    "SwitchStatement",    "TryStatement",      "ThrowStatement",
    "AssertStatement",    "BreakStatement",    "ContinueStatement",
    "LocalVariableDeclaration", "ExpressionStatement",
};

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// ---------------------------------------------------------------------------
// Strict JSON field access

class RecordReader {
 public:
  RecordReader(const json& obj, std::string_view file, std::size_t line)
      : obj_(obj), file_(file), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::SchemaViolation,
                fmt::format("{}:{}: {}", file_, line_, what));
  }

  void expect_keys(std::initializer_list<std::string_view> required,
                   std::initializer_list<std::string_view> optional = {}) const {
    for (auto key : required) {
      if (!obj_.contains(std::string(key))) fail(fmt::format("missing field '{}'", key));
    }
    for (const auto& [key, _] : obj_.items()) {
      bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                   std::find(optional.begin(), optional.end(), key) != optional.end();
      if (!known) fail(fmt::format("unknown field '{}'", key));
    }
  }

  bool has(std::string_view key) const { return obj_.contains(std::string(key)); }

  std::string str(std::string_view key) const {
    const auto& v = obj_.at(std::string(key));
    if (!v.is_string()) fail(fmt::format("field '{}' must be a string", key));
    auto s = v.get<std::string>();
    if (s.empty()) fail(fmt::format("field '{}' must be non-empty", key));
    return s;
  }

  std::int64_t integer(std::string_view key) const {
    const auto& v = obj_.at(std::string(key));
    if (!v.is_number_integer()) fail(fmt::format("field '{}' must be an integer", key));
    return v.get<std::int64_t>();
  }

  int count(std::string_view key) const {
    auto v = integer(key);
    if (v < 0 || v > std::numeric_limits<int>::max()) {
      fail(fmt::format("field '{}' must be a non-negative count", key));
    }
    return static_cast<int>(v);
  }

  LineSpan span(std::string_view key) const {
    const auto& v = obj_.at(std::string(key));
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
        !v[1].is_number_integer()) {
      fail(fmt::format("field '{}' must be [start, end]", key));
    }
    LineSpan s{v[0].get<int>(), v[1].get<int>()};
    if (!s.valid()) fail(fmt::format("invalid line span [{}, {}]", s.start, s.end));
    return s;
  }

 private:
  const json& obj_;
  std::string_view file_;
  std::size_t line_;
};

void for_each_record(const fs::path& file,
                     const std::function<void(const RecordReader&)>& fn) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingFile, file.string());
  std::string text;
  std::size_t lineno = 0;
  auto name = file.filename().string();
  while (std::getline(in, text)) {
    ++lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::SchemaViolation,
                  fmt::format("{}:{}: malformed JSON ({})", name, lineno, e.what()));
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::SchemaViolation,
                  fmt::format("{}:{}: expected a JSON object", name, lineno));
    }
    fn(RecordReader(obj, name, lineno));
  }
}

json span_json(const LineSpan& s) { return json::array({s.start, s.end}); }

std::string dump_line(const json& j) { return j.dump() + "\n"; }

}  // namespace

// ---------------------------------------------------------------------------
// Taxonomy

const std::array<AstNodeKind, kStatementKindCount>& statement_kinds() {
  static const auto kinds = [] {
    std::array<AstNodeKind, kStatementKindCount> out{};
    for (std::size_t i = 0; i < kStatementKindCount; ++i) {
      out[i] = static_cast<AstNodeKind>(i + 1);
    }
    return out;
  }();
  return kinds;
}

std::string_view to_string(AstNodeKind kind) {
  return kKindNames.at(static_cast<std::size_t>(kind));
}

std::optional<AstNodeKind> parse_ast_node_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<AstNodeKind>(i);
  }
  return std::nullopt;
}

std::vector<TestId> FaultInstance::failing_tests() const {
  std::vector<TestId> out;
  for (const auto& t : coverage.tests) {
    if (t.outcome == TestOutcome::Fail) out.push_back(t.id);
  }
  sort_unique(out);
  return out;
}

// ---------------------------------------------------------------------------
// Canonical form and validation

void canonicalize(FaultInstance& instance) {
  sort_unique(instance.code.methods);
  sort_unique(instance.code.statements);
  sort_unique(instance.code.edges);
  sort_unique(instance.calls.edges);
  sort_unique(instance.coverage.tests);
  sort_unique(instance.coverage.covered);
  sort_unique(instance.ground_truth);
  if (instance.changes) {
    sort_unique(instance.changes->commits);
    sort_unique(instance.changes->hunks);
  }
}

std::vector<Violation> check_instance(const FaultInstance& inst) {
  std::vector<Violation> out;
  auto report = [&](ErrorCode code, std::string msg) {
    out.push_back({inst.fault_id, code, std::move(msg)});
  };

  // Methods: non-empty, unique ids, valid spans.
  std::unordered_set<std::string> methods;
  for (const auto& m : inst.code.methods) {
    if (m.id.empty()) report(ErrorCode::SchemaViolation, "empty method id");
    if (!m.span.valid()) report(ErrorCode::SchemaViolation, "invalid span for method " + m.id);
    if (!methods.insert(m.id).second) {
      report(ErrorCode::SchemaViolation, "duplicate method id " + m.id);
    }
  }

  // Statements: owned by exactly one existing method; kind is a statement kind.
  std::map<std::string, std::string> owner_of;
  for (const auto& s : inst.code.statements) {
    if (s.id.empty()) report(ErrorCode::SchemaViolation, "empty statement id");
    if (methods.count(s.id)) {
      report(ErrorCode::SchemaViolation, "id used by both a method and a statement: " + s.id);
    }
    if (s.kind == AstNodeKind::MethodDeclaration) {
      report(ErrorCode::SchemaViolation,
             "MethodDeclaration is reserved for method roots: " + s.id);
    }
    if (!s.span.valid()) report(ErrorCode::SchemaViolation, "invalid span for statement " + s.id);
    if (!methods.count(s.owner)) {
      report(ErrorCode::DanglingReference,
             fmt::format("statement {} owned by unknown method {}", s.id, s.owner));
    }
    auto [it, inserted] = owner_of.emplace(s.id, s.owner);
    if (!inserted) {
      if (it->second != s.owner) {
        report(ErrorCode::SchemaViolation,
               fmt::format("statement in two methods: {} ({}, {})", s.id, it->second, s.owner));
      } else {
        report(ErrorCode::SchemaViolation, "conflicting records for statement " + s.id);
      }
    }
  }

  auto method_of_node = [&](const std::string& id) -> const std::string* {
    if (methods.count(id)) return &id;
    auto it = owner_of.find(id);
    return it == owner_of.end() ? nullptr : &it->second;
  };

  // Code edges: endpoints exist, same method, roots have no parent, one
  // Child parent per statement, acyclic.
  std::unordered_map<std::string, int> parents;
  std::unordered_map<std::string, std::vector<std::string>> succ;
  for (const auto& e : inst.code.edges) {
    const auto* mf = method_of_node(e.from);
    const auto* mt = method_of_node(e.to);
    if (!mf || !mt) {
      report(ErrorCode::DanglingReference,
             fmt::format("code edge {} -> {} references an unknown node", e.from, e.to));
      continue;
    }
    if (*mf != *mt) {
      report(ErrorCode::SchemaViolation,
             fmt::format("code edge {} -> {} crosses methods", e.from, e.to));
      continue;
    }
    if (methods.count(e.to)) {
      report(ErrorCode::SchemaViolation, "method root has an incoming code edge: " + e.to);
      continue;
    }
    if (e.kind == CodeEdgeKind::Sequence && methods.count(e.from)) {
      report(ErrorCode::SchemaViolation, "sequence edge from a method root: " + e.from);
      continue;
    }
    if (e.kind == CodeEdgeKind::Child) ++parents[e.to];
    succ[e.from].push_back(e.to);
  }
  for (const auto& [sid, owner] : owner_of) {
    int p = parents.count(sid) ? parents.at(sid) : 0;
    if (p != 1) {
      report(ErrorCode::SchemaViolation,
             fmt::format("statement {} has {} parent edges (expected 1)", sid, p));
    }
  }
  {
    // Iterative three-colour DFS over code edges.
    std::unordered_map<std::string, int> colour;
    std::vector<std::string> roots;
    for (const auto& [node, _] : succ) roots.push_back(node);
    std::sort(roots.begin(), roots.end());
    bool cyclic = false;
    for (const auto& root : roots) {
      if (cyclic || colour[root] != 0) continue;
      std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
      colour[root] = 1;
      while (!stack.empty() && !cyclic) {
        auto& [node, next] = stack.back();
        auto sit = succ.find(node);
        if (sit == succ.end() || next >= sit->second.size()) {
          colour[node] = 2;
          stack.pop_back();
          continue;
        }
        const auto child = sit->second[next++];
        int& c = colour[child];
        if (c == 1) {
          cyclic = true;
          report(ErrorCode::SchemaViolation, "code edges form a cycle through " + child);
        } else if (c == 0) {
          c = 1;
          stack.emplace_back(child, 0);
        }
      }
    }
  }

  // Tests and coverage.
  std::unordered_map<std::string, TestOutcome> tests;
  bool any_fail = false;
  for (const auto& t : inst.coverage.tests) {
    if (t.id.empty()) report(ErrorCode::SchemaViolation, "empty test id");
    if (methods.count(t.id) || owner_of.count(t.id)) {
      report(ErrorCode::SchemaViolation, "test id collides with a code node: " + t.id);
    }
    auto [it, inserted] = tests.emplace(t.id, t.outcome);
    if (!inserted && it->second != t.outcome) {
      report(ErrorCode::SchemaViolation, "conflicting outcomes for test " + t.id);
    }
    any_fail = any_fail || t.outcome == TestOutcome::Fail;
  }
  for (const auto& c : inst.coverage.covered) {
    if (!tests.count(c.test)) {
      report(ErrorCode::DanglingReference, "coverage references unknown test " + c.test);
    }
    if (!owner_of.count(c.statement)) {
      report(ErrorCode::DanglingReference,
             "coverage references unknown statement " + c.statement);
    }
  }
  if (!any_fail) report(ErrorCode::NoFailingTest, "no failing test");

  // Calls: callee is a method; caller is a method or a declared test.
  for (const auto& e : inst.calls.edges) {
    if (!methods.count(e.callee)) {
      report(ErrorCode::DanglingReference, "call edge to unknown method " + e.callee);
    }
    if (!methods.count(e.caller) && !tests.count(e.caller)) {
      report(ErrorCode::DanglingReference, "call edge from unknown caller " + e.caller);
    }
  }

  // Labels.
  if (inst.ground_truth.empty()) {
    report(ErrorCode::SchemaViolation, "ground truth is empty");
  }
  for (const auto& m : inst.ground_truth) {
    if (!methods.count(m)) {
      report(ErrorCode::DanglingReference, "ground truth references unknown method " + m);
    }
  }

  // Change facts.
  if (inst.changes) {
    std::unordered_map<std::string, std::int64_t> commits;
    for (const auto& c : inst.changes->commits) {
      auto [it, inserted] = commits.emplace(c.id, c.timestamp);
      if (!inserted && it->second != c.timestamp) {
        report(ErrorCode::SchemaViolation, "conflicting timestamps for commit " + c.id);
      }
      if (inst.faulty_commit_ts && c.timestamp > *inst.faulty_commit_ts) {
        report(ErrorCode::SchemaViolation,
               fmt::format("commit {} is later than the faulty commit", c.id));
      }
    }
    for (const auto& h : inst.changes->hunks) {
      if (!commits.count(h.commit)) {
        report(ErrorCode::DanglingReference, "hunk references unknown commit " + h.commit);
      }
      if (!h.span.valid()) report(ErrorCode::SchemaViolation, "invalid hunk span");
    }
    for (const auto& [m, file] : inst.changes->method_files) {
      if (!methods.count(m)) {
        report(ErrorCode::DanglingReference, "file mapping for unknown method " + m);
      }
    }
  }
  return out;
}

ValidationReport validate_corpus(std::span<const FaultInstance> instances) {
  ValidationReport report;
  for (const auto& inst : instances) {
    auto v = check_instance(inst);
    report.violations.insert(report.violations.end(), v.begin(), v.end());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

CodeFacts read_code(const fs::path& file) {
  CodeFacts code;
  for_each_record(file, [&](const RecordReader& r) {
    if (!r.has("k")) r.fail("missing field 'k'");
    auto k = r.str("k");
    if (k == "method") {
      r.expect_keys({"k", "id", "span"});
      code.methods.push_back({r.str("id"), r.span("span")});
    } else if (k == "stmt") {
      r.expect_keys({"k", "id", "owner", "kind", "span"});
      auto kind_name = r.str("kind");
      auto kind = parse_ast_node_kind(kind_name);
      if (!kind) r.fail("unknown statement kind '" + kind_name + "'");
      code.statements.push_back({r.str("id"), r.str("owner"), *kind, r.span("span")});
    } else if (k == "edge") {
      r.expect_keys({"k", "from", "to"}, {"rel"});
      CodeEdge e{r.str("from"), r.str("to"), CodeEdgeKind::Child};
      if (r.has("rel")) {
        auto rel = r.str("rel");
        if (rel == "seq") {
          e.kind = CodeEdgeKind::Sequence;
        } else if (rel != "child") {
          r.fail("unknown edge relation '" + rel + "'");
        }
      }
      code.edges.push_back(std::move(e));
    } else {
      r.fail("unknown record kind '" + k + "'");
    }
  });
  return code;
}

CallFacts read_calls(const fs::path& file) {
  CallFacts calls;
  for_each_record(file, [&](const RecordReader& r) {
    r.expect_keys({"caller", "callee"});
    calls.edges.push_back({r.str("caller"), r.str("callee")});
  });
  return calls;
}

CoverageFacts read_coverage(const fs::path& file) {
  CoverageFacts cov;
  for_each_record(file, [&](const RecordReader& r) {
    if (r.has("outcome")) {
      r.expect_keys({"test", "outcome"});
      auto o = r.str("outcome");
      if (o != "pass" && o != "fail") r.fail("outcome must be \"pass\" or \"fail\"");
      cov.tests.push_back({r.str("test"), o == "fail" ? TestOutcome::Fail : TestOutcome::Pass});
    } else {
      r.expect_keys({"test", "covers"});
      cov.covered.push_back({r.str("test"), r.str("covers")});
    }
  });
  return cov;
}

ChangeFacts read_changes(const fs::path& file) {
  ChangeFacts ch;
  for_each_record(file, [&](const RecordReader& r) {
    if (r.has("method")) {
      r.expect_keys({"method", "file"});
      auto m = r.str("method");
      auto f = r.str("file");
      auto [it, inserted] = ch.method_files.emplace(m, f);
      if (!inserted && it->second != f) r.fail("method " + m + " mapped to two files");
    } else if (r.has("ts")) {
      r.expect_keys({"commit", "ts"});
      ch.commits.push_back({r.str("commit"), r.integer("ts")});
    } else {
      r.expect_keys({"commit", "file", "span", "add", "del"});
      ch.hunks.push_back(
          {r.str("commit"), r.str("file"), r.span("span"), r.count("add"), r.count("del")});
    }
  });
  return ch;
}

void read_labels(const fs::path& file, FaultInstance& inst) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingFile, file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("labels.json: {}", e.what()));
  }
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "labels.json: expected object");
  RecordReader r(j, "labels.json", 1);
  r.expect_keys({"faulty_methods"}, {"faulty_commit_ts"});
  const auto& fm = j.at("faulty_methods");
  if (!fm.is_array()) r.fail("faulty_methods must be an array");
  for (const auto& m : fm) {
    if (!m.is_string() || m.get<std::string>().empty()) {
      r.fail("faulty_methods entries must be non-empty strings");
    }
    inst.ground_truth.push_back(m.get<std::string>());
  }
  if (r.has("faulty_commit_ts")) inst.faulty_commit_ts = r.integer("faulty_commit_ts");
}

}  // namespace

FaultInstance load_fault_instance(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, dir.string());
  for (const char* name : {"code.jsonl", "calls.jsonl", "coverage.jsonl", "labels.json"}) {
    if (!fs::exists(dir / name)) {
      throw Error(ErrorCode::MissingFile, (dir / name).string());
    }
  }
  FaultInstance inst;
  inst.fault_id = fs::absolute(dir).lexically_normal().filename().string();
  if (inst.fault_id.empty()) {
    inst.fault_id = fs::absolute(dir).lexically_normal().parent_path().filename().string();
  }
  inst.code = read_code(dir / "code.jsonl");
  inst.calls = read_calls(dir / "calls.jsonl");
  inst.coverage = read_coverage(dir / "coverage.jsonl");
  if (fs::exists(dir / "changes.jsonl")) inst.changes = read_changes(dir / "changes.jsonl");
  read_labels(dir / "labels.json", inst);
  canonicalize(inst);

  auto violations = check_instance(inst);
  if (!violations.empty()) {
    // Report the most specific failure first: referential problems, then
    // schema problems, then the missing failing test.
    auto rank = [](ErrorCode c) {
      switch (c) {
        case ErrorCode::DanglingReference: return 0;
        case ErrorCode::SchemaViolation: return 1;
        default: return 2;
      }
    };
    auto first = std::min_element(violations.begin(), violations.end(),
                                  [&](const auto& a, const auto& b) {
                                    return rank(a.code) < rank(b.code);
                                  });
    throw Error(first->code, fmt::format("{}: {}", inst.fault_id, first->message));
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Serialization

SerializedInstance serialize(const FaultInstance& original) {
  FaultInstance inst = original;
  canonicalize(inst);
  SerializedInstance out;

  for (const auto& m : inst.code.methods) {
    out.code += dump_line({{"k", "method"}, {"id", m.id}, {"span", span_json(m.span)}});
  }
  for (const auto& s : inst.code.statements) {
    out.code += dump_line({{"k", "stmt"},
                           {"id", s.id},
                           {"owner", s.owner},
                           {"kind", std::string(to_string(s.kind))},
                           {"span", span_json(s.span)}});
  }
  for (const auto& e : inst.code.edges) {
    json j = {{"k", "edge"}, {"from", e.from}, {"to", e.to}};
    if (e.kind == CodeEdgeKind::Sequence) j["rel"] = "seq";
    out.code += dump_line(j);
  }
  for (const auto& e : inst.calls.edges) {
    out.calls += dump_line({{"caller", e.caller}, {"callee", e.callee}});
  }
  for (const auto& t : inst.coverage.tests) {
    out.coverage += dump_line(
        {{"test", t.id}, {"outcome", t.outcome == TestOutcome::Fail ? "fail" : "pass"}});
  }
  for (const auto& c : inst.coverage.covered) {
    out.coverage += dump_line({{"test", c.test}, {"covers", c.statement}});
  }
  if (inst.changes) {
    std::string ch;
    for (const auto& c : inst.changes->commits) {
      ch += dump_line({{"commit", c.id}, {"ts", c.timestamp}});
    }
    for (const auto& h : inst.changes->hunks) {
      ch += dump_line({{"commit", h.commit},
                       {"file", h.file},
                       {"span", span_json(h.span)},
                       {"add", h.lines_added},
                       {"del", h.lines_deleted}});
    }
    for (const auto& [m, f] : inst.changes->method_files) {
      ch += dump_line({{"method", m}, {"file", f}});
    }
    out.changes = std::move(ch);
  }
  json labels = {{"faulty_methods", inst.ground_truth}};
  if (inst.faulty_commit_ts) labels["faulty_commit_ts"] = *inst.faulty_commit_ts;
  out.labels = labels.dump() + "\n";
  return out;
}

void write_fault_instance(const FaultInstance& instance, const fs::path& dir) {
  fs::create_directories(dir);
  auto s = serialize(instance);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::MissingFile, (dir / name).string());
    out << text;
  };
  write("code.jsonl", s.code);
  write("calls.jsonl", s.calls);
  write("coverage.jsonl", s.coverage);
  if (s.changes) {
    write("changes.jsonl", *s.changes);
  } else if (fs::exists(dir / "changes.jsonl")) {
    fs::remove(dir / "changes.jsonl");
  }
  write("labels.json", s.labels);
}

std::vector<InstanceLocation> discover_instances(const fs::path& root) {
  auto is_instance = [](const fs::path& p) { return fs::exists(p / "code.jsonl"); };
  auto subdirs = [](const fs::path& p) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(p)) {
      if (entry.is_directory()) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  auto name_of = [](const fs::path& p) {
    return fs::absolute(p).lexically_normal().filename().string();
  };
  if (!fs::is_directory(root)) throw Error(ErrorCode::MissingFile, root.string());

  std::vector<InstanceLocation> out;
  const auto abs = fs::absolute(root).lexically_normal();
  if (is_instance(root)) {
    out.push_back({name_of(abs.has_filename() ? abs.parent_path() : abs.parent_path().parent_path()),
                   root});
    return out;
  }
  auto children = subdirs(root);
  if (std::any_of(children.begin(), children.end(), is_instance)) {
    for (const auto& c : children) {
      if (is_instance(c)) out.push_back({name_of(root), c});
    }
  } else {
    for (const auto& project : children) {
      for (const auto& c : subdirs(project)) {
        if (is_instance(c)) out.push_back({name_of(project), c});
      }
    }
  }
  if (out.empty()) throw Error(ErrorCode::MissingFile, "no fault instances under " + root.string());
  return out;
}

std::map<std::string, std::vector<FaultInstance>> load_corpus(const fs::path& root) {
  std::map<std::string, std::vector<FaultInstance>> corpus;
  for (const auto& loc : discover_instances(root)) {
    corpus[loc.project].push_back(load_fault_instance(loc.dir));
  }
  for (auto& [_, list] : corpus) {
    std::sort(list.begin(), list.end(),
              [](const auto& a, const auto& b) { return a.fault_id < b.fault_id; });
  }
  return corpus;
}

}  // namespace depgraph
