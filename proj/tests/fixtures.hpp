#pragma once

// Small hand-built fault instances shared by the unit tests.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "depgraph/facts.hpp"

namespace fixtures {

using namespace depgraph;

class InstanceBuilder {
 public:
  explicit InstanceBuilder(std::string fault_id = "f1") { inst_.fault_id = std::move(fault_id); }

  InstanceBuilder& method(const std::string& id, LineSpan span = {1, 10}) {
    inst_.code.methods.push_back({id, span});
    return *this;
  }
  // Statement attached to `parent` (its method when empty) by a Child edge.
  InstanceBuilder& stmt(const std::string& id, const std::string& owner,
                        AstNodeKind kind = AstNodeKind::ExpressionStatement,
                        const std::string& parent = "", LineSpan span = {2, 2}) {
    inst_.code.statements.push_back({id, owner, kind, span});
    inst_.code.edges.push_back({parent.empty() ? owner : parent, id, CodeEdgeKind::Child});
    return *this;
  }
  InstanceBuilder& seq(const std::string& from, const std::string& to) {
    inst_.code.edges.push_back({from, to, CodeEdgeKind::Sequence});
    return *this;
  }
  InstanceBuilder& call(const std::string& caller, const std::string& callee) {
    inst_.calls.edges.push_back({caller, callee});
    return *this;
  }
  InstanceBuilder& test(const std::string& id, bool fail) {
    inst_.coverage.tests.push_back({id, fail ? TestOutcome::Fail : TestOutcome::Pass});
    return *this;
  }
  InstanceBuilder& covers(const std::string& test, const std::string& statement) {
    inst_.coverage.covered.push_back({test, statement});
    return *this;
  }
  InstanceBuilder& faulty(const std::string& method) {
    inst_.ground_truth.push_back(method);
    return *this;
  }
  InstanceBuilder& changes(ChangeFacts ch, std::int64_t faulty_ts) {
    inst_.changes = std::move(ch);
    inst_.faulty_commit_ts = faulty_ts;
    return *this;
  }

  FaultInstance build() {
    auto out = inst_;
    canonicalize(out);
    return out;
  }

 private:
  FaultInstance inst_;
};

// Three methods shaped like the motivating example: the failing test enters
// A, A calls B, and C is covered by the failing test without any call path.
//   A: a1 a2   B: b1   C: c1
inline FaultInstance unreachable_covered() {
  return InstanceBuilder("lang62")
      .method("A", {1, 5}).method("B", {6, 9}).method("C", {10, 14})
      .stmt("a1", "A", AstNodeKind::IfStatement, "", {2, 2})
      .stmt("a2", "A", AstNodeKind::ReturnStatement, "a1", {3, 3})
      .stmt("b1", "B", AstNodeKind::ExpressionStatement, "", {7, 7})
      .stmt("c1", "C", AstNodeKind::LocalVariableDeclaration, "", {11, 11})
      .call("T1", "A").call("A", "B")
      .test("T1", true).test("T2", false)
      .covers("T1", "a1").covers("T1", "a2").covers("T1", "b1").covers("T1", "c1")
      .covers("T2", "a1")
      .faulty("B")
      .build();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("depgraph-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
