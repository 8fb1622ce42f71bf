#pragma once

// Small GGNN inputs shared by the model tests and the acceptance run.

#include <random>

#include "depgraph/ggnn.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

namespace model_fixtures {

using namespace depgraph;

inline constexpr std::int64_t kFaultTs = 1'700'000'000;

// Two structurally identical candidates reached from one failing test.
inline FaultInstance symmetric_pair() {
  return fixtures::InstanceBuilder("pair")
      .method("A", {1, 3}).method("B", {4, 6})
      .stmt("a1", "A", AstNodeKind::ReturnStatement, "", {2, 2})
      .stmt("b1", "B", AstNodeKind::ReturnStatement, "", {5, 5})
      .call("T", "A").call("T", "B")
      .test("T", true).covers("T", "a1").covers("T", "b1")
      .faulty("A")
      .build();
}

// Small graph (<= 12 nodes) with calls, passing coverage and change facts.
inline FaultInstance gradient_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ChangeFacts ch;
  ch.method_files = {{"p.C#parseKey()", "C.java"}, {"p.C#readValue()", "C.java"},
                     {"p.C#flush()", "C.java"}};
  ch.commits = {{"c1", kFaultTs - 86'400 * static_cast<std::int64_t>(1 + rng() % 300)},
                {"c2", kFaultTs - 86'400 * static_cast<std::int64_t>(1 + rng() % 900)}};
  ch.hunks = {{"c1", "C.java", {1, 2}, static_cast<int>(1 + rng() % 20), 1},
              {"c2", "C.java", {6, 12}, static_cast<int>(rng() % 8), 2}};
  fixtures::InstanceBuilder b("grad");
  b.method("p.C#parseKey()", {1, 4}).method("p.C#readValue()", {5, 8}).method("p.C#flush()", {9, 12})
      .stmt("k1", "p.C#parseKey()", AstNodeKind::IfStatement, "", {2, 3})
      .stmt("k2", "p.C#parseKey()", AstNodeKind::ReturnStatement, "k1", {3, 3})
      .stmt("v1", "p.C#readValue()", AstNodeKind::LocalVariableDeclaration, "", {6, 6})
      .stmt("v2", "p.C#readValue()", AstNodeKind::ReturnStatement, "", {7, 7})
      .seq("v1", "v2")
      .stmt("f1", "p.C#flush()", AstNodeKind::ExpressionStatement, "", {10, 10})
      .call("p.CTest#testParseKey", "p.C#parseKey()")
      .call("p.C#parseKey()", "p.C#readValue()")
      .call("p.C#readValue()", "p.C#flush()")
      .test("p.CTest#testParseKey", true).test("p.CTest#testFlush", false)
      .covers("p.CTest#testParseKey", "k1").covers("p.CTest#testParseKey", "k2")
      .covers("p.CTest#testParseKey", "v1").covers("p.CTest#testParseKey", "f1")
      .covers("p.CTest#testFlush", "f1").covers("p.CTest#testFlush", "v2")
      .faulty(rng() % 2 ? "p.C#parseKey()" : "p.C#readValue()")
      .changes(ch, kFaultTs);
  return b.build();
}

inline GgnnParameters spread_parameters(std::size_t dim, std::uint64_t seed) {
  // Larger than the training initialization so gradients are not tiny.
  auto p = initialize_parameters(dim, seed);
  std::mt19937_64 rng(seed ^ 0xabcdef);
  p.visit([&](const std::string&, Tensor2& t) {
    for (auto& v : t.data()) v += gradcheck::random_tensor(rng, 1, 1, -0.5, 0.5)(0, 0);
  });
  return p;
}

}  // namespace model_fixtures
