#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "depgraph/cli.hpp"
#include "depgraph/graph_assembly.hpp"
#include "fixtures.hpp"

using namespace depgraph;
using fixtures::TempDir;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string gen_corpus(const TempDir& tmp, const std::string& name = "corpus") {
  const auto dir = (tmp.path() / name).string();
  const auto r = cli({"gen-corpus", "--seed", "3", "--projects", "2", "--instances", "3",
                      "--methods", "8", "-o", dir});
  REQUIRE(r.code == 0);
  return dir;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("gen-corpus then ingest and eval") {
  TempDir tmp("cli");
  const auto dir = gen_corpus(tmp);

  const auto ingest = cli({"ingest", dir});
  CHECK(ingest.code == 0);
  CHECK(lines_of(ingest.out).size() == 6);

  const auto eval = cli({"eval", dir, "--epochs", "2", "--dim", "8"});
  REQUIRE(eval.code == 0);
  const auto rows = lines_of(eval.out);
  CHECK(rows.front() == "project,technique,top1,top3,top5,top10,mfr,mar,misses");
  CHECK(rows.size() == 1 + 2 * 2 + 2);
}

TEST_CASE("missing coverage file is a validation error") {
  TempDir tmp("cli");
  const auto dir = gen_corpus(tmp);
  const auto inst = std::filesystem::path(dir) / "p0" / "p0-f000";
  REQUIRE(std::filesystem::exists(inst / "coverage.jsonl"));
  std::filesystem::remove(inst / "coverage.jsonl");

  const auto base = cli({"baseline", inst.string()});
  CHECK(base.code == 1);
  CHECK(base.err.find("MissingFile") != std::string::npos);

  const auto ingest = cli({"ingest", dir});
  CHECK(ingest.code == 1);
  CHECK(ingest.out.find("invalid p0/p0-f000") != std::string::npos);
}

TEST_CASE("the installed binary reports the same exit codes") {
  TempDir tmp("cli");
  const auto dir = gen_corpus(tmp);
  const auto inst = std::filesystem::path(dir) / "p1" / "p1-f000";
  std::filesystem::remove(inst / "coverage.jsonl");
  const std::string cmd = std::string(DEPGRAPH_CLI) + " baseline " + inst.string() + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 1);
  const std::string usage = std::string(DEPGRAPH_CLI) + " no-such-command >/dev/null 2>&1";
  const int bad = std::system(usage.c_str());
  REQUIRE(WIFEXITED(bad));
  CHECK(WEXITSTATUS(bad) == 2);
}

TEST_CASE("stats rows match reduction_stats") {
  TempDir tmp("cli");
  const auto dir = gen_corpus(tmp);
  const auto r = cli({"stats", dir});
  REQUIRE(r.code == 0);
  const auto rows = lines_of(r.out);
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == "instance_id,nodes_before,nodes_after,edges_before,edges_after,pct_nodes,pct_edges");
  const auto inst = load_fault_instance(std::filesystem::path(dir) / "p0" / "p0-f001");
  const auto s = reduction_stats(assemble(inst, AssemblyMode::GraceStyle),
                                 assemble(inst, AssemblyMode::DepGraph));
  std::ostringstream want;
  want << "p0-f001," << s.nodes_before << "," << s.nodes_after << "," << s.edges_before << ","
       << s.edges_after << ",";
  bool found = false;
  for (const auto& row : rows) {
    if (row.rfind(want.str(), 0) == 0) found = true;
  }
  CHECK(found);
}

TEST_CASE("train, rank and baseline are reproducible") {
  TempDir tmp("cli");
  const auto dir = gen_corpus(tmp);
  const auto project = (std::filesystem::path(dir) / "p0").string();
  const auto one = (std::filesystem::path(dir) / "p1" / "p1-f002").string();
  const auto ck1 = (tmp.path() / "a.json").string();
  const auto ck2 = (tmp.path() / "b.json").string();
  REQUIRE(cli({"train", project, "--epochs", "2", "--dim", "8", "-o", ck1}).code == 0);
  REQUIRE(cli({"train", project, "--epochs", "2", "--dim", "8", "-o", ck2}).code == 0);
  CHECK(fixtures::read_file(ck1) == fixtures::read_file(ck2));

  const auto r1 = cli({"rank", one, "--checkpoint", ck1});
  const auto r2 = cli({"rank", one, "--checkpoint", ck2});
  REQUIRE(r1.code == 0);
  CHECK(r1.out == r2.out);
  const auto rows = lines_of(r1.out);
  CHECK(rows.front() == "instance_id,rank,method_id,score");
  CHECK(rows[1].rfind("p1-f002,1,", 0) == 0);

  const auto b = cli({"baseline", one, "--aggregation", "mean"});
  REQUIRE(b.code == 0);
  CHECK(lines_of(b.out).front() == "instance_id,rank,method_id,score");

  CHECK(cli({"rank", one}).code != 0);
}

TEST_CASE("config file supplies defaults that flags override") {
  TempDir tmp("cli");
  const auto dir = gen_corpus(tmp);
  const auto project = (std::filesystem::path(dir) / "p0").string();
  const auto config = tmp.path() / "config.json";
  fixtures::write_file(config, "{\"epochs\": 1, \"dim\": 8, \"techniques\": [\"ochiai\"]}");

  const auto cfg_only = cli({"eval", dir, "--config", config.string()});
  REQUIRE(cfg_only.code == 0);
  CHECK(lines_of(cfg_only.out).size() == 1 + 2 + 1);

  const auto overridden =
      cli({"eval", dir, "--config", config.string(), "--technique", "grace", "--technique", "ochiai"});
  REQUIRE(overridden.code == 0);
  CHECK(lines_of(overridden.out).size() == 1 + 4 + 2);

  const auto ck = (tmp.path() / "ck.json").string();
  REQUIRE(cli({"train", project, "--config", config.string(), "--dim", "12", "-o", ck}).code == 0);
  CHECK(cli({"train", project, "--config", config.string(), "-o", ck}).err.find("epoch 1 ") !=
        std::string::npos);
  CHECK(fixtures::read_file(ck).find("\"dim\": 8,") != std::string::npos);

  fixtures::write_file(config, "{\"epoch\": 1}");
  CHECK(cli({"eval", dir, "--config", config.string()}).code == 2);
}

TEST_CASE("bad arguments") {
  TempDir tmp("cli");
  const auto dir = gen_corpus(tmp);
  CHECK(cli({}).code == 2);
  CHECK(cli({"eval", dir, "--protocol", "kfold"}).code == 2);
  CHECK(cli({"eval", dir, "--technique", "tarantula"}).code == 2);
  CHECK(cli({"baseline", (tmp.path() / "nope").string()}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}
