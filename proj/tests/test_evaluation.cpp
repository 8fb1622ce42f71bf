#include <doctest.h>

#include <random>

#include "depgraph/evaluation.hpp"
#include "depgraph/synthetic.hpp"
#include "fixtures.hpp"
#include "rank_oracle.hpp"

using namespace depgraph;

namespace {

RankScore score(std::vector<MethodId> ranked, std::vector<MethodId> truth) {
  return score_ranking(ranked, truth);
}

EvalOptions quick_options(std::size_t jobs = 1) {
  EvalOptions o;
  o.jobs = jobs;
  o.train.epochs = 2;
  o.train.dim = 8;
  return o;
}

std::map<std::string, std::vector<FaultInstance>> small_corpus(std::size_t projects,
                                                                std::size_t per_project) {
  auto cfg = preset(Difficulty::Easy, 3);
  cfg.n_methods = 8;
  cfg.n_tests = 6;
  return instances_of(generate_corpus(cfg, per_project, projects));
}

}  // namespace

TEST_CASE("score_ranking examples") {
  auto a = score({"A", "B", "C"}, {"A"});
  CHECK(a.first_rank == 1.0);
  CHECK(a.avg_rank == 1.0);
  CHECK(a.hit == std::array<bool, 4>{true, true, true, true});
  CHECK_FALSE(a.miss);

  auto bc = score({"A", "B", "C"}, {"B", "C"});
  CHECK(bc.first_rank == 2.0);
  CHECK(bc.avg_rank == 2.5);
  CHECK(bc.hit == std::array<bool, 4>{false, true, true, true});

  auto z = score({"A", "B"}, {"Z"});
  CHECK(z.first_rank == 3.0);
  CHECK(z.avg_rank == 3.0);
  CHECK(z.miss);
}

TEST_CASE("score_ranking errors") {
  try {
    score({}, {"A"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRanking);
  }
  CHECK_THROWS_AS(score({"A"}, {}), Error);
}

TEST_CASE("score_ranking agrees with a linear scan") {
  std::mt19937_64 rng(20);
  for (int t = 0; t < 1000; ++t) {
    const auto f = oracle::random_fixture(rng);
    const auto got = score_ranking(f.ranked, f.truth);
    const auto want = oracle::score(f.ranked, f.truth);
    REQUIRE(got.first_rank == want.first);
    REQUIRE(got.avg_rank == doctest::Approx(want.avg).epsilon(1e-12));
    REQUIRE(got.miss == want.miss);
    CHECK(got.first_rank <= got.avg_rank);
    for (std::size_t k = 0; k + 1 < kTopN.size(); ++k) CHECK((!got.hit[k] || got.hit[k + 1]));
  }
}

TEST_CASE("parse_technique") {
  CHECK(parse_technique("depgraph")->name == "DepGraph");
  CHECK(parse_technique("depgraph-nocc")->setup.attributes.code_change == false);
  CHECK(parse_technique("grace")->setup.mode == AssemblyMode::GraceStyle);
  CHECK_FALSE(parse_technique("ochiai")->learned);
  CHECK_FALSE(parse_technique("tarantula").has_value());
}

TEST_CASE("leave-one-out report shape") {
  const auto corpus = small_corpus(2, 3);
  const std::vector<Technique> techs = {depgraph_technique(true), ochiai_technique()};
  const auto report = leave_one_out(corpus, techs, quick_options());

  CHECK(report.rows.size() == 2 * 2 + 2);
  CHECK(report.outcomes.size() == 2 * 3 * 2);
  for (const auto& tech : techs) {
    const auto* total = report.find("Total", tech.name);
    REQUIRE(total != nullptr);
    double top1 = 0, misses = 0;
    std::size_t n = 0;
    for (const auto& [project, _] : corpus) {
      const auto* row = report.find(project, tech.name);
      REQUIRE(row != nullptr);
      CHECK(row->instances == 3);
      CHECK(row->top1 <= row->top3);
      CHECK(row->top3 <= row->top5);
      CHECK(row->top5 <= row->top10);
      CHECK(row->mfr <= row->mar);
      top1 += row->top1;
      misses += row->misses;
      n += row->instances;
    }
    CHECK(total->top1 == top1);
    CHECK(total->misses == misses);
    CHECK(total->instances == n);
  }
}

TEST_CASE("leave-one-out needs two instances per project") {
  const auto corpus = small_corpus(1, 1);
  const std::vector<Technique> techs = {ochiai_technique()};
  CHECK_THROWS_AS(leave_one_out(corpus, techs, quick_options()), Error);
}

TEST_CASE("identical instances") {
  const auto inst = fixtures::unreachable_covered();
  std::vector<FaultInstance> two(2, inst);
  two[1].fault_id = "lang63";
  const std::vector<Technique> techs = {ochiai_technique()};
  const auto report = leave_one_out(two, techs, quick_options(), "lang");
  const auto* row = report.find("lang", "Ochiai");
  REQUIRE(row != nullptr);
  CHECK(row->instances == 2);
  CHECK(report.outcomes[0].score.first_rank == report.outcomes[1].score.first_rank);
}

TEST_CASE("cross-project averages over source models") {
  for (std::size_t projects : {2u, 3u}) {
    CAPTURE(projects);
    const auto corpus = small_corpus(projects, 3);
    const std::vector<Technique> techs = {depgraph_technique(true)};
    const auto report = cross_project(corpus, techs, quick_options());
    CHECK(report.outcomes.size() == projects * (projects - 1) * 3);
    for (const auto& [target, _] : corpus) {
      const auto* row = report.find(target, "DepGraph");
      REQUIRE(row != nullptr);
      double mfr = 0, top1 = 0;
      for (const auto& [source, __] : corpus) {
        if (source == target) continue;
        double first = 0;
        for (const auto& o : report.outcomes) {
          if (o.project == target && o.technique == "DepGraph@" + source) {
            first += o.score.first_rank;
            top1 += o.score.hit[0];
          }
        }
        mfr += first / 3.0;
      }
      const double k = static_cast<double>(projects - 1);
      CHECK(row->mfr == doctest::Approx(mfr / k).epsilon(1e-12));
      CHECK(row->top1 == doctest::Approx(top1 / k).epsilon(1e-12));
    }
  }
  const auto one = small_corpus(1, 3);
  const std::vector<Technique> techs = {ochiai_technique()};
  CHECK_THROWS_AS(cross_project(one, techs, quick_options()), Error);
}

TEST_CASE("results do not depend on the worker count") {
  const auto corpus = small_corpus(2, 4);
  const std::vector<Technique> techs = {depgraph_technique(true), grace_technique()};
  const auto serial = leave_one_out(corpus, techs, quick_options(1)).to_csv();
  const auto parallel = leave_one_out(corpus, techs, quick_options(4)).to_csv();
  CHECK(serial == parallel);
  const auto cross1 = cross_project(corpus, techs, quick_options(1)).to_csv();
  const auto cross4 = cross_project(corpus, techs, quick_options(4)).to_csv();
  CHECK(cross1 == cross4);
}

TEST_CASE("csv layout") {
  EvaluationReport r;
  r.rows.push_back({"p0", "Ochiai", 2, 1, 2, 2, 2, 1.5, 2.25, 0});
  r.rows.push_back({"p1", "DepGraph", 2, 0.5, 1, 1, 2, 3.0, 3.0, 0});
  CHECK(r.to_csv() ==
        "project,technique,top1,top3,top5,top10,mfr,mar,misses\n"
        "p0,Ochiai,1,2,2,2,1.500,2.250,0\n"
        "p1,DepGraph,0.500,1,1,2,3.000,3.000,0\n");
}
