#include <set>

#include "crowdbp/error.hpp"
#include "crowdbp/graph.hpp"
#include "crowdbp/prior.hpp"
#include "doctest.h"

using namespace crowdbp;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::parameter;
}

void check_regular(const AssignmentGraph& g, std::size_t l, std::size_t r) {
  for (TaskId i = 0; i < g.n_tasks(); ++i) REQUIRE(g.task_degree(i) == l);
  for (WorkerId u = 0; u < g.n_workers(); ++u) REQUIRE(g.worker_degree(u) == r);
  std::set<std::pair<TaskId, WorkerId>> seen;
  for (const Edge& e : g.edges()) REQUIRE(seen.insert({e.task, e.worker}).second);
}

}  // namespace

TEST_CASE("small regular graph has the forced counts") {
  const auto g = generate_regular_bipartite(4, 2, 2, 0);
  CHECK(g.n_workers() == 4);
  CHECK(g.n_edges() == 8);
  check_regular(g, 2, 2);
}

TEST_CASE("n=200, l=r=5 gives 200 workers and 1000 edges") {
  const auto g = generate_regular_bipartite(200, 5, 5, 17);
  CHECK(g.n_workers() == 200);
  CHECK(g.n_edges() == 1000);
  check_regular(g, 5, 5);
}

TEST_CASE("divisibility violation is a parameter error") {
  CHECK(kind_of([] { generate_regular_bipartite(3, 2, 4, 0); }) == ErrorKind::parameter);
  CHECK(kind_of([] { generate_regular_bipartite(0, 2, 2, 0); }) == ErrorKind::parameter);
  // Divisible but no simple graph: 2 tasks cannot give a worker 3 distinct tasks.
  CHECK(kind_of([] { generate_regular_bipartite(2, 3, 3, 0); }) == ErrorKind::parameter);
}

TEST_CASE("degree regularity holds across sizes and seeds") {
  const std::size_t shapes[][3] = {{200, 1, 5}, {200, 25, 5}, {1000, 20, 5}, {198, 5, 9}, {201, 5, 3},
                                   {10, 10, 10}, {12, 3, 4}, {1000, 2, 5}};
  for (const auto& s : shapes) {
    for (Seed seed = 0; seed < 5; ++seed) {
      CAPTURE(s[0]);
      CAPTURE(s[1]);
      CAPTURE(s[2]);
      check_regular(generate_regular_bipartite(s[0], s[1], s[2], seed), s[1], s[2]);
    }
  }
}

TEST_CASE("complete bipartite shape is reachable") {
  const auto g = generate_regular_bipartite(6, 6, 6, 3);
  check_regular(g, 6, 6);
  CHECK(g.n_edges() == 36);
}

TEST_CASE("generation, truth and answers are deterministic per seed") {
  const auto prior = spammer_hammer();
  const auto g1 = generate_regular_bipartite(200, 5, 5, 99);
  const auto g2 = generate_regular_bipartite(200, 5, 5, 99);
  CHECK(std::equal(g1.edges().begin(), g1.edges().end(), g2.edges().begin(), g2.edges().end()));
  const auto g3 = generate_regular_bipartite(200, 5, 5, 100);
  CHECK_FALSE(std::equal(g1.edges().begin(), g1.edges().end(), g3.edges().begin(), g3.edges().end()));
  const auto t1 = sample_ground_truth(g1, prior, 5);
  const auto t2 = sample_ground_truth(g1, prior, 5);
  CHECK(t1 == t2);
  CHECK(sample_answers(g1, t1, 8) == sample_answers(g1, t2, 8));
}

TEST_CASE("spammer-hammer draws only its atoms, in the right proportion") {
  const auto g = generate_regular_bipartite(10000, 1, 1, 1);
  const auto truth = sample_ground_truth(g, spammer_hammer(), 2);
  std::size_t hammers = 0;
  for (double p : truth.reliabilities) {
    REQUIRE((p == 0.5 || p == 0.9));
    hammers += p == 0.9 ? 1 : 0;
  }
  CHECK(std::abs(static_cast<double>(hammers) / 10000.0 - 0.5) <= 0.02);
  std::size_t plus = 0;
  for (Label s : truth.labels) plus += s > 0 ? 1 : 0;
  CHECK(std::abs(static_cast<double>(plus) / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("point-mass prior at 1 gives perfect workers") {
  const auto g = generate_regular_bipartite(100, 3, 3, 4);
  const auto truth = sample_ground_truth(g, parse_prior("atoms:1=1"), 4);
  for (double p : truth.reliabilities) CHECK(p == 1.0);
  const auto answers = sample_answers(g, truth, 4);
  for (EdgeId e = 0; e < g.n_edges(); ++e) CHECK(answers[e] == truth.labels[g.edge(e).task]);
}

TEST_CASE("perfect adversaries always answer the opposite label") {
  const auto g = generate_regular_bipartite(100, 3, 3, 4);
  auto truth = sample_ground_truth(g, spammer_hammer(), 4);
  std::fill(truth.reliabilities.begin(), truth.reliabilities.end(), 0.0);
  const auto answers = sample_answers(g, truth, 4);
  for (EdgeId e = 0; e < g.n_edges(); ++e) CHECK(answers[e] == -truth.labels[g.edge(e).task]);
}

TEST_CASE("answer match rate follows the reliability") {
  const auto g = generate_regular_bipartite(10000, 1, 1, 6);
  auto truth = sample_ground_truth(g, spammer_hammer(), 6);
  std::fill(truth.reliabilities.begin(), truth.reliabilities.end(), 0.9);
  const auto answers = sample_answers(g, truth, 7);
  std::size_t match = 0;
  for (EdgeId e = 0; e < g.n_edges(); ++e) match += answers[e] == truth.labels[g.edge(e).task] ? 1 : 0;
  CHECK(std::abs(static_cast<double>(match) / 10000.0 - 0.9) <= 0.01);
}

TEST_CASE("graph construction validates its input") {
  CHECK(kind_of([] { AssignmentGraph(2, 2, {{0, 0}, {2, 1}}); }) == ErrorKind::parameter);
  CHECK(kind_of([] { AssignmentGraph(2, 2, {{0, 0}, {0, 0}}); }) == ErrorKind::parameter);
  CHECK(kind_of([] { AnswerMatrix({1, 0}); }) == ErrorKind::parameter);
  const AssignmentGraph g(2, 2, {{0, 0}, {1, 0}, {0, 1}});
  CHECK(kind_of([&] { check_dimensions(g, AnswerMatrix({1, 1})); }) == ErrorKind::parameter);
  GroundTruth bad{{1, 1}, {0.5, 1.5}};
  CHECK(kind_of([&] { check_dimensions(g, bad); }) == ErrorKind::parameter);
}

TEST_CASE("adjacency is consistent with the edge list") {
  const AssignmentGraph g(3, 2, {{2, 1}, {0, 0}, {1, 1}, {0, 1}});
  std::size_t total = 0;
  for (TaskId i = 0; i < g.n_tasks(); ++i) {
    for (EdgeId e : g.edges_of_task(i)) CHECK(g.edge(e).task == i);
    total += g.task_degree(i);
  }
  CHECK(total == g.n_edges());
  total = 0;
  for (WorkerId u = 0; u < g.n_workers(); ++u) {
    for (EdgeId e : g.edges_of_worker(u)) CHECK(g.edge(e).worker == u);
    total += g.worker_degree(u);
  }
  CHECK(total == g.n_edges());
  CHECK(g.find_edge(0, 1) == 3);
  CHECK(g.find_edge(2, 0) == g.n_edges());
  CHECK(g.max_task_degree() == 2);
  CHECK(g.max_worker_degree() == 3);
  CHECK(g.is_forest());
  CHECK_FALSE(AssignmentGraph(2, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}}).is_forest());
}

TEST_CASE("edge subgraph and answer subset stay aligned") {
  const AssignmentGraph g(2, 2, {{0, 0}, {0, 1}, {1, 0}});
  const AnswerMatrix a({1, -1, 1});
  const std::vector<EdgeId> keep{2, 1};
  const auto sub = g.edge_subgraph(keep);
  const auto sa = a.subset(keep);
  REQUIRE(sub.n_edges() == 2);
  CHECK(sub.edge(0) == Edge{1, 0});
  CHECK(sa[0] == 1);
  CHECK(sa[1] == -1);
  CHECK(a.negated().negated() == a);
}

TEST_CASE("seed derivation separates streams") {
  std::set<Seed> seeds;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seeds.insert(derive_seed(7, {a, b}));
  }
  CHECK(seeds.size() == 400);
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
  CHECK(derive_seed(7, Stage::graph) != derive_seed(7, Stage::truth));
  Rng rng = make_rng(1);
  for (int k = 0; k < 10000; ++k) {
    const double u = uniform01(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}
