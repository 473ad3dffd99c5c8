#include <algorithm>
#include <random>
#include <sstream>

#include "crowdbp/dataset.hpp"
#include "crowdbp/error.hpp"
#include "doctest.h"
#include "reference.hpp"

using namespace crowdbp;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_dataset(in, "mem");
}

std::string format_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data_format);
    return e.what();
  }
  FAIL("expected a data_format error");
  return {};
}

// Fixture with per-worker reliabilities and answers drawn from them.
Dataset fixture(std::mt19937_64& rng, std::size_t n_tasks, std::size_t n_workers, std::size_t l) {
  AssignmentGraph graph = ref::left_regular(rng, n_tasks, n_workers, l);
  GroundTruth truth;
  std::uniform_real_distribution<double> reliability(0.3, 0.95);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n_tasks; ++i) truth.labels.push_back(coin(rng) ? 1 : -1);
  for (std::size_t u = 0; u < n_workers; ++u) truth.reliabilities.push_back(reliability(rng));
  const Seed seed = rng();
  AnswerMatrix answers = sample_answers(graph, truth, seed);
  return make_dataset(std::move(graph), std::move(answers), &truth);
}

}  // namespace

TEST_CASE("three-row file") {
  const Dataset d = parse("t1,w1,+1\nt1,w2,-1\nt2,w1,+1\n");
  CHECK(d.graph.n_tasks() == 2);
  CHECK(d.graph.n_workers() == 2);
  CHECK(d.graph.n_edges() == 3);
  CHECK(d.answers[0] == 1);
  CHECK(d.answers[1] == -1);
  CHECK(d.task_names == std::vector<std::string>{"t1", "t2"});
  CHECK(d.worker_names == std::vector<std::string>{"w1", "w2"});
  CHECK_FALSE(d.truth_labels);
  CHECK_FALSE(d.measured_reliabilities);
}

TEST_CASE("header, truth and reliability columns") {
  const Dataset d = parse(
      "task,worker,answer,truth,reliability\n"
      "a,x,1,1,0.9\n"
      "a,y,-1,1,0.25\n"
      "b,x,-1,-1,0.9\n");
  REQUIRE(d.truth_labels);
  CHECK(*d.truth_labels == std::vector<Label>{1, -1});
  REQUIRE(d.measured_reliabilities);
  CHECK(*d.measured_reliabilities == std::vector<double>{0.9, 0.25});
  const Dataset no_header = parse("a,x,1,1\nb,x,-1,-1\n");
  REQUIRE(no_header.truth_labels);
  CHECK_FALSE(no_header.measured_reliabilities);
}

TEST_CASE("zero-one alphabet") {
  const Dataset d = parse("# alphabet=01\nt1,w1,1\nt1,w2,0\n");
  CHECK(d.answers[0] == 1);
  CHECK(d.answers[1] == -1);
  CHECK(format_error("# alphabet=01\nt1,w1,-1\n").find("mem:2") != std::string::npos);
  CHECK(format_error("t1,w1,0\n").find("mem:1") != std::string::npos);
  format_error("# alphabet=binary\nt1,w1,1\n");
}

TEST_CASE("malformed rows report their line") {
  CHECK(format_error("t1,w1,+1\nt2,w1\n").find("mem:2") != std::string::npos);
  CHECK(format_error("t1,w1,+1\n\nt2,w1,yes\n").find("mem:3") != std::string::npos);
  CHECK(format_error("t1,w1,+1,+1,1.5\n").find("mem:1") != std::string::npos);
  CHECK(format_error("t1,w1,+1,+1\nt2,w1,+1\n").find("mem:2") != std::string::npos);
}

TEST_CASE("duplicate pairs and conflicting columns") {
  const std::string dup = format_error("t1,w1,+1\nt2,w1,+1\nt1,w1,-1\n");
  CHECK(dup.find("mem:3") != std::string::npos);
  CHECK(format_error("t1,w1,+1,+1\nt1,w2,+1,-1\n").find("mem:2") != std::string::npos);
  CHECK(format_error("t1,w1,+1,+1,0.9\nt2,w1,+1,+1,0.8\n").find("mem:2") != std::string::npos);
}

TEST_CASE("quoted fields and whitespace") {
  const Dataset d = parse("\"task, one\" , w1 , +1\n\"say \"\"hi\"\"\",w1,-1\n");
  CHECK(d.task_names == std::vector<std::string>{"task, one", "say \"hi\""});
  CHECK(d.graph.n_workers() == 1);
  CHECK(format_error("t1,w1,+1\n\"t2\"x,w1,+1\n").find("mem:2") != std::string::npos);
  CHECK(format_error("\"t1,w1,+1\n").find("mem:1") != std::string::npos);
}

TEST_CASE("write then read round trip") {
  std::mt19937_64 rng(4);
  const Dataset d = fixture(rng, 30, 12, 4);
  std::stringstream buffer;
  write_dataset(buffer, d);
  const Dataset back = read_dataset(buffer, "round");
  CHECK(back.graph.n_tasks() == d.graph.n_tasks());
  CHECK(back.graph.n_workers() == d.graph.n_workers());
  REQUIRE(back.graph.n_edges() == d.graph.n_edges());
  for (EdgeId e = 0; e < d.graph.n_edges(); ++e) {
    const auto& a = d.graph.edge(e);
    const auto& b = back.graph.edge(e);
    CHECK(back.task_names[b.task] == d.task_names[a.task]);
    CHECK(back.worker_names[b.worker] == d.worker_names[a.worker]);
    CHECK(back.answers[e] == d.answers[e]);
  }
  REQUIRE(back.truth_labels);
  REQUIRE(back.measured_reliabilities);
  for (TaskId i = 0; i < d.graph.n_tasks(); ++i) {
    for (TaskId j = 0; j < back.graph.n_tasks(); ++j) {
      if (back.task_names[j] == d.task_names[i]) CHECK((*back.truth_labels)[j] == (*d.truth_labels)[i]);
    }
  }
  for (WorkerId u = 0; u < d.graph.n_workers(); ++u) {
    for (WorkerId v = 0; v < back.graph.n_workers(); ++v) {
      if (back.worker_names[v] == d.worker_names[u]) {
        CHECK((*back.measured_reliabilities)[v] == (*d.measured_reliabilities)[u]);
      }
    }
  }
}

TEST_CASE("SIM and TEMP shaped fixtures") {
  std::mt19937_64 rng(2013);
  const Dataset sim = fixture(rng, 50, 28, 5);
  CHECK(sim.graph.n_tasks() == 50);
  CHECK(sim.graph.n_workers() == 28);
  const Dataset temp = fixture(rng, 462, 76, 10);
  CHECK(temp.graph.n_tasks() == 462);
  CHECK(temp.graph.n_workers() == 76);
  std::stringstream buffer;
  write_dataset(buffer, temp);
  const Dataset back = read_dataset(buffer);
  CHECK(back.graph.n_tasks() == 462);
  CHECK(back.graph.n_workers() == 76);
  CHECK(back.graph.n_edges() == 4620);
}

TEST_CASE("subsampling") {
  std::mt19937_64 rng(8);
  const Dataset d = fixture(rng, 40, 15, 6);

  const Dataset all = subsample_assignments(d, 6, 1);
  CHECK(all.graph.n_edges() == d.graph.n_edges());
  CHECK(all.graph.n_workers() == d.graph.n_workers());

  const Dataset one = subsample_assignments(d, 1, 1);
  for (TaskId i = 0; i < one.graph.n_tasks(); ++i) CHECK(one.graph.task_degree(i) == 1);
  for (WorkerId u = 0; u < one.graph.n_workers(); ++u) CHECK(one.graph.worker_degree(u) >= 1);
  CHECK(one.worker_names.size() == one.graph.n_workers());
  REQUIRE(one.measured_reliabilities);
  CHECK(one.measured_reliabilities->size() == one.graph.n_workers());

  const Dataset again = subsample_assignments(d, 3, 99);
  const Dataset same = subsample_assignments(d, 3, 99);
  CHECK(std::ranges::equal(again.graph.edges(), same.graph.edges()));
  CHECK(again.answers == same.answers);

  // Kept answers are the original answers of the same (task, worker) pair.
  for (EdgeId e = 0; e < again.graph.n_edges(); ++e) {
    const auto& kept = again.graph.edge(e);
    bool found = false;
    for (EdgeId f = 0; f < d.graph.n_edges(); ++f) {
      const auto& orig = d.graph.edge(f);
      if (d.task_names[orig.task] == again.task_names[kept.task] &&
          d.worker_names[orig.worker] == again.worker_names[kept.worker]) {
        found = true;
        CHECK(d.answers[f] == again.answers[e]);
      }
    }
    CHECK(found);
  }
  CHECK_THROWS_AS(subsample_assignments(d, 0, 1), Error);
}

TEST_CASE("subsampled edges are uniform within a task") {
  // A single task with four workers, keeping two: each worker is kept half the time.
  const AssignmentGraph g(1, 4, {{0, 0}, {0, 1}, {0, 2}, {0, 3}});
  const Dataset d = make_dataset(g, AnswerMatrix({1, 1, 1, 1}), nullptr);
  std::vector<int> kept(4, 0);
  const int rounds = 4000;
  for (int s = 0; s < rounds; ++s) {
    const Dataset sub = subsample_assignments(d, 2, static_cast<Seed>(s));
    for (const auto& name : sub.worker_names) ++kept[static_cast<std::size_t>(name[1] - '0')];
  }
  // sd of a count with p = 1/2 over 4000 rounds is about 32.
  for (int c : kept) CHECK(std::abs(c - rounds / 2) < 160);
}

TEST_CASE("agreement and reference reliabilities") {
  const Dataset d = parse("t1,w1,+1,+1\nt2,w1,-1,+1\nt1,w2,+1,+1\n");
  const auto rates = agreement_rates(d.graph, d.answers, *d.truth_labels);
  CHECK(rates == std::vector<double>{0.5, 1.0});
  CHECK(*reference_reliabilities(d) == rates);
  const Dataset measured = parse("t1,w1,+1,+1,0.7\nt2,w1,-1,+1,0.7\n");
  CHECK(*reference_reliabilities(measured) == std::vector<double>{0.7});
  CHECK_FALSE(reference_reliabilities(parse("t1,w1,+1\n")));
}
