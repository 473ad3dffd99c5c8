#include "crowdbp/graph.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "crowdbp/error.hpp"
#include "crowdbp/prior.hpp"

namespace crowdbp {

namespace {

std::uint64_t pair_key(TaskId i, WorkerId u) { return (std::uint64_t{i} << 32) | u; }

// Counting sort of edge ids by one endpoint, each bucket ordered by the other endpoint.
template <typename Primary, typename Secondary>
void build_adjacency(const std::vector<Edge>& edges, std::size_t n_nodes, Primary primary, Secondary secondary,
                     std::vector<std::size_t>& offset, std::vector<EdgeId>& adj) {
  offset.assign(n_nodes + 1, 0);
  for (const Edge& e : edges) ++offset[primary(e) + 1];
  std::partial_sum(offset.begin(), offset.end(), offset.begin());
  adj.assign(edges.size(), 0);
  std::vector<std::size_t> cursor(offset.begin(), offset.end() - 1);
  for (EdgeId id = 0; id < edges.size(); ++id) adj[cursor[primary(edges[id])]++] = id;
  for (std::size_t v = 0; v < n_nodes; ++v) {
    std::sort(adj.begin() + static_cast<std::ptrdiff_t>(offset[v]), adj.begin() + static_cast<std::ptrdiff_t>(offset[v + 1]),
              [&](EdgeId a, EdgeId b) { return secondary(edges[a]) < secondary(edges[b]); });
  }
}

}  // namespace

AssignmentGraph::AssignmentGraph(std::size_t n_tasks, std::size_t n_workers, std::vector<Edge> edges)
    : n_tasks_(n_tasks), n_workers_(n_workers), edges_(std::move(edges)) {
  if (edges_.size() > std::numeric_limits<EdgeId>::max() - 1) fail(ErrorKind::parameter, "too many edges");
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const Edge& e = edges_[k];
    if (e.task >= n_tasks_ || e.worker >= n_workers_) {
      fail(ErrorKind::parameter, "edge " + std::to_string(k) + " references task " + std::to_string(e.task) +
                                     ", worker " + std::to_string(e.worker) + " outside the graph");
    }
  }
  build_adjacency(
      edges_, n_tasks_, [](const Edge& e) { return e.task; }, [](const Edge& e) { return e.worker; }, task_offset_,
      task_adj_);
  build_adjacency(
      edges_, n_workers_, [](const Edge& e) { return e.worker; }, [](const Edge& e) { return e.task; },
      worker_offset_, worker_adj_);
  for (std::size_t i = 0; i < n_tasks_; ++i) {
    auto adj = edges_of_task(static_cast<TaskId>(i));
    for (std::size_t k = 1; k < adj.size(); ++k) {
      if (edges_[adj[k]].worker == edges_[adj[k - 1]].worker) {
        fail(ErrorKind::parameter, "duplicate edge (task " + std::to_string(i) + ", worker " +
                                       std::to_string(edges_[adj[k]].worker) + ")");
      }
    }
  }
}

std::size_t AssignmentGraph::max_task_degree() const noexcept {
  std::size_t best = 0;
  for (std::size_t i = 0; i < n_tasks_; ++i) best = std::max(best, task_offset_[i + 1] - task_offset_[i]);
  return best;
}

std::size_t AssignmentGraph::max_worker_degree() const noexcept {
  std::size_t best = 0;
  for (std::size_t u = 0; u < n_workers_; ++u) best = std::max(best, worker_offset_[u + 1] - worker_offset_[u]);
  return best;
}

AssignmentGraph AssignmentGraph::edge_subgraph(std::span<const EdgeId> keep) const {
  std::vector<Edge> kept;
  kept.reserve(keep.size());
  for (EdgeId e : keep) kept.push_back(edges_.at(e));
  return AssignmentGraph(n_tasks_, n_workers_, std::move(kept));
}

EdgeId AssignmentGraph::find_edge(TaskId i, WorkerId u) const {
  auto adj = edges_of_task(i);
  auto it = std::lower_bound(adj.begin(), adj.end(), u,
                             [&](EdgeId e, WorkerId w) { return edges_[e].worker < w; });
  if (it != adj.end() && edges_[*it].worker == u) return *it;
  return static_cast<EdgeId>(edges_.size());
}

bool AssignmentGraph::is_forest() const {
  std::vector<std::size_t> parent(n_tasks_ + n_workers_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const Edge& e : edges_) {
    std::size_t a = find(e.task);
    std::size_t b = find(n_tasks_ + e.worker);
    if (a == b) return false;
    parent[a] = b;
  }
  return true;
}

AnswerMatrix::AnswerMatrix(std::vector<Label> answers) : answers_(std::move(answers)) {
  for (std::size_t k = 0; k < answers_.size(); ++k) {
    if (answers_[k] != 1 && answers_[k] != -1) {
      fail(ErrorKind::parameter, "answer on edge " + std::to_string(k) + " is not -1 or +1");
    }
  }
}

AnswerMatrix AnswerMatrix::negated() const {
  std::vector<Label> out(answers_.size());
  std::transform(answers_.begin(), answers_.end(), out.begin(), [](Label a) { return static_cast<Label>(-a); });
  return AnswerMatrix(std::move(out));
}

AnswerMatrix AnswerMatrix::subset(std::span<const EdgeId> keep) const {
  std::vector<Label> out;
  out.reserve(keep.size());
  for (EdgeId e : keep) out.push_back(answers_.at(e));
  return AnswerMatrix(std::move(out));
}

void check_dimensions(const AssignmentGraph& graph, const AnswerMatrix& answers) {
  if (answers.size() != graph.n_edges()) {
    fail(ErrorKind::parameter, "answer count " + std::to_string(answers.size()) + " does not match edge count " +
                                   std::to_string(graph.n_edges()));
  }
}

void check_dimensions(const AssignmentGraph& graph, const GroundTruth& truth) {
  if (truth.labels.size() != graph.n_tasks() || truth.reliabilities.size() != graph.n_workers()) {
    fail(ErrorKind::parameter, "ground truth dimensions do not match the graph");
  }
  for (Label s : truth.labels) {
    if (s != 1 && s != -1) fail(ErrorKind::parameter, "true label is not -1 or +1");
  }
  for (double p : truth.reliabilities) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::parameter, "reliability outside [0, 1]");
  }
}

AssignmentGraph generate_regular_bipartite(std::size_t n_tasks, std::size_t l, std::size_t r, Seed seed) {
  if (n_tasks == 0 || l == 0 || r == 0) fail(ErrorKind::parameter, "n, l and r must be at least 1");
  if ((n_tasks * l) % r != 0) {
    fail(ErrorKind::parameter, "n * l = " + std::to_string(n_tasks * l) + " is not divisible by r = " +
                                   std::to_string(r));
  }
  const std::size_t n_workers = n_tasks * l / r;
  if (r > n_tasks || l > n_workers) {
    fail(ErrorKind::parameter, "no simple (" + std::to_string(l) + ", " + std::to_string(r) +
                                   ")-regular graph exists on " + std::to_string(n_tasks) + " tasks");
  }
  const std::size_t n_edges = n_tasks * l;

  Rng rng = make_rng(seed);
  std::vector<WorkerId> worker_half(n_edges);
  for (std::size_t k = 0; k < n_edges; ++k) worker_half[k] = static_cast<WorkerId>(k / r);
  std::shuffle(worker_half.begin(), worker_half.end(), rng);

  std::vector<Edge> edges(n_edges);
  std::unordered_map<std::uint64_t, std::size_t> multiplicity;
  multiplicity.reserve(2 * n_edges);
  for (std::size_t k = 0; k < n_edges; ++k) {
    edges[k] = Edge{static_cast<TaskId>(k / l), worker_half[k]};
    ++multiplicity[pair_key(edges[k].task, edges[k].worker)];
  }

  // Remove parallel edges by degree-preserving switches with random partner
  // edges. A strict switch creates no new parallel edge. When strict switches
  // keep failing for one edge (possible in dense graphs), a relaxed switch may
  // move the defect onto the partner edge instead; the scan then repeats.
  const auto count = [&](std::uint64_t key) {
    const auto it = multiplicity.find(key);
    return it == multiplicity.end() ? std::size_t{0} : it->second;
  };
  constexpr std::size_t kStrictTries = 64;
  const std::size_t budget = kSwitchBudgetPerEdge * n_edges;
  std::size_t attempts = 0;
  std::uniform_int_distribution<std::size_t> pick(0, n_edges - 1);
  for (bool clean = false; !clean;) {
    clean = true;
    for (std::size_t k = 0; k < n_edges; ++k) {
      std::size_t tries = 0;
      while (count(pair_key(edges[k].task, edges[k].worker)) > 1) {
        clean = false;
        if (attempts++ == budget) {
          fail(ErrorKind::generation, "could not remove parallel edges within the switch budget of " +
                                          std::to_string(kSwitchBudgetPerEdge) + " attempts per edge");
        }
        ++tries;
        const std::size_t other = pick(rng);
        const Edge a = edges[k];
        const Edge b = edges[other];
        if (a.task == b.task || a.worker == b.worker) continue;
        const std::uint64_t new_a = pair_key(a.task, b.worker);
        const std::uint64_t new_b = pair_key(b.task, a.worker);
        if (count(new_a) > 0) continue;
        if (count(new_b) > 0 && tries <= kStrictTries) continue;
        --multiplicity[pair_key(a.task, a.worker)];
        --multiplicity[pair_key(b.task, b.worker)];
        edges[k].worker = b.worker;
        edges[other].worker = a.worker;
        ++multiplicity[new_a];
        ++multiplicity[new_b];
      }
    }
  }

  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.task != b.task ? a.task < b.task : a.worker < b.worker;
  });
  return AssignmentGraph(n_tasks, n_workers, std::move(edges));
}

GroundTruth sample_ground_truth(const AssignmentGraph& graph, const ReliabilityPrior& prior, Seed seed) {
  Rng rng = make_rng(seed);
  GroundTruth truth;
  truth.labels.resize(graph.n_tasks());
  for (Label& s : truth.labels) s = uniform01(rng) < 0.5 ? Label{1} : Label{-1};
  truth.reliabilities.resize(graph.n_workers());
  for (double& p : truth.reliabilities) p = prior.sample(rng);
  return truth;
}

AnswerMatrix sample_answers(const AssignmentGraph& graph, const GroundTruth& truth, Seed seed) {
  check_dimensions(graph, truth);
  Rng rng = make_rng(seed);
  std::vector<Label> answers(graph.n_edges());
  for (std::size_t k = 0; k < graph.n_edges(); ++k) {
    const Edge& e = graph.edges()[k];
    const Label s = truth.labels[e.task];
    answers[k] = uniform01(rng) < truth.reliabilities[e.worker] ? s : static_cast<Label>(-s);
  }
  return AnswerMatrix(std::move(answers));
}

}  // namespace crowdbp
