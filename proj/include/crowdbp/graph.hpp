#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "crowdbp/rng.hpp"

namespace crowdbp {

class ReliabilityPrior;

using TaskId = std::uint32_t;
using WorkerId = std::uint32_t;
using EdgeId = std::uint32_t;

/// A binary label or answer. Always exactly -1 or +1.
using Label = std::int8_t;

struct Edge {
  TaskId task;
  WorkerId worker;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Bipartite task-worker assignment graph G = (V, W, E).
///
/// Edges keep the order given at construction. Per-task and per-worker
/// adjacency is stored as lists of edge ids in ascending order of the
/// opposite endpoint, so the graph can be walked deterministically.
/// Degrees are per node; regular and irregular graphs share this type.
class AssignmentGraph {
 public:
  AssignmentGraph() = default;

  /// Validates ids and rejects duplicate (task, worker) pairs.
  AssignmentGraph(std::size_t n_tasks, std::size_t n_workers, std::vector<Edge> edges);

  std::size_t n_tasks() const noexcept { return n_tasks_; }
  std::size_t n_workers() const noexcept { return n_workers_; }
  std::size_t n_edges() const noexcept { return edges_.size(); }

  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }

  /// Edge ids incident to task i (the set M_i, as edges).
  std::span<const EdgeId> edges_of_task(TaskId i) const {
    return {task_adj_.data() + task_offset_[i], task_adj_.data() + task_offset_[i + 1]};
  }
  /// Edge ids incident to worker u (the set N_u, as edges).
  std::span<const EdgeId> edges_of_worker(WorkerId u) const {
    return {worker_adj_.data() + worker_offset_[u], worker_adj_.data() + worker_offset_[u + 1]};
  }

  std::size_t task_degree(TaskId i) const { return task_offset_[i + 1] - task_offset_[i]; }
  std::size_t worker_degree(WorkerId u) const { return worker_offset_[u + 1] - worker_offset_[u]; }
  std::size_t max_task_degree() const noexcept;
  std::size_t max_worker_degree() const noexcept;

  /// Graph with the same node sets and only the listed edges, in the listed order.
  AssignmentGraph edge_subgraph(std::span<const EdgeId> keep) const;

  /// Returns the edge id for (task, worker), or n_edges() when absent.
  EdgeId find_edge(TaskId i, WorkerId u) const;

  /// True when the graph has no cycles.
  bool is_forest() const;

 private:
  std::size_t n_tasks_ = 0;
  std::size_t n_workers_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> task_offset_{0};
  std::vector<EdgeId> task_adj_;
  std::vector<std::size_t> worker_offset_{0};
  std::vector<EdgeId> worker_adj_;
};

/// Observed answers A_iu, one per edge, aligned with AssignmentGraph::edges().
class AnswerMatrix {
 public:
  AnswerMatrix() = default;
  explicit AnswerMatrix(std::vector<Label> answers);

  std::size_t size() const noexcept { return answers_.size(); }
  Label operator[](EdgeId e) const { return answers_[e]; }
  std::span<const Label> values() const noexcept { return answers_; }

  /// Every answer negated.
  AnswerMatrix negated() const;
  /// Answers restricted to the listed edges, in the listed order.
  AnswerMatrix subset(std::span<const EdgeId> keep) const;

  friend bool operator==(const AnswerMatrix&, const AnswerMatrix&) = default;

 private:
  std::vector<Label> answers_;
};

/// True labels s_i and worker reliabilities p_u.
struct GroundTruth {
  std::vector<Label> labels;
  std::vector<double> reliabilities;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Throws when answers or truth do not match the graph dimensions.
void check_dimensions(const AssignmentGraph& graph, const AnswerMatrix& answers);
void check_dimensions(const AssignmentGraph& graph, const GroundTruth& truth);

/// Number of times the configuration model may attempt an edge switch to
/// remove a parallel edge before generation gives up.
inline constexpr std::size_t kSwitchBudgetPerEdge = 1000;

/// Random (l, r)-regular bipartite graph from the configuration model.
/// Parallel edges produced by the random pairing are removed with
/// degree-preserving edge switches. Edges are returned sorted by (task, worker).
AssignmentGraph generate_regular_bipartite(std::size_t n_tasks, std::size_t l, std::size_t r, Seed seed);

GroundTruth sample_ground_truth(const AssignmentGraph& graph, const ReliabilityPrior& prior, Seed seed);

AnswerMatrix sample_answers(const AssignmentGraph& graph, const GroundTruth& truth, Seed seed);

inline Label sign_label(double score) noexcept { return score >= 0.0 ? Label{1} : Label{-1}; }

}  // namespace crowdbp
