#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crowdbp/bp.hpp"
#include "crowdbp/graph.hpp"
#include "crowdbp/prior.hpp"

namespace crowdbp {

/// Largest task count accepted by the exact enumerators.
inline constexpr std::size_t kMaxEnumeratedTasks = 20;
/// Largest edge count accepted by exact_gain (answers are enumerated too).
inline constexpr std::size_t kMaxEnumeratedEdges = 12;

/// Exact posterior marginals P(s_i | A) by enumerating all 2^n labelings.
/// `clamped`, if non-empty, fixes task i to clamped[i] when it is nonzero.
std::vector<MessagePair> brute_force_marginals(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                               const ReliabilityPrior& prior, std::span<const Label> clamped = {});

/// Breadth-first spanning tree of the root's component.
struct SpanningTree {
  TaskId root = 0;
  /// Tree edges in discovery order.
  std::vector<EdgeId> tree_edges;
  /// Tasks incident to a component edge outside the tree, ascending.
  std::vector<TaskId> boundary_tasks;
};

/// Neighbours are visited in ascending id order, so the tree is deterministic.
SpanningTree extract_bfs_tree(const AssignmentGraph& graph, TaskId root);

/// Oracle-Task: for each task, exact tree BP on its BFS tree with every
/// boundary task clamped to its true label. Answers on non-tree edges are unused.
EstimateReport oracle_task_estimate(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                    const ReliabilityPrior& prior, std::span<const Label> truth_labels);

/// Exact gain E|P(s_root = +1 | A, s_clamped) - 1/2| of the MAP estimator, in
/// expectation over labels, reliabilities and answers. Evaluated with exact
/// rational arithmetic over a discrete prior and converted to double at the end,
/// so comparisons between two gains carry no rounding error beyond monotone
/// rounding of the final values.
double exact_gain(const AssignmentGraph& graph, const ReliabilityPrior& prior, TaskId root,
                  std::span<const TaskId> clamped_tasks = {});

struct MonotonicityResult {
  double delta_full;
  double delta_subset;
};

/// Exact gains of the MAP estimator for `root` using all answers versus only `edge_subset`.
MonotonicityResult subset_monotonicity_check(const AssignmentGraph& graph, const ReliabilityPrior& prior,
                                             std::span<const EdgeId> edge_subset, TaskId root = 0);

/// The depth-`depth` ball around a task: edges with both endpoints within
/// `depth` hops, and the tasks at distance exactly `depth`.
struct Ball {
  std::vector<EdgeId> edges;
  std::vector<TaskId> frontier;
};

Ball ball_around(const AssignmentGraph& graph, TaskId root, std::size_t depth);

}  // namespace crowdbp
