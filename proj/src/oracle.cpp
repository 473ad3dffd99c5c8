#include "crowdbp/oracle.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <deque>
#include <string>

#include "crowdbp/error.hpp"
#include "log_accumulator.hpp"

namespace crowdbp {

namespace {

using detail::LogAccumulator;

struct Component {
  std::vector<TaskId> tasks;
  std::vector<WorkerId> workers;
  std::vector<EdgeId> edges;
};

Component component_of(const AssignmentGraph& graph, TaskId root) {
  Component comp;
  std::vector<char> seen_task(graph.n_tasks(), 0);
  std::vector<char> seen_worker(graph.n_workers(), 0);
  std::deque<TaskId> queue{root};
  seen_task[root] = 1;
  while (!queue.empty()) {
    const TaskId i = queue.front();
    queue.pop_front();
    comp.tasks.push_back(i);
    for (EdgeId e : graph.edges_of_task(i)) {
      const WorkerId u = graph.edge(e).worker;
      if (seen_worker[u]) continue;
      seen_worker[u] = 1;
      comp.workers.push_back(u);
      for (EdgeId f : graph.edges_of_worker(u)) {
        const TaskId j = graph.edge(f).task;
        if (!seen_task[j]) {
          seen_task[j] = 1;
          queue.push_back(j);
        }
      }
    }
  }
  for (TaskId i : comp.tasks) {
    for (EdgeId e : graph.edges_of_task(i)) comp.edges.push_back(e);
  }
  std::sort(comp.tasks.begin(), comp.tasks.end());
  std::sort(comp.workers.begin(), comp.workers.end());
  std::sort(comp.edges.begin(), comp.edges.end());
  return comp;
}

}  // namespace

std::vector<MessagePair> brute_force_marginals(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                               const ReliabilityPrior& prior, std::span<const Label> clamped) {
  check_dimensions(graph, answers);
  const std::size_t n = graph.n_tasks();
  if (n > kMaxEnumeratedTasks) {
    fail(ErrorKind::size, "brute-force enumeration is limited to " + std::to_string(kMaxEnumeratedTasks) + " tasks");
  }
  if (!clamped.empty() && clamped.size() != n) fail(ErrorKind::parameter, "clamp vector must have one entry per task");
  const FactorTable factors(prior, graph.max_worker_degree());

  std::vector<LogAccumulator> plus(n);
  std::vector<LogAccumulator> minus(n);
  std::vector<Label> s(n);
  std::vector<std::size_t> agree(graph.n_workers());
  for (std::uint64_t config = 0; config < (std::uint64_t{1} << n); ++config) {
    bool consistent = true;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = (config >> i) & 1U ? Label{1} : Label{-1};
      if (!clamped.empty() && clamped[i] != 0 && clamped[i] != s[i]) consistent = false;
    }
    if (!consistent) continue;
    std::fill(agree.begin(), agree.end(), 0);
    for (EdgeId e = 0; e < graph.n_edges(); ++e) {
      if (answers[e] == s[graph.edge(e).task]) ++agree[graph.edge(e).worker];
    }
    double log_joint = 0.0;
    for (WorkerId u = 0; u < graph.n_workers(); ++u) {
      log_joint += factors.log_value(agree[u], graph.worker_degree(u));
    }
    for (std::size_t i = 0; i < n; ++i) (s[i] > 0 ? plus[i] : minus[i]).add(log_joint);
  }

  std::vector<MessagePair> marginals(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = normalize_log_pair(plus[i].value(), minus[i].value());
    if (!m) fail(ErrorKind::numeric_degeneracy, "answers have zero probability under the prior");
    marginals[i] = *m;
  }
  return marginals;
}

SpanningTree extract_bfs_tree(const AssignmentGraph& graph, TaskId root) {
  if (root >= graph.n_tasks()) fail(ErrorKind::parameter, "root task out of range");
  SpanningTree tree;
  tree.root = root;
  std::vector<char> seen_task(graph.n_tasks(), 0);
  std::vector<char> seen_worker(graph.n_workers(), 0);
  std::vector<char> in_tree(graph.n_edges(), 0);
  std::vector<TaskId> tasks;

  // Tasks and workers alternate in the queue; `true` marks a task.
  std::deque<std::pair<bool, std::uint32_t>> queue{{true, root}};
  seen_task[root] = 1;
  while (!queue.empty()) {
    const auto [is_task, id] = queue.front();
    queue.pop_front();
    if (is_task) {
      tasks.push_back(id);
      for (EdgeId e : graph.edges_of_task(id)) {
        const WorkerId u = graph.edge(e).worker;
        if (seen_worker[u]) continue;
        seen_worker[u] = 1;
        in_tree[e] = 1;
        tree.tree_edges.push_back(e);
        queue.emplace_back(false, u);
      }
    } else {
      for (EdgeId e : graph.edges_of_worker(id)) {
        const TaskId j = graph.edge(e).task;
        if (seen_task[j]) continue;
        seen_task[j] = 1;
        in_tree[e] = 1;
        tree.tree_edges.push_back(e);
        queue.emplace_back(true, j);
      }
    }
  }
  for (TaskId i : tasks) {
    for (EdgeId e : graph.edges_of_task(i)) {
      if (!in_tree[e]) {
        tree.boundary_tasks.push_back(i);
        break;
      }
    }
  }
  std::sort(tree.boundary_tasks.begin(), tree.boundary_tasks.end());
  return tree;
}

// Exact BP on each root's BFS tree reduces to one leaves-to-root pass: tree
// edges are stored in discovery order, so walking them backwards visits every
// node after all of its children.
EstimateReport oracle_task_estimate(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                    const ReliabilityPrior& prior, std::span<const Label> truth_labels) {
  check_dimensions(graph, answers);
  if (truth_labels.size() != graph.n_tasks()) fail(ErrorKind::parameter, "one true label per task is required");
  const WorkerKernel kernel(prior, graph.max_worker_degree());

  std::vector<char> clamped(graph.n_tasks(), 0);
  std::vector<double> task_log_ratio(graph.n_tasks(), 0.0);
  std::vector<std::vector<Label>> child_answers(graph.n_workers());
  std::vector<std::vector<double>> child_x(graph.n_workers());
  std::vector<double> margins(graph.n_tasks(), 0.0);

  for (TaskId root = 0; root < graph.n_tasks(); ++root) {
    const SpanningTree tree = extract_bfs_tree(graph, root);
    for (TaskId j : tree.boundary_tasks) clamped[j] = 1;

    // Parent/child orientation: a worker's parent edge is the first tree edge
    // touching it, likewise for tasks.
    std::vector<char> worker_has_parent(graph.n_workers(), 0);
    std::vector<char> task_has_parent(graph.n_tasks(), 0);
    std::vector<char> child_is_worker(tree.tree_edges.size(), 0);
    task_has_parent[root] = 1;
    for (std::size_t k = 0; k < tree.tree_edges.size(); ++k) {
      const Edge& edge = graph.edge(tree.tree_edges[k]);
      if (!worker_has_parent[edge.worker] && task_has_parent[edge.task]) {
        worker_has_parent[edge.worker] = 1;
        child_is_worker[k] = 1;
      } else {
        task_has_parent[edge.task] = 1;
      }
    }

    for (std::size_t k = tree.tree_edges.size(); k-- > 0;) {
      const EdgeId e = tree.tree_edges[k];
      const Edge& edge = graph.edge(e);
      if (child_is_worker[k]) {
        const auto raw = kernel.message(answers[e], child_answers[edge.worker], child_x[edge.worker]);
        const auto m = normalize_log_pair(raw.plus, raw.minus);
        if (!m) {
          fail(ErrorKind::numeric_degeneracy, "oracle-task: all-zero message on edge " + std::to_string(e));
        }
        task_log_ratio[edge.task] += std::log(m->plus) - std::log(m->minus);
      } else {
        const double x = clamped[edge.task] ? static_cast<double>(truth_labels[edge.task])
                                            : pair_from_log_ratio(task_log_ratio[edge.task]).magnetization();
        child_answers[edge.worker].push_back(answers[e]);
        child_x[edge.worker].push_back(x);
      }
    }
    margins[root] = pair_from_log_ratio(task_log_ratio[root]).magnetization();

    for (EdgeId e : tree.tree_edges) {
      const Edge& edge = graph.edge(e);
      task_log_ratio[edge.task] = 0.0;
      child_answers[edge.worker].clear();
      child_x[edge.worker].clear();
    }
    task_log_ratio[root] = 0.0;
    for (TaskId j : tree.boundary_tasks) clamped[j] = 0;
  }
  return report_from_margins(std::move(margins), 0, true, 0.0);
}

double exact_gain(const AssignmentGraph& graph, const ReliabilityPrior& prior, TaskId root,
                  std::span<const TaskId> clamped_tasks) {
  if (!prior.is_discrete()) fail(ErrorKind::parameter, "exact gain needs a discrete prior");
  if (root >= graph.n_tasks()) fail(ErrorKind::parameter, "root task out of range");
  const Component comp = component_of(graph, root);
  if (comp.edges.size() > kMaxEnumeratedEdges || comp.tasks.size() > kMaxEnumeratedTasks) {
    fail(ErrorKind::size, "exact gain is limited to " + std::to_string(kMaxEnumeratedEdges) + " edges");
  }

  // Local indices within the root's component.
  std::vector<std::size_t> task_index(graph.n_tasks(), 0);
  for (std::size_t k = 0; k < comp.tasks.size(); ++k) task_index[comp.tasks[k]] = k;
  std::vector<std::size_t> worker_index(graph.n_workers(), 0);
  for (std::size_t k = 0; k < comp.workers.size(); ++k) worker_index[comp.workers[k]] = k;
  std::vector<char> is_clamped(comp.tasks.size(), 0);
  for (TaskId j : clamped_tasks) {
    if (j == root) fail(ErrorKind::parameter, "the root task cannot be clamped");
    if (j < graph.n_tasks() && std::binary_search(comp.tasks.begin(), comp.tasks.end(), j)) {
      is_clamped[task_index[j]] = 1;
    }
  }
  std::vector<std::size_t> free_tasks;
  std::vector<std::size_t> fixed_tasks;
  for (std::size_t k = 0; k < comp.tasks.size(); ++k) (is_clamped[k] ? fixed_tasks : free_tasks).push_back(k);
  const std::size_t root_local = task_index[root];

  // Exact factor table f(c, r) = sum_a w_a p_a^c (1 - p_a)^(r - c).
  std::vector<std::size_t> degree(comp.workers.size(), 0);
  for (EdgeId e : comp.edges) ++degree[worker_index[graph.edge(e).worker]];
  const std::size_t r_max = degree.empty() ? 0 : *std::max_element(degree.begin(), degree.end());
  // Weights are renormalized exactly; the double weights need not sum to 1.
  mpq_class weight_sum = 0;
  for (const Atom& a : prior.atoms()) weight_sum += mpq_class(a.weight);
  std::vector<std::vector<mpq_class>> factor(r_max + 1);
  for (std::size_t r = 0; r <= r_max; ++r) {
    factor[r].resize(r + 1);
    for (std::size_t c = 0; c <= r; ++c) {
      mpq_class total = 0;
      for (const Atom& a : prior.atoms()) {
        const mpq_class p(a.p);
        mpq_class term = mpq_class(a.weight) / weight_sum;
        for (std::size_t t = 0; t < c; ++t) term *= p;
        for (std::size_t t = c; t < r; ++t) term *= (1 - p);
        total += term;
      }
      factor[r][c] = total;
    }
  }

  struct LocalEdge {
    std::size_t task;
    std::size_t worker;
  };
  std::vector<LocalEdge> edges;
  for (EdgeId e : comp.edges) edges.push_back({task_index[graph.edge(e).task], worker_index[graph.edge(e).worker]});

  // Gain = 1/2 sum_{A, s_fixed} | sum_{s_free} s_root J(s, A) | with
  // J = 2^{-n} prod_u f(c_u, r_u). The 2^{-n} factor is applied at the end.
  mpq_class gain = 0;
  std::vector<Label> s(comp.tasks.size());
  std::vector<std::size_t> agree(comp.workers.size());
  mpq_class inner;
  mpq_class joint;
  for (std::uint64_t a_config = 0; a_config < (std::uint64_t{1} << edges.size()); ++a_config) {
    for (std::uint64_t fixed_config = 0; fixed_config < (std::uint64_t{1} << fixed_tasks.size()); ++fixed_config) {
      for (std::size_t k = 0; k < fixed_tasks.size(); ++k) s[fixed_tasks[k]] = (fixed_config >> k) & 1U ? 1 : -1;
      inner = 0;
      for (std::uint64_t free_config = 0; free_config < (std::uint64_t{1} << free_tasks.size()); ++free_config) {
        for (std::size_t k = 0; k < free_tasks.size(); ++k) s[free_tasks[k]] = (free_config >> k) & 1U ? 1 : -1;
        std::fill(agree.begin(), agree.end(), 0);
        for (std::size_t k = 0; k < edges.size(); ++k) {
          const Label answer = (a_config >> k) & 1U ? 1 : -1;
          if (answer == s[edges[k].task]) ++agree[edges[k].worker];
        }
        joint = 1;
        for (std::size_t u = 0; u < comp.workers.size(); ++u) joint *= factor[degree[u]][agree[u]];
        if (s[root_local] > 0) {
          inner += joint;
        } else {
          inner -= joint;
        }
      }
      gain += abs(inner);
    }
  }
  mpq_class scale(1, 2);
  for (std::size_t k = 0; k < comp.tasks.size(); ++k) scale /= 2;
  gain *= scale;
  return gain.get_d();
}

MonotonicityResult subset_monotonicity_check(const AssignmentGraph& graph, const ReliabilityPrior& prior,
                                             std::span<const EdgeId> edge_subset, TaskId root) {
  MonotonicityResult result{};
  result.delta_full = exact_gain(graph, prior, root);
  result.delta_subset = exact_gain(graph.edge_subgraph(edge_subset), prior, root);
  return result;
}

Ball ball_around(const AssignmentGraph& graph, TaskId root, std::size_t depth) {
  if (root >= graph.n_tasks()) fail(ErrorKind::parameter, "root task out of range");
  constexpr std::size_t unreached = static_cast<std::size_t>(-1);
  std::vector<std::size_t> task_dist(graph.n_tasks(), unreached);
  std::vector<std::size_t> worker_dist(graph.n_workers(), unreached);
  std::deque<std::pair<bool, std::uint32_t>> queue{{true, root}};
  task_dist[root] = 0;
  while (!queue.empty()) {
    const auto [is_task, id] = queue.front();
    queue.pop_front();
    if (is_task) {
      if (task_dist[id] >= depth) continue;
      for (EdgeId e : graph.edges_of_task(id)) {
        const WorkerId u = graph.edge(e).worker;
        if (worker_dist[u] != unreached) continue;
        worker_dist[u] = task_dist[id] + 1;
        queue.emplace_back(false, u);
      }
    } else {
      if (worker_dist[id] >= depth) continue;
      for (EdgeId e : graph.edges_of_worker(id)) {
        const TaskId j = graph.edge(e).task;
        if (task_dist[j] != unreached) continue;
        task_dist[j] = worker_dist[id] + 1;
        queue.emplace_back(true, j);
      }
    }
  }
  Ball ball;
  for (EdgeId e = 0; e < graph.n_edges(); ++e) {
    const Edge& edge = graph.edge(e);
    if (task_dist[edge.task] != unreached && worker_dist[edge.worker] != unreached) ball.edges.push_back(e);
  }
  for (TaskId i = 0; i < graph.n_tasks(); ++i) {
    if (task_dist[i] == depth) ball.frontier.push_back(i);
  }
  return ball;
}

}  // namespace crowdbp
