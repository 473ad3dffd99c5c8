#include "reference.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace ref {

long double factor(const std::vector<Atom>& atoms, std::size_t c, std::size_t r) {
  long double total = 0.0L;
  for (const Atom& a : atoms) {
    long double term = a.weight;
    for (std::size_t k = 0; k < c; ++k) term *= a.p;
    for (std::size_t k = c; k < r; ++k) term *= 1.0L - a.p;
    total += term;
  }
  return total;
}

std::pair<long double, long double> worker_message(const std::vector<Atom>& atoms, Label target,
                                                   const std::vector<Label>& others,
                                                   const std::vector<double>& others_x) {
  const std::size_t m = others.size();
  const std::size_t r = m + 1;
  long double out[2] = {0.0L, 0.0L};
  for (int side = 0; side < 2; ++side) {
    const Label s_i = side == 0 ? 1 : -1;
    for (std::uint64_t config = 0; config < (std::uint64_t{1} << m); ++config) {
      std::size_t c = target == s_i ? 1 : 0;
      long double weight = 1.0L;
      for (std::size_t j = 0; j < m; ++j) {
        const Label s_j = (config >> j) & 1U ? 1 : -1;
        if (others[j] == s_j) ++c;
        weight *= (1.0L + s_j * static_cast<long double>(others_x[j])) / 2.0L;
      }
      out[side] += factor(atoms, c, r) * weight;
    }
  }
  const long double z = out[0] + out[1];
  return {out[0] / z, out[1] / z};
}

std::vector<long double> posterior_plus(const crowdbp::AssignmentGraph& graph, const crowdbp::AnswerMatrix& answers,
                                        const std::vector<Atom>& atoms) {
  const std::size_t n = graph.n_tasks();
  std::vector<long double> plus(n, 0.0L);
  long double total = 0.0L;
  std::vector<std::size_t> agree(graph.n_workers());
  std::vector<std::size_t> degree(graph.n_workers(), 0);
  for (const auto& e : graph.edges()) ++degree[e.worker];
  for (std::uint64_t config = 0; config < (std::uint64_t{1} << n); ++config) {
    std::fill(agree.begin(), agree.end(), 0);
    for (std::size_t k = 0; k < graph.n_edges(); ++k) {
      const auto& e = graph.edges()[k];
      const Label s = (config >> e.task) & 1U ? 1 : -1;
      if (answers[static_cast<crowdbp::EdgeId>(k)] == s) ++agree[e.worker];
    }
    long double joint = 1.0L;
    for (std::size_t u = 0; u < graph.n_workers(); ++u) joint *= factor(atoms, agree[u], degree[u]);
    total += joint;
    for (std::size_t i = 0; i < n; ++i) {
      if ((config >> i) & 1U) plus[i] += joint;
    }
  }
  for (auto& v : plus) v /= total;
  return plus;
}

std::vector<Atom> random_atoms(std::mt19937_64& rng, std::size_t max_atoms) {
  std::uniform_int_distribution<std::size_t> count(1, max_atoms);
  std::uniform_real_distribution<double> loc(0.02, 0.98);
  std::uniform_real_distribution<double> mass(0.1, 1.0);
  const std::size_t k = count(rng);
  std::vector<Atom> atoms(k);
  double total = 0.0;
  for (auto& a : atoms) {
    a.p = loc(rng);
    a.weight = mass(rng);
    total += a.weight;
  }
  for (auto& a : atoms) a.weight /= total;
  return atoms;
}

crowdbp::AssignmentGraph random_tree(std::mt19937_64& rng, std::size_t n_tasks) {
  std::vector<crowdbp::Edge> edges;
  std::size_t tasks = 1;
  std::size_t workers = 0;
  std::bernoulli_distribution add_worker(0.5);
  while (tasks < n_tasks) {
    if (workers == 0 || add_worker(rng)) {
      const auto parent = std::uniform_int_distribution<std::size_t>(0, tasks - 1)(rng);
      edges.push_back({static_cast<crowdbp::TaskId>(parent), static_cast<crowdbp::WorkerId>(workers++)});
    } else {
      const auto parent = std::uniform_int_distribution<std::size_t>(0, workers - 1)(rng);
      edges.push_back({static_cast<crowdbp::TaskId>(tasks++), static_cast<crowdbp::WorkerId>(parent)});
    }
  }
  // A few extra leaf workers so that single-answer workers also appear.
  const auto extra = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
  for (std::size_t k = 0; k < extra; ++k) {
    const auto parent = std::uniform_int_distribution<std::size_t>(0, tasks - 1)(rng);
    edges.push_back({static_cast<crowdbp::TaskId>(parent), static_cast<crowdbp::WorkerId>(workers++)});
  }
  return crowdbp::AssignmentGraph(tasks, workers, std::move(edges));
}

crowdbp::AssignmentGraph random_graph(std::mt19937_64& rng, std::size_t n_tasks, std::size_t n_workers,
                                      std::size_t n_edges) {
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  std::uniform_int_distribution<std::size_t> task(0, n_tasks - 1);
  std::uniform_int_distribution<std::size_t> worker(0, n_workers - 1);
  for (std::size_t i = 0; i < n_tasks; ++i) chosen.insert({i, worker(rng)});
  for (std::size_t u = 0; u < n_workers; ++u) {
    bool covered = false;
    for (const auto& [i, w] : chosen) covered = covered || w == u;
    if (!covered) chosen.insert({task(rng), u});
  }
  const std::size_t cap = n_tasks * n_workers;
  while (chosen.size() < std::min(n_edges, cap)) chosen.insert({task(rng), worker(rng)});
  std::vector<crowdbp::Edge> edges;
  for (const auto& [i, u] : chosen) edges.push_back({static_cast<crowdbp::TaskId>(i), static_cast<crowdbp::WorkerId>(u)});
  return crowdbp::AssignmentGraph(n_tasks, n_workers, std::move(edges));
}

crowdbp::AnswerMatrix random_answers(std::mt19937_64& rng, std::size_t n_edges) {
  std::bernoulli_distribution coin(0.5);
  std::vector<Label> a(n_edges);
  for (auto& v : a) v = coin(rng) ? 1 : -1;
  return crowdbp::AnswerMatrix(std::move(a));
}

crowdbp::AssignmentGraph left_regular(std::mt19937_64& rng, std::size_t n_tasks, std::size_t n_workers,
                                      std::size_t l) {
  // The first slot of each task walks a shuffled worker list, so every worker
  // is used once n_tasks >= n_workers. Remaining slots favour a few busy workers.
  std::vector<std::size_t> order(n_workers);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> activity(n_workers);
  for (std::size_t k = 0; k < n_workers; ++k) activity[order[k]] = 1.0 / static_cast<double>(k + 1);
  std::discrete_distribution<std::size_t> busy(activity.begin(), activity.end());

  std::vector<crowdbp::Edge> edges;
  for (std::size_t i = 0; i < n_tasks; ++i) {
    std::set<std::size_t> picked{order[i % n_workers]};
    while (picked.size() < std::min(l, n_workers)) picked.insert(busy(rng));
    for (std::size_t u : picked) {
      edges.push_back({static_cast<crowdbp::TaskId>(i), static_cast<crowdbp::WorkerId>(u)});
    }
  }
  return crowdbp::AssignmentGraph(n_tasks, n_workers, std::move(edges));
}

Relabelled relabel(std::mt19937_64& rng, const crowdbp::AssignmentGraph& graph, const crowdbp::AnswerMatrix& answers) {
  Relabelled out;
  out.task_map.resize(graph.n_tasks());
  std::iota(out.task_map.begin(), out.task_map.end(), 0);
  std::shuffle(out.task_map.begin(), out.task_map.end(), rng);
  out.worker_map.resize(graph.n_workers());
  std::iota(out.worker_map.begin(), out.worker_map.end(), 0);
  std::shuffle(out.worker_map.begin(), out.worker_map.end(), rng);
  std::vector<crowdbp::EdgeId> order(graph.n_edges());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<crowdbp::Edge> edges;
  std::vector<Label> values;
  out.edge_map.resize(graph.n_edges());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& e = graph.edge(order[k]);
    edges.push_back({out.task_map[e.task], out.worker_map[e.worker]});
    values.push_back(answers[order[k]]);
    out.edge_map[order[k]] = static_cast<crowdbp::EdgeId>(k);
  }
  out.graph = crowdbp::AssignmentGraph(graph.n_tasks(), graph.n_workers(), std::move(edges));
  out.answers = crowdbp::AnswerMatrix(std::move(values));
  return out;
}

}  // namespace ref
