#include "crowdbp/bp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "crowdbp/error.hpp"
#include "log_accumulator.hpp"

namespace crowdbp {

namespace {

using detail::LogAccumulator;

double log_ratio(const MessagePair& m) { return std::log(m.plus) - std::log(m.minus); }

[[noreturn]] void degenerate(const std::string& where) {
  fail(ErrorKind::numeric_degeneracy, "all-zero message or belief at " + where);
}

}  // namespace

MessagePair pair_from_log_ratio(double log_ratio) noexcept {
  MessagePair m;
  if (log_ratio >= 0.0) {
    const double e = std::exp(-log_ratio);
    m.plus = 1.0 / (1.0 + e);
    m.minus = e / (1.0 + e);
  } else {
    const double e = std::exp(log_ratio);
    m.plus = e / (1.0 + e);
    m.minus = 1.0 / (1.0 + e);
  }
  m.plus = std::max(m.plus, kMessageFloor);
  m.minus = std::max(m.minus, kMessageFloor);
  return m;
}

std::optional<MessagePair> normalize_log_pair(double log_plus, double log_minus) noexcept {
  if (std::isnan(log_plus) || std::isnan(log_minus)) return std::nullopt;
  if (log_plus == kLogZero && log_minus == kLogZero) return std::nullopt;
  if (log_plus == std::numeric_limits<double>::infinity() || log_minus == std::numeric_limits<double>::infinity()) {
    return std::nullopt;
  }
  return pair_from_log_ratio(log_plus - log_minus);
}

EstimateReport report_from_margins(std::vector<double> margins, std::size_t iterations, bool converged,
                                   double max_delta) {
  EstimateReport report;
  report.labels.resize(margins.size());
  std::transform(margins.begin(), margins.end(), report.labels.begin(), sign_label);
  report.margins = std::move(margins);
  report.iterations_run = iterations;
  report.converged = converged;
  report.max_delta = max_delta;
  return report;
}

WorkerKernel::WorkerKernel(const ReliabilityPrior& prior, std::size_t r_max, KernelMode mode)
    : mode_(mode == KernelMode::automatic ? (prior.is_discrete() ? KernelMode::atoms : KernelMode::polynomial) : mode),
      factors_(prior, mode_ == KernelMode::atoms ? 0 : r_max) {
  if (mode_ == KernelMode::atoms) {
    if (!prior.is_discrete()) fail(ErrorKind::parameter, "the atoms kernel needs a discrete prior");
    for (const Atom& a : prior.atoms()) {
      atom_mu_.push_back(2.0 * a.p - 1.0);
      atom_log_weight_.push_back(std::log(a.weight));
    }
  }
  if (mode_ == KernelMode::naive && r_max > kNaiveMaxDegree) {
    fail(ErrorKind::size, "naive kernel limited to worker degree " + std::to_string(kNaiveMaxDegree));
  }
}

WorkerKernel::LogPair WorkerKernel::message(Label target, std::span<const Label> others,
                                            std::span<const double> others_x) const {
  switch (mode_) {
    case KernelMode::atoms:
      return atoms_message(target, others, others_x);
    case KernelMode::naive:
      return naive_message(target, others, others_x);
    default:
      return polynomial_message(target, others, others_x);
  }
}

// For atom mu = 2p - 1, a neighbour j with answer A_j and incoming
// magnetization x_j contributes (1 + A_j mu x_j) / 2 after summing out s_j, and
// the target contributes (1 +- A_target mu) / 2. The common 1/2 factors cancel
// on normalization and are dropped.
WorkerKernel::LogPair WorkerKernel::atoms_message(Label target, std::span<const Label> others,
                                                  std::span<const double> others_x) const {
  LogAccumulator plus;
  LogAccumulator minus;
  for (std::size_t a = 0; a < atom_mu_.size(); ++a) {
    const double mu = atom_mu_[a];
    double s = atom_log_weight_[a];
    for (std::size_t j = 0; j < others.size(); ++j) s += std::log1p(static_cast<double>(others[j]) * others_x[j] * mu);
    plus.add(s + std::log1p(static_cast<double>(target) * mu));
    minus.add(s + std::log1p(-static_cast<double>(target) * mu));
  }
  return {plus.value(), minus.value()};
}

void WorkerKernel::atoms_leave_one_out(std::span<const Label> answers, std::span<const double> x,
                                       std::span<LogPair> out) const {
  const std::size_t r = answers.size();
  thread_local std::vector<double> prefix;
  thread_local std::vector<double> suffix;
  thread_local std::vector<LogAccumulator> plus;
  thread_local std::vector<LogAccumulator> minus;
  prefix.assign(r + 1, 0.0);
  suffix.assign(r + 1, 0.0);
  plus.assign(r, LogAccumulator{});
  minus.assign(r, LogAccumulator{});
  for (std::size_t a = 0; a < atom_mu_.size(); ++a) {
    const double mu = atom_mu_[a];
    for (std::size_t j = 0; j < r; ++j) {
      prefix[j + 1] = prefix[j] + std::log1p(static_cast<double>(answers[j]) * x[j] * mu);
    }
    for (std::size_t j = r; j-- > 0;) {
      suffix[j] = std::log1p(static_cast<double>(answers[j]) * x[j] * mu) + suffix[j + 1];
    }
    const double lp = std::log1p(mu);
    const double lm = std::log1p(-mu);
    for (std::size_t k = 0; k < r; ++k) {
      const double s = atom_log_weight_[a] + (prefix[k] + suffix[k + 1]);
      plus[k].add(s + (answers[k] > 0 ? lp : lm));
      minus[k].add(s + (answers[k] > 0 ? lm : lp));
    }
  }
  for (std::size_t k = 0; k < r; ++k) out[k] = {plus[k].value(), minus[k].value()};
}

// Sums out the neighbours through the distribution of the number c of
// neighbours whose label agrees with their answer: that count has generating
// polynomial prod_j ((1 - a_j) + a_j z) with a_j = (1 + A_j x_j) / 2.
WorkerKernel::LogPair WorkerKernel::polynomial_message(Label target, std::span<const Label> others,
                                                       std::span<const double> others_x) const {
  const std::size_t m = others.size();
  if (m + 1 > factors_.r_max()) fail(ErrorKind::parameter, "factor table does not cover worker degree");
  thread_local std::vector<double> h;
  h.assign(m + 1, 0.0);
  h[0] = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double agree = 0.5 * (1.0 + static_cast<double>(others[j]) * others_x[j]);
    for (std::size_t c = j + 1; c > 0; --c) h[c] = h[c] * (1.0 - agree) + h[c - 1] * agree;
    h[0] *= (1.0 - agree);
  }
  const auto row = factors_.row(m + 1);
  LogAccumulator plus;
  LogAccumulator minus;
  // The target agrees with s = A_target.
  const std::size_t plus_shift = target > 0 ? 1 : 0;
  const std::size_t minus_shift = 1 - plus_shift;
  for (std::size_t c = 0; c <= m; ++c) {
    if (h[c] <= 0.0) continue;
    const double lh = std::log(h[c]);
    plus.add(lh + row[c + plus_shift]);
    minus.add(lh + row[c + minus_shift]);
  }
  return {plus.value(), minus.value()};
}

WorkerKernel::LogPair WorkerKernel::naive_message(Label target, std::span<const Label> others,
                                                  std::span<const double> others_x) const {
  const std::size_t m = others.size();
  if (m + 1 > factors_.r_max()) fail(ErrorKind::parameter, "factor table does not cover worker degree");
  if (m + 1 > kNaiveMaxDegree) fail(ErrorKind::size, "naive kernel limited to worker degree " + std::to_string(kNaiveMaxDegree));
  const auto row = factors_.row(m + 1);
  LogAccumulator plus;
  LogAccumulator minus;
  for (std::uint64_t config = 0; config < (std::uint64_t{1} << m); ++config) {
    double log_weight = 0.0;
    std::size_t agree = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double s = (config >> j) & 1U ? 1.0 : -1.0;
      log_weight += std::log(0.5 * (1.0 + s * others_x[j]));
      if (s == static_cast<double>(others[j])) ++agree;
    }
    plus.add(log_weight + row[agree + (target > 0 ? 1 : 0)]);
    minus.add(log_weight + row[agree + (target < 0 ? 1 : 0)]);
  }
  return {plus.value(), minus.value()};
}

void WorkerKernel::leave_one_out(std::span<const Label> answers, std::span<const double> x,
                                 std::span<LogPair> out) const {
  if (mode_ == KernelMode::atoms) {
    atoms_leave_one_out(answers, x, out);
    return;
  }
  thread_local std::vector<Label> others;
  thread_local std::vector<double> others_x;
  for (std::size_t k = 0; k < answers.size(); ++k) {
    others.clear();
    others_x.clear();
    for (std::size_t j = 0; j < answers.size(); ++j) {
      if (j == k) continue;
      others.push_back(answers[j]);
      others_x.push_back(x[j]);
    }
    out[k] = message(answers[k], others, others_x);
  }
}

BpOptions BpOptions::theory(std::size_t n_tasks) {
  BpOptions options;
  const double n = static_cast<double>(n_tasks);
  options.k_max = n > std::exp(1.0) ? static_cast<std::size_t>(std::max(1.0, std::ceil(std::log(std::log(n))))) : 1;
  options.tol = 0.0;
  return options;
}

BeliefState bp_init(const AssignmentGraph& graph) {
  BeliefState state;
  state.task_to_worker.assign(graph.n_edges(), MessagePair{});
  state.worker_to_task.assign(graph.n_edges(), MessagePair{});
  state.beliefs.assign(graph.n_tasks(), MessagePair{});
  state.iteration = 0;
  return state;
}

void bp_update_task_messages(BeliefState& state, const AssignmentGraph& graph) {
  thread_local std::vector<double> prefix;
  thread_local std::vector<double> suffix;
  for (TaskId i = 0; i < graph.n_tasks(); ++i) {
    const auto adj = graph.edges_of_task(i);
    const std::size_t d = adj.size();
    prefix.assign(d + 1, 0.0);
    suffix.assign(d + 1, 0.0);
    for (std::size_t k = 0; k < d; ++k) prefix[k + 1] = prefix[k] + log_ratio(state.worker_to_task[adj[k]]);
    for (std::size_t k = d; k-- > 0;) suffix[k] = log_ratio(state.worker_to_task[adj[k]]) + suffix[k + 1];
    for (std::size_t k = 0; k < d; ++k) {
      const double l = prefix[k] + suffix[k + 1];
      if (std::isnan(l)) degenerate("task " + std::to_string(i) + " -> edge " + std::to_string(adj[k]));
      state.task_to_worker[adj[k]] = pair_from_log_ratio(l);
    }
  }
}

void bp_update_worker_messages(BeliefState& state, const AssignmentGraph& graph, const AnswerMatrix& answers,
                               const WorkerKernel& kernel) {
  thread_local std::vector<Label> a;
  thread_local std::vector<double> x;
  thread_local std::vector<WorkerKernel::LogPair> out;
  for (WorkerId u = 0; u < graph.n_workers(); ++u) {
    const auto adj = graph.edges_of_worker(u);
    a.resize(adj.size());
    x.resize(adj.size());
    out.resize(adj.size());
    for (std::size_t k = 0; k < adj.size(); ++k) {
      a[k] = answers[adj[k]];
      x[k] = state.task_to_worker[adj[k]].magnetization();
    }
    kernel.leave_one_out(a, x, out);
    for (std::size_t k = 0; k < adj.size(); ++k) {
      const auto m = normalize_log_pair(out[k].plus, out[k].minus);
      if (!m) degenerate("worker " + std::to_string(u) + " -> edge " + std::to_string(adj[k]));
      state.worker_to_task[adj[k]] = *m;
    }
  }
}

// The log ratio is accumulated as (sum of positive terms) - (sum of negative
// magnitudes), each summed in ascending order. A relabeling that swaps the
// multisets therefore gives an exactly negated result, and equal multisets
// give exactly zero.
void bp_compute_beliefs(BeliefState& state, const AssignmentGraph& graph) {
  thread_local std::vector<double> pos;
  thread_local std::vector<double> neg;
  for (TaskId i = 0; i < graph.n_tasks(); ++i) {
    pos.clear();
    neg.clear();
    for (EdgeId e : graph.edges_of_task(i)) {
      const double t = log_ratio(state.worker_to_task[e]);
      if (std::isnan(t)) degenerate("belief of task " + std::to_string(i));
      (t >= 0.0 ? pos : neg).push_back(std::abs(t));
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    double p = 0.0;
    double n = 0.0;
    for (double t : pos) p += t;
    for (double t : neg) n += t;
    state.beliefs[i] = pair_from_log_ratio(p - n);
  }
}

EstimateReport decode_beliefs(const BeliefState& state) {
  std::vector<double> margins(state.beliefs.size());
  std::transform(state.beliefs.begin(), state.beliefs.end(), margins.begin(),
                 [](const MessagePair& b) { return b.magnetization(); });
  return report_from_margins(std::move(margins), state.iteration, true, 0.0);
}

namespace {

double max_change(const std::vector<MessagePair>& before, const std::vector<MessagePair>& after) {
  double delta = 0.0;
  for (std::size_t k = 0; k < before.size(); ++k) {
    delta = std::max({delta, std::abs(before[k].plus - after[k].plus), std::abs(before[k].minus - after[k].minus)});
  }
  return delta;
}

}  // namespace

BpOutcome bp_solve(const AssignmentGraph& graph, const AnswerMatrix& answers, const ReliabilityPrior& prior,
                   const BpOptions& options) {
  check_dimensions(graph, answers);
  if (options.k_max < 1) fail(ErrorKind::parameter, "k_max must be at least 1");
  if (!(options.tol >= 0.0)) fail(ErrorKind::parameter, "tol must be nonnegative");
  const WorkerKernel kernel(prior, graph.max_worker_degree(), options.kernel);

  BpOutcome outcome{bp_init(graph), {}};
  BeliefState& state = outcome.state;
  std::vector<MessagePair> previous_tw;
  std::vector<MessagePair> previous_wt;
  bool converged = false;
  double delta = std::numeric_limits<double>::infinity();
  while (state.iteration < options.k_max) {
    previous_tw = state.task_to_worker;
    previous_wt = state.worker_to_task;
    bp_update_task_messages(state, graph);
    bp_update_worker_messages(state, graph, answers, kernel);
    ++state.iteration;
    delta = std::max(max_change(previous_tw, state.task_to_worker), max_change(previous_wt, state.worker_to_task));
    if (delta < options.tol) {
      converged = true;
      break;
    }
  }
  bp_compute_beliefs(state, graph);
  outcome.report = decode_beliefs(state);
  outcome.report.converged = converged;
  outcome.report.max_delta = delta;
  return outcome;
}

EstimateReport bp_run(const AssignmentGraph& graph, const AnswerMatrix& answers, const ReliabilityPrior& prior,
                      const BpOptions& options) {
  return bp_solve(graph, answers, prior, options).report;
}

}  // namespace crowdbp
