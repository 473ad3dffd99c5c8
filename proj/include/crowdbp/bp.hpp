#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "crowdbp/graph.hpp"
#include "crowdbp/prior.hpp"

namespace crowdbp {

/// Normalized message or belief over s in {+1, -1}.
struct MessagePair {
  double plus = 0.5;
  double minus = 0.5;

  /// m(+1) - m(-1).
  double magnetization() const noexcept { return plus - minus; }
};

/// Smallest value a message component may take.
inline constexpr double kMessageFloor = 1e-300;

/// Pair (sigma(L), sigma(-L)) for log ratio L = log m(+1) - log m(-1).
MessagePair pair_from_log_ratio(double log_ratio) noexcept;

/// Normalizes unnormalized log-domain components. Empty when both are -inf or NaN.
std::optional<MessagePair> normalize_log_pair(double log_plus, double log_minus) noexcept;

/// Messages of both directions per edge, beliefs per task.
struct BeliefState {
  std::vector<MessagePair> task_to_worker;
  std::vector<MessagePair> worker_to_task;
  std::vector<MessagePair> beliefs;
  std::size_t iteration = 0;
};

/// Common output of every estimator.
struct EstimateReport {
  std::vector<Label> labels;
  /// b(+1) - b(-1), or the estimator's normalized score, in [-1, 1].
  std::vector<double> margins;
  std::size_t iterations_run = 0;
  bool converged = true;
  double max_delta = 0.0;
};

/// Builds a report whose labels are sign(margin) with ties going to +1.
EstimateReport report_from_margins(std::vector<double> margins, std::size_t iterations, bool converged,
                                   double max_delta);

/// How the worker-to-task update (sum over the worker's other tasks) is evaluated.
enum class KernelMode {
  automatic,   ///< atoms for discrete priors, polynomial otherwise
  atoms,       ///< per-atom product of (1 + A mu x) terms, O(r * atoms) per worker
  polynomial,  ///< generating polynomial over the match count with the factor table, O(r^2) per edge
  naive,       ///< explicit sum over all 2^(r-1) neighbour labelings
};

/// Largest worker degree the naive kernel accepts.
inline constexpr std::size_t kNaiveMaxDegree = 24;

/// Evaluates worker-to-task messages for one prior.
///
/// All entry points take the worker's answers and the incoming task-to-worker
/// magnetizations x_j aligned with them, and return unnormalized log-domain
/// components (log m(+1), log m(-1)).
class WorkerKernel {
 public:
  struct LogPair {
    double plus;
    double minus;
  };

  WorkerKernel(const ReliabilityPrior& prior, std::size_t r_max, KernelMode mode = KernelMode::automatic);

  KernelMode mode() const noexcept { return mode_; }
  std::size_t r_max() const noexcept { return factors_.r_max(); }

  /// Message to the neighbour answering `target`, given the other neighbours only.
  LogPair message(Label target, std::span<const Label> others, std::span<const double> others_x) const;

  /// Messages to every neighbour k, each excluding neighbour k itself.
  void leave_one_out(std::span<const Label> answers, std::span<const double> x, std::span<LogPair> out) const;

 private:
  LogPair atoms_message(Label target, std::span<const Label> others, std::span<const double> others_x) const;
  LogPair polynomial_message(Label target, std::span<const Label> others, std::span<const double> others_x) const;
  LogPair naive_message(Label target, std::span<const Label> others, std::span<const double> others_x) const;
  void atoms_leave_one_out(std::span<const Label> answers, std::span<const double> x, std::span<LogPair> out) const;

  KernelMode mode_;
  FactorTable factors_;
  std::vector<double> atom_mu_;          // 2p - 1 per atom
  std::vector<double> atom_log_weight_;  // log weight per atom
};

struct BpOptions {
  std::size_t k_max = 100;
  double tol = 1e-5;
  KernelMode kernel = KernelMode::automatic;

  /// k = ceil(log log n) iterations with no early stop.
  static BpOptions theory(std::size_t n_tasks);
};

BeliefState bp_init(const AssignmentGraph& graph);

/// m_{i->u}(s) proportional to the product of m_{v->i}(s) over v in M_i \ {u}.
void bp_update_task_messages(BeliefState& state, const AssignmentGraph& graph);

/// m_{u->i}(s) proportional to the sum over the worker's other tasks of f_u times incoming messages.
void bp_update_worker_messages(BeliefState& state, const AssignmentGraph& graph, const AnswerMatrix& answers,
                               const WorkerKernel& kernel);

/// b_i(s) proportional to the product of all incoming worker messages.
void bp_compute_beliefs(BeliefState& state, const AssignmentGraph& graph);

/// Decodes beliefs into labels (tie -> +1) and margins.
EstimateReport decode_beliefs(const BeliefState& state);

struct BpOutcome {
  BeliefState state;
  EstimateReport report;
};

/// Synchronous sum-product until the L-infinity message change drops below
/// tol or k_max sweeps have run.
BpOutcome bp_solve(const AssignmentGraph& graph, const AnswerMatrix& answers, const ReliabilityPrior& prior,
                   const BpOptions& options = {});

EstimateReport bp_run(const AssignmentGraph& graph, const AnswerMatrix& answers, const ReliabilityPrior& prior,
                      const BpOptions& options = {});

}  // namespace crowdbp
