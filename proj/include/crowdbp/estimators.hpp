#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "crowdbp/bp.hpp"
#include "crowdbp/graph.hpp"
#include "crowdbp/prior.hpp"
#include "crowdbp/rng.hpp"

namespace crowdbp {

/// label_i = sign(sum of answers), tie -> +1. Margin is the vote sum over the task degree.
EstimateReport majority_vote(const AssignmentGraph& graph, const AnswerMatrix& answers);

enum class KosInit { random_normal, ones };

/// Linear iterative message passing of Karger, Oh and Shah:
///   x_{i->u} = sum_{v in M_i \ u} A_iv y_{v->i}
///   y_{u->i} = sum_{j in N_u \ i} A_ju x_{j->u}
/// Messages are rescaled by their max magnitude after each sweep. The
/// rescaling leaves decoded signs unchanged and makes the tol test scale-free.
EstimateReport kos_run(const AssignmentGraph& graph, const AnswerMatrix& answers, std::size_t k_max, double tol,
                       Seed seed, KosInit init = KosInit::random_normal);

/// Add-one smoothed fraction of a worker's answers agreeing with `labels`:
/// (1 + matches) / (2 + degree).
std::vector<double> smoothed_agreement(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                       std::span<const Label> labels);

/// Plain fraction of agreeing answers, clipped to [kAgreementClip, 1 - kAgreementClip]
/// so the empirical prior has no atoms at 0 or 1. Degree-0 workers get 0.5.
inline constexpr double kAgreementClip = 0.05;
std::vector<double> clipped_agreement(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                      std::span<const Label> labels);

/// How EBP turns current labels into per-worker reliability estimates.
enum class AgreementEstimate { clipped, add_one };

/// Estimation + BP: starts from majority vote, then alternates
/// (estimate reliabilities from current labels, run BP with their empirical prior).
EstimateReport ebp_run(const AssignmentGraph& graph, const AnswerMatrix& answers, std::size_t rounds,
                       const BpOptions& options = {}, AgreementEstimate estimate = AgreementEstimate::clipped);

/// Reliabilities outside [kOracleClamp, 1 - kOracleClamp] are clamped by oracle_work and em_run.
inline constexpr double kOracleClamp = 1e-9;

/// Posterior decision with known reliabilities: sign(sum A_iu log(p_u / (1 - p_u))).
/// `clamped`, when given, receives the number of reliabilities that had to be clamped.
EstimateReport oracle_work(const AssignmentGraph& graph, const AnswerMatrix& answers, std::span<const double> true_p,
                           std::size_t* clamped = nullptr);

/// One-coin Dawid-Skene EM with a Beta(alpha, beta) MAP M-step.
EstimateReport em_run(const AssignmentGraph& graph, const AnswerMatrix& answers, double prior_alpha, double prior_beta,
                      std::size_t k_max, double tol);

enum class EstimatorKind { mv, kos, bp_true, ebp, oracle_work, oracle_task, em };

/// Selection plus parameters of one estimator.
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::mv;
  std::size_t rounds = 1;  // ebp only
  AgreementEstimate agreement = AgreementEstimate::clipped;  // ebp only
  BpOptions bp;            // k_max and tol are shared by every iterative estimator
  KosInit kos_init = KosInit::random_normal;
  double em_alpha = 2.0;
  double em_beta = 1.0;

  /// Name as used on the command line.
  std::string name() const;
};

/// Parses `mv | kos | bp | ebp1 | ebp2 | ebp<N>[-addone] | oracle-work | oracle-task | em`.
EstimatorSpec parse_estimator(std::string_view name);

/// Everything an estimator might need about one problem instance. Oracles
/// need the optional fields.
struct InferenceInput {
  const AssignmentGraph& graph;
  const AnswerMatrix& answers;
  const ReliabilityPrior* prior = nullptr;           // bp, oracle-task
  std::span<const Label> truth_labels = {};          // oracle-task
  std::span<const double> true_reliabilities = {};   // oracle-work
  Seed seed = 0;                                     // kos random init
};

/// Dispatches on spec.kind. Missing required inputs raise a parameter error.
EstimateReport run_estimator(const EstimatorSpec& spec, const InferenceInput& input);

}  // namespace crowdbp
