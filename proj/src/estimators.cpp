#include "crowdbp/estimators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>

#include "crowdbp/error.hpp"
#include "crowdbp/oracle.hpp"

namespace crowdbp {

EstimateReport majority_vote(const AssignmentGraph& graph, const AnswerMatrix& answers) {
  check_dimensions(graph, answers);
  std::vector<double> margins(graph.n_tasks(), 0.0);
  for (TaskId i = 0; i < graph.n_tasks(); ++i) {
    const auto adj = graph.edges_of_task(i);
    if (adj.empty()) continue;
    long votes = 0;
    for (EdgeId e : adj) votes += answers[e];
    margins[i] = static_cast<double>(votes) / static_cast<double>(adj.size());
  }
  return report_from_margins(std::move(margins), 0, true, 0.0);
}

EstimateReport kos_run(const AssignmentGraph& graph, const AnswerMatrix& answers, std::size_t k_max, double tol,
                       Seed seed, KosInit init) {
  check_dimensions(graph, answers);
  if (k_max < 1) fail(ErrorKind::parameter, "k_max must be at least 1");
  const std::size_t m = graph.n_edges();
  std::vector<double> x(m, 0.0);
  std::vector<double> y(m, 1.0);
  if (init == KosInit::random_normal) {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(1.0, 1.0);
    for (double& v : y) v = normal(rng);
  }
  auto rescale = [](std::vector<double>& v) {
    double peak = 0.0;
    for (double t : v) peak = std::max(peak, std::abs(t));
    if (peak > 0.0) {
      for (double& t : v) t /= peak;
    }
  };
  rescale(y);

  std::vector<double> previous;
  std::size_t iterations = 0;
  bool converged = false;
  double delta = 0.0;
  while (iterations < k_max) {
    previous = y;
    for (TaskId i = 0; i < graph.n_tasks(); ++i) {
      const auto adj = graph.edges_of_task(i);
      double total = 0.0;
      for (EdgeId e : adj) total += answers[e] * y[e];
      for (EdgeId e : adj) x[e] = total - answers[e] * y[e];
    }
    for (WorkerId u = 0; u < graph.n_workers(); ++u) {
      const auto adj = graph.edges_of_worker(u);
      double total = 0.0;
      for (EdgeId e : adj) total += answers[e] * x[e];
      for (EdgeId e : adj) y[e] = total - answers[e] * x[e];
    }
    rescale(y);
    ++iterations;
    delta = 0.0;
    for (std::size_t e = 0; e < m; ++e) delta = std::max(delta, std::abs(y[e] - previous[e]));
    if (delta < tol) {
      converged = true;
      break;
    }
  }

  std::vector<double> margins(graph.n_tasks(), 0.0);
  for (TaskId i = 0; i < graph.n_tasks(); ++i) {
    double score = 0.0;
    double scale = 0.0;
    for (EdgeId e : graph.edges_of_task(i)) {
      score += answers[e] * y[e];
      scale += std::abs(y[e]);
    }
    margins[i] = scale > 0.0 ? score / scale : 0.0;
  }
  return report_from_margins(std::move(margins), iterations, converged, delta);
}

std::vector<double> smoothed_agreement(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                       std::span<const Label> labels) {
  std::vector<double> p(graph.n_workers());
  for (WorkerId u = 0; u < graph.n_workers(); ++u) {
    const auto adj = graph.edges_of_worker(u);
    std::size_t matches = 0;
    for (EdgeId e : adj) matches += answers[e] == labels[graph.edge(e).task] ? 1 : 0;
    p[u] = static_cast<double>(1 + matches) / static_cast<double>(2 + adj.size());
  }
  return p;
}

std::vector<double> clipped_agreement(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                      std::span<const Label> labels) {
  std::vector<double> p(graph.n_workers(), 0.5);
  for (WorkerId u = 0; u < graph.n_workers(); ++u) {
    const auto adj = graph.edges_of_worker(u);
    if (adj.empty()) continue;
    std::size_t matches = 0;
    for (EdgeId e : adj) matches += answers[e] == labels[graph.edge(e).task] ? 1 : 0;
    p[u] = std::clamp(static_cast<double>(matches) / static_cast<double>(adj.size()), kAgreementClip,
                      1.0 - kAgreementClip);
  }
  return p;
}

EstimateReport ebp_run(const AssignmentGraph& graph, const AnswerMatrix& answers, std::size_t rounds,
                       const BpOptions& options, AgreementEstimate estimate) {
  if (rounds < 1) fail(ErrorKind::parameter, "ebp needs at least one round");
  EstimateReport report = majority_vote(graph, answers);
  for (std::size_t round = 0; round < rounds; ++round) {
    // Add-one smoothing shrinks low-degree workers toward 0.5 and weakens the prior BP sees.
    const auto estimates = estimate == AgreementEstimate::add_one ? smoothed_agreement(graph, answers, report.labels)
                                                                  : clipped_agreement(graph, answers, report.labels);
    const ReliabilityPrior prior = graph.n_workers() > 0 ? empirical_prior(estimates) : spammer_hammer();
    report = bp_run(graph, answers, prior, options);
  }
  return report;
}

EstimateReport oracle_work(const AssignmentGraph& graph, const AnswerMatrix& answers, std::span<const double> true_p,
                           std::size_t* clamped) {
  check_dimensions(graph, answers);
  if (true_p.size() != graph.n_workers()) fail(ErrorKind::parameter, "one reliability per worker is required");
  std::size_t n_clamped = 0;
  std::vector<double> weight(graph.n_workers());
  for (WorkerId u = 0; u < graph.n_workers(); ++u) {
    double p = true_p[u];
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::parameter, "reliability outside [0, 1]");
    if (p < kOracleClamp || p > 1.0 - kOracleClamp) {
      p = std::clamp(p, kOracleClamp, 1.0 - kOracleClamp);
      ++n_clamped;
    }
    weight[u] = std::log(p / (1.0 - p));
  }
  if (clamped) *clamped = n_clamped;
  std::vector<double> margins(graph.n_tasks());
  for (TaskId i = 0; i < graph.n_tasks(); ++i) {
    double score = 0.0;
    for (EdgeId e : graph.edges_of_task(i)) score += answers[e] * weight[graph.edge(e).worker];
    margins[i] = pair_from_log_ratio(score).magnetization();
  }
  return report_from_margins(std::move(margins), 0, true, 0.0);
}

EstimateReport em_run(const AssignmentGraph& graph, const AnswerMatrix& answers, double prior_alpha, double prior_beta,
                      std::size_t k_max, double tol) {
  check_dimensions(graph, answers);
  if (!(prior_alpha > 0.0) || !(prior_beta > 0.0)) fail(ErrorKind::parameter, "EM prior parameters must be positive");
  if (k_max < 1) fail(ErrorKind::parameter, "k_max must be at least 1");

  std::vector<double> w(graph.n_tasks(), 0.5);
  for (TaskId i = 0; i < graph.n_tasks(); ++i) {
    const auto adj = graph.edges_of_task(i);
    if (adj.empty()) continue;
    std::size_t plus = 0;
    for (EdgeId e : adj) plus += answers[e] > 0 ? 1 : 0;
    w[i] = static_cast<double>(plus) / static_cast<double>(adj.size());
  }

  std::vector<double> log_odds(graph.n_workers());
  std::vector<double> next(graph.n_tasks());
  std::size_t iterations = 0;
  bool converged = false;
  double delta = 0.0;
  while (iterations < k_max) {
    for (WorkerId u = 0; u < graph.n_workers(); ++u) {
      const auto adj = graph.edges_of_worker(u);
      double agree = prior_alpha - 1.0;
      for (EdgeId e : adj) {
        const double wi = w[graph.edge(e).task];
        agree += answers[e] > 0 ? wi : 1.0 - wi;
      }
      const double denominator = prior_alpha + prior_beta - 2.0 + static_cast<double>(adj.size());
      double p = denominator > 0.0 ? agree / denominator : 0.5;
      p = std::clamp(p, kOracleClamp, 1.0 - kOracleClamp);
      log_odds[u] = std::log(p / (1.0 - p));
    }
    delta = 0.0;
    for (TaskId i = 0; i < graph.n_tasks(); ++i) {
      double score = 0.0;
      for (EdgeId e : graph.edges_of_task(i)) score += answers[e] * log_odds[graph.edge(e).worker];
      next[i] = pair_from_log_ratio(score).plus;
      delta = std::max(delta, std::abs(next[i] - w[i]));
    }
    w.swap(next);
    ++iterations;
    if (delta < tol) {
      converged = true;
      break;
    }
  }

  std::vector<double> margins(graph.n_tasks());
  for (TaskId i = 0; i < graph.n_tasks(); ++i) margins[i] = 2.0 * w[i] - 1.0;
  return report_from_margins(std::move(margins), iterations, converged, delta);
}

std::string EstimatorSpec::name() const {
  switch (kind) {
    case EstimatorKind::mv:
      return "mv";
    case EstimatorKind::kos:
      return "kos";
    case EstimatorKind::bp_true:
      return "bp";
    case EstimatorKind::ebp:
      return "ebp" + std::to_string(rounds) + (agreement == AgreementEstimate::add_one ? "-addone" : "");
    case EstimatorKind::oracle_work:
      return "oracle-work";
    case EstimatorKind::oracle_task:
      return "oracle-task";
    case EstimatorKind::em:
      return "em";
  }
  return "unknown";
}

EstimatorSpec parse_estimator(std::string_view name) {
  EstimatorSpec spec;
  if (name == "mv") {
    spec.kind = EstimatorKind::mv;
  } else if (name == "kos") {
    spec.kind = EstimatorKind::kos;
  } else if (name == "bp" || name == "bp-true") {
    spec.kind = EstimatorKind::bp_true;
  } else if (name == "oracle-work") {
    spec.kind = EstimatorKind::oracle_work;
  } else if (name == "oracle-task") {
    spec.kind = EstimatorKind::oracle_task;
  } else if (name == "em") {
    spec.kind = EstimatorKind::em;
  } else if (name.starts_with("ebp") && name.size() > 3) {
    std::size_t rounds = 0;
    auto digits = name.substr(3);
    if (digits.ends_with("-addone")) {
      spec.agreement = AgreementEstimate::add_one;
      digits.remove_suffix(7);
    }
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), rounds);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || rounds < 1) {
      fail(ErrorKind::parameter, "ebp needs a positive round count, e.g. ebp2");
    }
    spec.kind = EstimatorKind::ebp;
    spec.rounds = rounds;
  } else {
    fail(ErrorKind::parameter, "unknown estimator '" + std::string(name) +
                                   "' (expected mv, kos, bp, ebp1, ebp2, oracle-work, oracle-task or em)");
  }
  return spec;
}

EstimateReport run_estimator(const EstimatorSpec& spec, const InferenceInput& input) {
  const auto require_prior = [&]() -> const ReliabilityPrior& {
    if (!input.prior) fail(ErrorKind::parameter, spec.name() + " needs a reliability prior");
    return *input.prior;
  };
  switch (spec.kind) {
    case EstimatorKind::mv:
      return majority_vote(input.graph, input.answers);
    case EstimatorKind::kos:
      return kos_run(input.graph, input.answers, spec.bp.k_max, spec.bp.tol, input.seed, spec.kos_init);
    case EstimatorKind::bp_true:
      return bp_run(input.graph, input.answers, require_prior(), spec.bp);
    case EstimatorKind::ebp:
      return ebp_run(input.graph, input.answers, spec.rounds, spec.bp, spec.agreement);
    case EstimatorKind::oracle_work:
      if (input.true_reliabilities.empty() && input.graph.n_workers() > 0) {
        fail(ErrorKind::parameter, "oracle-work needs the true worker reliabilities");
      }
      return oracle_work(input.graph, input.answers, input.true_reliabilities);
    case EstimatorKind::oracle_task:
      if (input.truth_labels.size() != input.graph.n_tasks()) {
        fail(ErrorKind::parameter, "oracle-task needs the true task labels");
      }
      return oracle_task_estimate(input.graph, input.answers, require_prior(), input.truth_labels);
    case EstimatorKind::em:
      return em_run(input.graph, input.answers, spec.em_alpha, spec.em_beta, spec.bp.k_max, spec.bp.tol);
  }
  fail(ErrorKind::parameter, "unhandled estimator");
}

}  // namespace crowdbp
