#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdbp/bp.hpp"
#include "crowdbp/dataset.hpp"
#include "crowdbp/estimators.hpp"
#include "crowdbp/rng.hpp"

namespace crowdbp {

/// Fraction of tasks whose estimate differs from the truth.
double error_rate(const EstimateReport& estimates, std::span<const Label> truth_labels);

struct ErrorBounds {
  /// exp(-l mu^2 / 2)
  double mv;
  /// Spectral bound; empty below the barrier q^2 (l-1)(r-1) <= 1.
  std::optional<double> kos;
};

ErrorBounds theoretical_bounds(std::size_t l, std::size_t r, double mu, double q);

/// Upper bound on P[depth-2k neighbourhood of a task is not a tree]:
/// min(1, 3 l r / n * ((l-1)(r-1))^(2k)).
double tree_probability_bound(std::size_t n, std::size_t l, std::size_t r, std::size_t k);

enum class SweepVariable { l, r };

struct ExperimentConfig {
  std::size_t n_tasks = 200;
  SweepVariable sweep = SweepVariable::l;
  std::vector<std::size_t> values;
  /// The degree that is not swept.
  std::size_t fixed = 5;
  std::string prior = "sh";
  std::vector<std::string> estimators{"mv", "kos", "bp"};
  std::size_t trials = 100;
  std::size_t k_max = 100;
  double tol = 1e-5;
  Seed seed = 1;
  std::string output;
  std::size_t threads = 1;
  /// Round n_tasks to the nearest value for which n * l / r is an integer.
  bool adjust_n = false;
  /// Fill the wall_time_ms column. Off by default so reruns are byte-identical.
  bool timing = false;
  KosInit kos_init = KosInit::random_normal;
  /// Depth parameter for the tree-probability companion row; 0 means ceil(log log n).
  std::size_t tree_k = 0;
};

/// Flat `key = value` lines; `#` starts a comment. Keys mirror ExperimentConfig fields.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws a parameter error for empty ranges, zero trials, unknown priors or estimators.
void validate(const ExperimentConfig& config);

/// Task count used at a sweep point, after optional rounding.
std::size_t effective_task_count(const ExperimentConfig& config, std::size_t l, std::size_t r);

struct MetricsRow {
  std::string estimator;
  std::size_t l = 0;
  std::size_t r = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  double mean_iterations = 0.0;
  std::optional<double> wall_time_ms;
  std::size_t failures = 0;
};

/// Runs every estimator on the same simulated instances at each sweep point.
/// Trial seeds come from (seed, sweep index, trial), so results do not depend on
/// the thread count. Companion rows `bound-mv`, `bound-kos` and `bound-tree`
/// follow the estimator rows of each sweep point.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& config);

/// RFC 4180 CSV: estimator,l,r,mean_error,std_error,trials,mean_iterations,wall_time_ms,failures
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
std::string metrics_csv(std::span<const MetricsRow> rows);

/// Repeated subsampling of a dataset with gold labels to a target task degree.
struct SubsampleConfig {
  std::size_t l_target = 5;
  std::vector<std::string> estimators;
  std::size_t resamples = 100;
  std::size_t k_max = 100;
  double tol = 1e-5;
  Seed seed = 1;
  std::size_t threads = 1;
};

/// One row per estimator, with l = l_target and r = 0. Oracle and BP estimators
/// use the dataset's reference reliabilities (measured, or agreement with the truth).
std::vector<MetricsRow> run_subsample_experiment(const Dataset& dataset, const SubsampleConfig& config);

}  // namespace crowdbp
