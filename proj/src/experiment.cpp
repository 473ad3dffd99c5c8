#include "crowdbp/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "crowdbp/error.hpp"
#include "crowdbp/parallel.hpp"
#include "crowdbp/prior.hpp"

namespace crowdbp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto pos = text.find(sep);
    parts.push_back(trim(text.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return parts;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    fail(ErrorKind::parameter, std::string(key) + ": expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return value;
}

double parse_real(std::string_view key, std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    fail(ErrorKind::parameter, std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  fail(ErrorKind::parameter, std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

// "1,3,5" or an inclusive range "first:last[:step]".
std::vector<std::size_t> parse_values(std::string_view key, std::string_view text) {
  std::vector<std::size_t> values;
  for (std::string_view item : split(text, ',')) {
    if (item.find(':') == std::string_view::npos) {
      values.push_back(parse_unsigned(key, item));
      continue;
    }
    const auto bounds = split(item, ':');
    if (bounds.size() > 3) fail(ErrorKind::parameter, std::string(key) + ": expected first:last[:step]");
    const std::size_t first = parse_unsigned(key, bounds[0]);
    const std::size_t last = parse_unsigned(key, bounds[1]);
    const std::size_t step = bounds.size() == 3 ? parse_unsigned(key, bounds[2]) : 1;
    if (step == 0 || last < first) fail(ErrorKind::parameter, std::string(key) + ": empty range '" + std::string(item) + "'");
    for (std::size_t v = first; v <= last; v += step) values.push_back(v);
  }
  return values;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

struct TrialOutcome {
  bool ok = false;
  double error = 0.0;
  double iterations = 0.0;
  double wall_ms = 0.0;
};

MetricsRow summarize(const std::string& name, std::size_t l, std::size_t r,
                     const std::vector<TrialOutcome>& outcomes, bool timing) {
  MetricsRow row;
  row.estimator = name;
  row.l = l;
  row.r = r;
  double sum = 0.0;
  double iterations = 0.0;
  double wall = 0.0;
  for (const TrialOutcome& t : outcomes) {
    if (!t.ok) {
      ++row.failures;
      continue;
    }
    ++row.trials;
    sum += t.error;
    iterations += t.iterations;
    wall += t.wall_ms;
  }
  if (row.trials > 0) {
    const double count = static_cast<double>(row.trials);
    row.mean_error = sum / count;
    row.mean_iterations = iterations / count;
    if (row.trials > 1) {
      double squares = 0.0;
      for (const TrialOutcome& t : outcomes) {
        if (t.ok) squares += (t.error - row.mean_error) * (t.error - row.mean_error);
      }
      row.std_error = std::sqrt(squares / (count - 1.0)) / std::sqrt(count);
    }
    if (timing) row.wall_time_ms = wall / count;
  }
  return row;
}

TrialOutcome run_one(const EstimatorSpec& spec, const InferenceInput& input, std::span<const Label> truth) {
  TrialOutcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    const EstimateReport report = run_estimator(spec, input);
    out.error = error_rate(report, truth);
    out.iterations = static_cast<double>(report.iterations_run);
    out.ok = true;
  } catch (const Error&) {
    out.ok = false;
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<EstimatorSpec> make_specs(const std::vector<std::string>& names, std::size_t k_max, double tol,
                                      KosInit kos_init) {
  std::vector<EstimatorSpec> specs;
  for (const std::string& name : names) {
    EstimatorSpec spec = parse_estimator(name);
    spec.bp.k_max = k_max;
    spec.bp.tol = tol;
    spec.kos_init = kos_init;
    specs.push_back(spec);
  }
  return specs;
}

}  // namespace

double error_rate(const EstimateReport& estimates, std::span<const Label> truth_labels) {
  if (estimates.labels.size() != truth_labels.size()) {
    fail(ErrorKind::parameter, "estimate count " + std::to_string(estimates.labels.size()) +
                                   " does not match truth count " + std::to_string(truth_labels.size()));
  }
  if (truth_labels.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth_labels.size(); ++i) wrong += estimates.labels[i] != truth_labels[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(truth_labels.size());
}

ErrorBounds theoretical_bounds(std::size_t l, std::size_t r, double mu, double q) {
  const double ld = static_cast<double>(l);
  ErrorBounds bounds{std::exp(-ld * mu * mu / 2.0), std::nullopt};
  if (l == 0 || r == 0) fail(ErrorKind::parameter, "l and r must be at least 1");
  const double strength = q * q * (ld - 1.0) * (static_cast<double>(r) - 1.0);
  if (strength > 1.0) {
    const double l1 = ld - 1.0;
    bounds.kos = std::exp(-(ld * q / 2.0) * (strength - 1.0) / (3.0 * strength + q * l1));
  }
  return bounds;
}

double tree_probability_bound(std::size_t n, std::size_t l, std::size_t r, std::size_t k) {
  if (n == 0 || l == 0 || r == 0 || k == 0) fail(ErrorKind::parameter, "n, l, r and k must be at least 1");
  const double growth = static_cast<double>(l - 1) * static_cast<double>(r - 1);
  const double value = 3.0 * static_cast<double>(l) * static_cast<double>(r) / static_cast<double>(n) *
                       std::pow(growth, 2.0 * static_cast<double>(k));
  return std::min(1.0, value);
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::parameter, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(view.substr(0, eq)));
    const std::string_view value = trim(view.substr(eq + 1));
    if (key == "n_tasks" || key == "n") {
      config.n_tasks = parse_unsigned(key, value);
    } else if (key == "sweep") {
      if (value == "l") {
        config.sweep = SweepVariable::l;
      } else if (value == "r") {
        config.sweep = SweepVariable::r;
      } else {
        fail(ErrorKind::parameter, "sweep: expected l or r, got '" + std::string(value) + "'");
      }
    } else if (key == "values") {
      config.values = parse_values(key, value);
    } else if (key == "fixed") {
      config.fixed = parse_unsigned(key, value);
    } else if (key == "prior") {
      config.prior = std::string(value);
    } else if (key == "estimators") {
      config.estimators.clear();
      for (std::string_view name : split(value, ',')) config.estimators.emplace_back(name);
    } else if (key == "trials") {
      config.trials = parse_unsigned(key, value);
    } else if (key == "k_max") {
      config.k_max = parse_unsigned(key, value);
    } else if (key == "tol") {
      config.tol = parse_real(key, value);
    } else if (key == "seed") {
      config.seed = parse_unsigned(key, value);
    } else if (key == "output") {
      config.output = std::string(value);
    } else if (key == "threads") {
      config.threads = parse_unsigned(key, value);
    } else if (key == "adjust_n") {
      config.adjust_n = parse_bool(key, value);
    } else if (key == "timing") {
      config.timing = parse_bool(key, value);
    } else if (key == "kos_init") {
      if (value == "random") {
        config.kos_init = KosInit::random_normal;
      } else if (value == "ones") {
        config.kos_init = KosInit::ones;
      } else {
        fail(ErrorKind::parameter, "kos_init: expected random or ones, got '" + std::string(value) + "'");
      }
    } else if (key == "tree_k") {
      config.tree_k = parse_unsigned(key, value);
    } else {
      fail(ErrorKind::parameter, "config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::parameter, "cannot open config " + path.string());
  return parse_config(in);
}

void validate(const ExperimentConfig& config) {
  if (config.n_tasks == 0) fail(ErrorKind::parameter, "n_tasks must be at least 1");
  if (config.values.empty()) fail(ErrorKind::parameter, "the sweep needs at least one value");
  for (std::size_t v : config.values) {
    if (v == 0) fail(ErrorKind::parameter, "sweep values must be at least 1");
  }
  if (config.fixed == 0) fail(ErrorKind::parameter, "the fixed degree must be at least 1");
  if (config.trials == 0) fail(ErrorKind::parameter, "trials must be at least 1");
  if (config.k_max == 0) fail(ErrorKind::parameter, "k_max must be at least 1");
  if (!(config.tol >= 0.0)) fail(ErrorKind::parameter, "tol must be non-negative");
  if (config.threads == 0) fail(ErrorKind::parameter, "threads must be at least 1");
  if (config.estimators.empty()) fail(ErrorKind::parameter, "at least one estimator is required");
  for (const std::string& name : config.estimators) parse_estimator(name);
  parse_prior(config.prior);
}

std::size_t effective_task_count(const ExperimentConfig& config, std::size_t l, std::size_t r) {
  const std::size_t n = config.n_tasks;
  if (r == 0 || (n * l) % r == 0 || !config.adjust_n) return n;
  const std::size_t step = r / std::gcd(l, r);
  const std::size_t below = n / step * step;
  const std::size_t above = below + step;
  if (below == 0) return above;
  return n - below <= above - n ? below : above;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& config) {
  validate(config);
  const ReliabilityPrior prior = parse_prior(config.prior);
  const Moments moments = prior.moments();
  const auto specs = make_specs(config.estimators, config.k_max, config.tol, config.kos_init);

  std::vector<MetricsRow> rows;
  for (std::size_t point = 0; point < config.values.size(); ++point) {
    const std::size_t l = config.sweep == SweepVariable::l ? config.values[point] : config.fixed;
    const std::size_t r = config.sweep == SweepVariable::r ? config.values[point] : config.fixed;
    const std::size_t n = effective_task_count(config, l, r);

    // outcomes[estimator][trial], filled by index so the schedule cannot matter.
    std::vector<std::vector<TrialOutcome>> outcomes(specs.size(), std::vector<TrialOutcome>(config.trials));
    parallel_for(config.trials, config.threads, [&](std::size_t trial) {
      const Seed trial_seed = derive_seed(config.seed, {point, trial});
      const AssignmentGraph graph = generate_regular_bipartite(n, l, r, derive_seed(trial_seed, Stage::graph));
      const GroundTruth truth = sample_ground_truth(graph, prior, derive_seed(trial_seed, Stage::truth));
      const AnswerMatrix answers = sample_answers(graph, truth, derive_seed(trial_seed, Stage::answers));
      const InferenceInput input{graph,        answers, &prior, truth.labels, truth.reliabilities,
                                 derive_seed(trial_seed, Stage::estimator)};
      for (std::size_t k = 0; k < specs.size(); ++k) outcomes[k][trial] = run_one(specs[k], input, truth.labels);
    });

    for (std::size_t k = 0; k < specs.size(); ++k) {
      rows.push_back(summarize(specs[k].name(), l, r, outcomes[k], config.timing));
    }
    const ErrorBounds bounds = theoretical_bounds(l, r, moments.mu, moments.q);
    MetricsRow bound_mv{"bound-mv", l, r, bounds.mv, 0.0, 0, 0.0, std::nullopt, 0};
    rows.push_back(bound_mv);
    if (bounds.kos) rows.push_back(MetricsRow{"bound-kos", l, r, *bounds.kos, 0.0, 0, 0.0, std::nullopt, 0});
    std::size_t depth = config.tree_k;
    if (depth == 0) {
      const double loglog = n > 2 ? std::log(std::log(static_cast<double>(n))) : 0.0;
      depth = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(loglog)));
    }
    rows.push_back(MetricsRow{"bound-tree", l, r, tree_probability_bound(n, l, r, depth), 0.0, 0, 0.0, std::nullopt, 0});
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << "estimator,l,r,mean_error,std_error,trials,mean_iterations,wall_time_ms,failures\r\n";
  for (const MetricsRow& row : rows) {
    out << csv_field(row.estimator) << ',' << row.l << ',' << row.r << ',' << format_number(row.mean_error) << ','
        << format_number(row.std_error) << ',' << row.trials << ',' << format_number(row.mean_iterations) << ','
        << (row.wall_time_ms ? format_number(*row.wall_time_ms) : std::string()) << ',' << row.failures << "\r\n";
  }
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::ostringstream out;
  write_metrics_csv(out, rows);
  return out.str();
}

std::vector<MetricsRow> run_subsample_experiment(const Dataset& dataset, const SubsampleConfig& config) {
  validate(dataset);
  if (!dataset.truth_labels) fail(ErrorKind::parameter, "subsampling experiments need truth labels");
  if (config.resamples == 0) fail(ErrorKind::parameter, "resamples must be at least 1");
  if (config.estimators.empty()) fail(ErrorKind::parameter, "at least one estimator is required");
  if (config.threads == 0) fail(ErrorKind::parameter, "threads must be at least 1");
  const auto specs = make_specs(config.estimators, config.k_max, config.tol, KosInit::random_normal);

  // Reference reliabilities come from the full dataset so that subsampling
  // does not change what the oracles treat as true.
  Dataset reference = dataset;
  reference.measured_reliabilities = reference_reliabilities(dataset);

  std::vector<std::vector<TrialOutcome>> outcomes(specs.size(), std::vector<TrialOutcome>(config.resamples));
  parallel_for(config.resamples, config.threads, [&](std::size_t trial) {
    const Seed trial_seed = derive_seed(config.seed, {trial});
    const Dataset sub = subsample_assignments(reference, config.l_target, derive_seed(trial_seed, Stage::subsample));
    const auto& truth = *sub.truth_labels;
    const auto& reliabilities = *sub.measured_reliabilities;
    const std::optional<ReliabilityPrior> prior =
        reliabilities.empty() ? std::nullopt : std::optional(empirical_prior(reliabilities));
    const InferenceInput input{sub.graph,        sub.answers, prior ? &*prior : nullptr, truth, reliabilities,
                               derive_seed(trial_seed, Stage::estimator)};
    for (std::size_t k = 0; k < specs.size(); ++k) outcomes[k][trial] = run_one(specs[k], input, truth);
  });

  std::vector<MetricsRow> rows;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    rows.push_back(summarize(specs[k].name(), config.l_target, 0, outcomes[k], false));
  }
  return rows;
}

}  // namespace crowdbp
