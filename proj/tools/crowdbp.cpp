// crowdbp: simulate crowdsourcing data, infer labels, and run experiment sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "crowdbp/dataset.hpp"
#include "crowdbp/error.hpp"
#include "crowdbp/estimators.hpp"
#include "crowdbp/experiment.hpp"
#include "crowdbp/prior.hpp"

namespace {

using namespace crowdbp;

// Writes to `path`, or stdout for "" and "-".
template <typename Writer>
void with_output(const std::string& path, Writer&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::parameter, "cannot write " + path);
  write(out);
  if (!out) fail(ErrorKind::parameter, "write to " + path + " failed");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct SimulateArgs {
  std::size_t n = 200;
  std::size_t l = 5;
  std::size_t r = 5;
  std::string prior = "sh";
  Seed seed = 1;
  std::string out;
};

void simulate(const SimulateArgs& a) {
  const ReliabilityPrior prior = parse_prior(a.prior);
  AssignmentGraph graph = generate_regular_bipartite(a.n, a.l, a.r, derive_seed(a.seed, Stage::graph));
  const GroundTruth truth = sample_ground_truth(graph, prior, derive_seed(a.seed, Stage::truth));
  AnswerMatrix answers = sample_answers(graph, truth, derive_seed(a.seed, Stage::answers));
  const Dataset dataset = make_dataset(std::move(graph), std::move(answers), &truth);
  with_output(a.out, [&](std::ostream& os) { write_dataset(os, dataset); });
}

struct InferArgs {
  std::string data;
  std::string estimator = "bp";
  std::string prior;
  std::size_t k_max = 100;
  double tol = 1e-5;
  Seed seed = 1;
  std::size_t subsample = 0;
  std::string out;
};

void infer(const InferArgs& a) {
  Dataset dataset = load_dataset(a.data);
  // Reliabilities treated as true are fixed on the full data before any subsampling.
  dataset.measured_reliabilities = reference_reliabilities(dataset);
  if (a.subsample > 0) dataset = subsample_assignments(dataset, a.subsample, derive_seed(a.seed, Stage::subsample));

  EstimatorSpec spec = parse_estimator(a.estimator);
  spec.bp.k_max = a.k_max;
  spec.bp.tol = a.tol;

  std::optional<ReliabilityPrior> prior;
  if (!a.prior.empty()) {
    prior = parse_prior(a.prior);
  } else if (dataset.measured_reliabilities && !dataset.measured_reliabilities->empty()) {
    prior = empirical_prior(*dataset.measured_reliabilities);
  }
  std::span<const Label> truth;
  if (dataset.truth_labels) truth = *dataset.truth_labels;
  std::span<const double> reliabilities;
  if (dataset.measured_reliabilities) reliabilities = *dataset.measured_reliabilities;

  const InferenceInput input{dataset.graph, dataset.answers, prior ? &*prior : nullptr, truth, reliabilities,
                             derive_seed(a.seed, Stage::estimator)};
  const EstimateReport report = run_estimator(spec, input);

  with_output(a.out, [&](std::ostream& os) {
    os << "task,label,margin\n";
    for (TaskId i = 0; i < dataset.graph.n_tasks(); ++i) {
      const std::string name = dataset.task_names.empty() ? "t" + std::to_string(i) : dataset.task_names[i];
      os << name << ',' << (report.labels[i] > 0 ? "+1" : "-1") << ',' << fmt(report.margins[i]) << '\n';
    }
  });
  std::cerr << "estimator=" << spec.name() << " iterations=" << report.iterations_run
            << " converged=" << (report.converged ? "true" : "false");
  if (dataset.truth_labels) std::cerr << " error_rate=" << fmt(error_rate(report, *dataset.truth_labels));
  std::cerr << '\n';
}

struct BenchArgs {
  std::string config;
  std::optional<std::size_t> threads;
  std::string out;
};

void bench(const BenchArgs& a) {
  ExperimentConfig config = load_config(a.config);
  if (a.threads) config.threads = *a.threads;
  const auto rows = run_experiment(config);
  const std::string path = a.out.empty() ? config.output : a.out;
  with_output(path, [&](std::ostream& os) { write_metrics_csv(os, rows); });
}

struct ResampleArgs {
  std::string data;
  std::size_t l = 5;
  std::string estimators = "mv,kos,em,bp,ebp1,ebp2,oracle-work,oracle-task";
  std::size_t resamples = 100;
  std::size_t k_max = 100;
  double tol = 1e-5;
  Seed seed = 1;
  std::size_t threads = 1;
  std::string out;
};

void resample(const ResampleArgs& a) {
  const Dataset dataset = load_dataset(a.data);
  SubsampleConfig config;
  config.l_target = a.l;
  config.resamples = a.resamples;
  config.k_max = a.k_max;
  config.tol = a.tol;
  config.seed = a.seed;
  config.threads = a.threads;
  std::string_view list = a.estimators;
  while (!list.empty()) {
    const auto comma = list.find(',');
    config.estimators.emplace_back(list.substr(0, comma));
    list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 1);
  }
  const auto rows = run_subsample_experiment(dataset, config);
  with_output(a.out, [&](std::ostream& os) { write_metrics_csv(os, rows); });
}

struct BoundsArgs {
  std::size_t l = 0;
  std::size_t r = 0;
  std::optional<double> mu;
  std::optional<double> q;
  std::string prior;
  std::optional<std::size_t> n;
  std::size_t k = 1;
};

void bounds(const BoundsArgs& a) {
  double mu = 0.0;
  double q = 0.0;
  if (!a.prior.empty()) {
    const Moments m = parse_prior(a.prior).moments();
    mu = m.mu;
    q = m.q;
  }
  if (a.mu) mu = *a.mu;
  if (a.q) q = *a.q;
  if (a.prior.empty() && (!a.mu || !a.q)) fail(ErrorKind::parameter, "give --mu and --q, or --prior");
  if (!(mu > 0.0 && mu <= 1.0)) fail(ErrorKind::parameter, "mu must lie in (0, 1]");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorKind::parameter, "q must lie in [0, 1]");
  const ErrorBounds b = theoretical_bounds(a.l, a.r, mu, q);
  std::cout << "mv_bound=" << fmt(b.mv) << '\n';
  std::cout << "kos_bound=" << (b.kos ? fmt(*b.kos) : std::string("undefined")) << '\n';
  if (a.n) std::cout << "tree_bound=" << fmt(tree_probability_bound(*a.n, a.l, a.r, a.k)) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label inference for crowdsourced binary tasks"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a simulated dataset CSV with truth columns");
  sim_cmd->add_option("--n", sim.n, "Number of tasks")->capture_default_str();
  sim_cmd->add_option("--l", sim.l, "Workers per task")->capture_default_str();
  sim_cmd->add_option("--r", sim.r, "Tasks per worker")->capture_default_str();
  sim_cmd->add_option("--prior", sim.prior, "sh, ash, beta:A,B or atoms:p=w,...")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Output path (default stdout)");

  InferArgs inf;
  auto* inf_cmd = app.add_subcommand("infer", "Estimate task labels for a dataset");
  inf_cmd->add_option("--data", inf.data, "Dataset CSV")->required();
  inf_cmd->add_option("--estimator", inf.estimator, "mv, kos, em, bp, ebpN, ebpN-addone, oracle-work or oracle-task")
      ->capture_default_str();
  inf_cmd->add_option("--prior", inf.prior, "Reliability prior (default: empirical from the dataset)");
  inf_cmd->add_option("--kmax", inf.k_max, "Iteration cap")->capture_default_str();
  inf_cmd->add_option("--tol", inf.tol, "Convergence tolerance")->capture_default_str();
  inf_cmd->add_option("--seed", inf.seed, "Seed for randomized estimators and subsampling")->capture_default_str();
  inf_cmd->add_option("--subsample", inf.subsample, "Keep at most this many answers per task (0 keeps all)");
  inf_cmd->add_option("--out", inf.out, "Output path (default stdout)");

  BenchArgs bch;
  auto* bch_cmd = app.add_subcommand("bench", "Run a simulation sweep from a config file");
  bch_cmd->add_option("--config", bch.config, "key = value config file")->required();
  bch_cmd->add_option("--threads", bch.threads, "Override the config thread count");
  bch_cmd->add_option("--out", bch.out, "Output path (default: config output, else stdout)");

  ResampleArgs rs;
  auto* rs_cmd = app.add_subcommand("resample", "Repeatedly subsample a labelled dataset and score estimators");
  rs_cmd->add_option("--data", rs.data, "Dataset CSV with a truth column")->required();
  rs_cmd->add_option("--l", rs.l, "Answers kept per task")->capture_default_str();
  rs_cmd->add_option("--estimators", rs.estimators, "Comma-separated estimator list")->capture_default_str();
  rs_cmd->add_option("--resamples", rs.resamples, "Number of subsamples")->capture_default_str();
  rs_cmd->add_option("--kmax", rs.k_max, "Iteration cap")->capture_default_str();
  rs_cmd->add_option("--tol", rs.tol, "Convergence tolerance")->capture_default_str();
  rs_cmd->add_option("--seed", rs.seed, "Master seed")->capture_default_str();
  rs_cmd->add_option("--threads", rs.threads, "Worker threads")->capture_default_str();
  rs_cmd->add_option("--out", rs.out, "Output path (default stdout)");

  BoundsArgs bd;
  auto* bd_cmd = app.add_subcommand("bounds", "Print error bounds for MV and the spectral method");
  bd_cmd->add_option("--l", bd.l, "Workers per task")->required();
  bd_cmd->add_option("--r", bd.r, "Tasks per worker")->required();
  bd_cmd->add_option("--mu", bd.mu, "E[2p - 1]");
  bd_cmd->add_option("--q", bd.q, "E[(2p - 1)^2]");
  bd_cmd->add_option("--prior", bd.prior, "Take mu and q from a prior");
  bd_cmd->add_option("--n", bd.n, "Task count, for the tree-probability bound");
  bd_cmd->add_option("--k", bd.k, "Depth parameter for the tree-probability bound")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorKind::parameter);
  }

  try {
    if (*sim_cmd) simulate(sim);
    if (*inf_cmd) infer(inf);
    if (*bch_cmd) bench(bch);
    if (*rs_cmd) resample(rs);
    if (*bd_cmd) bounds(bd);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
