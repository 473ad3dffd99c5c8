#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crowdbp/graph.hpp"
#include "crowdbp/rng.hpp"

namespace crowdbp {

/// Answer alphabet of a dataset file.
enum class Alphabet {
  plus_minus_one,  ///< -1 / +1 (also accepts a bare 1)
  zero_one,        ///< 0 / 1, with 0 read as -1
};

/// Observed crowdsourcing data with optional gold information.
struct Dataset {
  AssignmentGraph graph;
  AnswerMatrix answers;
  std::optional<std::vector<Label>> truth_labels;
  std::optional<std::vector<double>> measured_reliabilities;
  std::vector<std::string> task_names;
  std::vector<std::string> worker_names;
};

/// Throws when optional fields do not match the graph dimensions.
void validate(const Dataset& dataset);

/// Edge CSV:
///
///     # alphabet=pm1            (or 01; default pm1)
///     task,worker,answer[,truth[,reliability]]
///     t1,w1,+1,+1,0.9
///
/// The header row is optional. Without one, the column count decides which
/// optional columns are present. `truth` is per task and `reliability` per
/// worker; repeated values must agree. Ids are compacted in order of first
/// appearance.
Dataset read_dataset(std::istream& in, const std::string& source_name = "<stream>");
Dataset load_dataset(const std::filesystem::path& path);

void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Dataset from a simulated instance, with truth and reliabilities attached.
Dataset make_dataset(AssignmentGraph graph, AnswerMatrix answers, const GroundTruth* truth);

/// Fraction of each worker's answers that agree with `labels`.
std::vector<double> agreement_rates(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                    std::span<const Label> labels);

/// Worker reliabilities to treat as true: the measured column when present,
/// otherwise agreement with the truth labels. Empty when neither exists.
std::optional<std::vector<double>> reference_reliabilities(const Dataset& dataset);

/// Keeps a uniform random subset of min(l_target, degree) edges per task.
/// Workers left without edges are dropped and worker ids compacted.
Dataset subsample_assignments(const Dataset& dataset, std::size_t l_target, Seed seed);

}  // namespace crowdbp
