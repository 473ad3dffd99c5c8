#include "crowdbp/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "crowdbp/error.hpp"

namespace crowdbp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void bad_row(const std::string& source, std::size_t line, const std::string& what) {
  fail(ErrorKind::data_format, source + ":" + std::to_string(line) + ": " + what);
}

// Splits one CSV record. Fields may be double-quoted with "" as an escaped quote.
std::vector<std::string> split_record(std::string_view line, const std::string& source, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
    } else if (was_quoted) {
      if (c != ' ' && c != '\t') bad_row(source, line_no, "text after a closing quote");
    } else {
      field += c;
    }
  }
  if (quoted) bad_row(source, line_no, "unterminated quoted field");
  fields.push_back(was_quoted ? field : std::string(trim(field)));
  return fields;
}

std::optional<Label> parse_label(std::string_view text, Alphabet alphabet) {
  if (alphabet == Alphabet::zero_one) {
    if (text == "0") return Label{-1};
    if (text == "1") return Label{1};
    return std::nullopt;
  }
  if (text == "+1" || text == "1") return Label{1};
  if (text == "-1") return Label{-1};
  return std::nullopt;
}

std::string alphabet_hint(Alphabet alphabet) { return alphabet == Alphabet::zero_one ? "0 or 1" : "-1 or +1"; }

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos && trim(s) == s) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string label_text(Label s) { return s > 0 ? "+1" : "-1"; }

// Shortest text that reads back to the same double.
std::string double_text(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

}  // namespace

void validate(const Dataset& dataset) {
  check_dimensions(dataset.graph, dataset.answers);
  if (dataset.truth_labels) {
    if (dataset.truth_labels->size() != dataset.graph.n_tasks()) {
      fail(ErrorKind::parameter, "truth labels do not match the task count");
    }
    for (Label s : *dataset.truth_labels) {
      if (s != 1 && s != -1) fail(ErrorKind::parameter, "truth label is not -1 or +1");
    }
  }
  if (dataset.measured_reliabilities) {
    if (dataset.measured_reliabilities->size() != dataset.graph.n_workers()) {
      fail(ErrorKind::parameter, "measured reliabilities do not match the worker count");
    }
    for (double p : *dataset.measured_reliabilities) {
      if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::parameter, "measured reliability outside [0, 1]");
    }
  }
  if (!dataset.task_names.empty() && dataset.task_names.size() != dataset.graph.n_tasks()) {
    fail(ErrorKind::parameter, "task names do not match the task count");
  }
  if (!dataset.worker_names.empty() && dataset.worker_names.size() != dataset.graph.n_workers()) {
    fail(ErrorKind::parameter, "worker names do not match the worker count");
  }
}

Dataset read_dataset(std::istream& in, const std::string& source_name) {
  Alphabet alphabet = Alphabet::plus_minus_one;
  bool header_seen = false;
  bool data_seen = false;
  int truth_col = -1;
  int reliability_col = -1;
  std::size_t n_columns = 0;

  std::unordered_map<std::string, TaskId> task_ids;
  std::unordered_map<std::string, WorkerId> worker_ids;
  std::vector<std::string> task_names;
  std::vector<std::string> worker_names;
  std::vector<Edge> edges;
  std::vector<Label> answers;
  std::vector<std::optional<Label>> truth;
  std::vector<std::optional<double>> reliability;
  std::unordered_map<std::uint64_t, std::size_t> first_line;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      const std::string comment = lower(trim(view.substr(1)));
      if (comment.starts_with("alphabet")) {
        if (data_seen) bad_row(source_name, line_no, "alphabet must be declared before the first data row");
        const auto eq = comment.find('=');
        const std::string value = eq == std::string::npos ? "" : std::string(trim(std::string_view(comment).substr(eq + 1)));
        if (value == "pm1" || value == "+-1" || value == "-1,+1") {
          alphabet = Alphabet::plus_minus_one;
        } else if (value == "01" || value == "0,1") {
          alphabet = Alphabet::zero_one;
        } else {
          bad_row(source_name, line_no, "unknown alphabet '" + value + "' (expected pm1 or 01)");
        }
      }
      continue;
    }

    const auto fields = split_record(view, source_name, line_no);
    if (!header_seen && !data_seen && !fields.empty() && lower(fields[0]) == "task") {
      header_seen = true;
      if (fields.size() < 3 || lower(fields[1]) != "worker" || lower(fields[2]) != "answer") {
        bad_row(source_name, line_no, "header must start with task,worker,answer");
      }
      for (std::size_t k = 3; k < fields.size(); ++k) {
        const std::string name = lower(fields[k]);
        if (name == "truth" && truth_col < 0) {
          truth_col = static_cast<int>(k);
        } else if (name == "reliability" && reliability_col < 0) {
          reliability_col = static_cast<int>(k);
        } else {
          bad_row(source_name, line_no, "unknown or repeated column '" + fields[k] + "'");
        }
      }
      n_columns = fields.size();
      continue;
    }

    if (!data_seen && !header_seen) {
      n_columns = fields.size();
      if (n_columns < 3 || n_columns > 5) {
        bad_row(source_name, line_no, "expected 3 to 5 columns, found " + std::to_string(n_columns));
      }
      if (n_columns >= 4) truth_col = 3;
      if (n_columns == 5) reliability_col = 4;
    }
    data_seen = true;
    if (fields.size() != n_columns) {
      bad_row(source_name, line_no, "expected " + std::to_string(n_columns) + " columns, found " +
                                        std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) bad_row(source_name, line_no, "empty task or worker id");

    const auto answer = parse_label(fields[2], alphabet);
    if (!answer) {
      bad_row(source_name, line_no, "answer '" + fields[2] + "' is not " + alphabet_hint(alphabet));
    }

    auto [task_it, new_task] = task_ids.try_emplace(fields[0], static_cast<TaskId>(task_names.size()));
    if (new_task) {
      task_names.push_back(fields[0]);
      truth.emplace_back();
    }
    auto [worker_it, new_worker] = worker_ids.try_emplace(fields[1], static_cast<WorkerId>(worker_names.size()));
    if (new_worker) {
      worker_names.push_back(fields[1]);
      reliability.emplace_back();
    }
    const TaskId i = task_it->second;
    const WorkerId u = worker_it->second;

    const std::uint64_t key = (std::uint64_t{i} << 32) | u;
    if (auto [it, fresh] = first_line.try_emplace(key, line_no); !fresh) {
      bad_row(source_name, line_no, "duplicate answer for task '" + fields[0] + "', worker '" + fields[1] +
                                        "' (first seen on line " + std::to_string(it->second) + ")");
    }

    if (truth_col >= 0 && !fields[truth_col].empty()) {
      const auto s = parse_label(fields[truth_col], alphabet);
      if (!s) bad_row(source_name, line_no, "truth '" + fields[truth_col] + "' is not " + alphabet_hint(alphabet));
      if (truth[i] && *truth[i] != *s) bad_row(source_name, line_no, "conflicting truth for task '" + fields[0] + "'");
      truth[i] = *s;
    }
    if (reliability_col >= 0 && !fields[reliability_col].empty()) {
      const std::string& text = fields[reliability_col];
      double p = 0.0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), p);
      if (ec != std::errc() || ptr != text.data() + text.size() || !(p >= 0.0 && p <= 1.0)) {
        bad_row(source_name, line_no, "reliability '" + text + "' is not a number in [0, 1]");
      }
      if (reliability[u] && *reliability[u] != p) {
        bad_row(source_name, line_no, "conflicting reliability for worker '" + fields[1] + "'");
      }
      reliability[u] = p;
    }
    edges.push_back({i, u});
    answers.push_back(*answer);
  }
  if (in.bad()) fail(ErrorKind::data_format, source_name + ": read error");

  Dataset dataset{AssignmentGraph(task_names.size(), worker_names.size(), std::move(edges)),
                  AnswerMatrix(std::move(answers)), std::nullopt, std::nullopt, std::move(task_names),
                  std::move(worker_names)};
  if (truth_col >= 0) {
    std::vector<Label> labels;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (!truth[i]) fail(ErrorKind::data_format, source_name + ": task '" + dataset.task_names[i] + "' has no truth value");
      labels.push_back(*truth[i]);
    }
    dataset.truth_labels = std::move(labels);
  }
  if (reliability_col >= 0) {
    std::vector<double> values;
    for (std::size_t u = 0; u < reliability.size(); ++u) {
      if (!reliability[u]) {
        fail(ErrorKind::data_format, source_name + ": worker '" + dataset.worker_names[u] + "' has no reliability value");
      }
      values.push_back(*reliability[u]);
    }
    dataset.measured_reliabilities = std::move(values);
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data_format, "cannot open " + path.string());
  return read_dataset(in, path.string());
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  validate(dataset);
  const auto task_name = [&](TaskId i) {
    return dataset.task_names.empty() ? "t" + std::to_string(i) : quote_field(dataset.task_names[i]);
  };
  const auto worker_name = [&](WorkerId u) {
    return dataset.worker_names.empty() ? "w" + std::to_string(u) : quote_field(dataset.worker_names[u]);
  };
  out << "# alphabet=pm1\n";
  out << "task,worker,answer";
  if (dataset.truth_labels) out << ",truth";
  if (dataset.measured_reliabilities) out << ",reliability";
  out << '\n';
  for (EdgeId e = 0; e < dataset.graph.n_edges(); ++e) {
    const Edge& edge = dataset.graph.edge(e);
    out << task_name(edge.task) << ',' << worker_name(edge.worker) << ',' << label_text(dataset.answers[e]);
    if (dataset.truth_labels) out << ',' << label_text((*dataset.truth_labels)[edge.task]);
    if (dataset.measured_reliabilities) out << ',' << double_text((*dataset.measured_reliabilities)[edge.worker]);
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::parameter, "cannot write " + path.string());
  write_dataset(out, dataset);
  if (!out) fail(ErrorKind::parameter, "write to " + path.string() + " failed");
}

Dataset make_dataset(AssignmentGraph graph, AnswerMatrix answers, const GroundTruth* truth) {
  Dataset dataset{std::move(graph), std::move(answers), std::nullopt, std::nullopt, {}, {}};
  for (TaskId i = 0; i < dataset.graph.n_tasks(); ++i) dataset.task_names.push_back("t" + std::to_string(i));
  for (WorkerId u = 0; u < dataset.graph.n_workers(); ++u) dataset.worker_names.push_back("w" + std::to_string(u));
  if (truth) {
    check_dimensions(dataset.graph, *truth);
    dataset.truth_labels = truth->labels;
    dataset.measured_reliabilities = truth->reliabilities;
  }
  validate(dataset);
  return dataset;
}

std::vector<double> agreement_rates(const AssignmentGraph& graph, const AnswerMatrix& answers,
                                    std::span<const Label> labels) {
  check_dimensions(graph, answers);
  if (labels.size() != graph.n_tasks()) fail(ErrorKind::parameter, "one label per task is required");
  std::vector<double> rates(graph.n_workers(), 0.5);
  for (WorkerId u = 0; u < graph.n_workers(); ++u) {
    const auto adj = graph.edges_of_worker(u);
    if (adj.empty()) continue;
    std::size_t matches = 0;
    for (EdgeId e : adj) matches += answers[e] == labels[graph.edge(e).task] ? 1 : 0;
    rates[u] = static_cast<double>(matches) / static_cast<double>(adj.size());
  }
  return rates;
}

std::optional<std::vector<double>> reference_reliabilities(const Dataset& dataset) {
  if (dataset.measured_reliabilities) return dataset.measured_reliabilities;
  if (dataset.truth_labels) return agreement_rates(dataset.graph, dataset.answers, *dataset.truth_labels);
  return std::nullopt;
}

Dataset subsample_assignments(const Dataset& dataset, std::size_t l_target, Seed seed) {
  if (l_target < 1) fail(ErrorKind::parameter, "target degree must be at least 1");
  validate(dataset);
  const AssignmentGraph& graph = dataset.graph;
  Rng rng = make_rng(seed);

  std::vector<char> keep(graph.n_edges(), 0);
  std::vector<EdgeId> pool;
  for (TaskId i = 0; i < graph.n_tasks(); ++i) {
    const auto adj = graph.edges_of_task(i);
    pool.assign(adj.begin(), adj.end());
    const std::size_t take = std::min(l_target, pool.size());
    // Partial Fisher-Yates: the first `take` slots are a uniform subset.
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      keep[pool[k]] = 1;
    }
  }

  std::vector<char> worker_used(graph.n_workers(), 0);
  for (EdgeId e = 0; e < graph.n_edges(); ++e) {
    if (keep[e]) worker_used[graph.edge(e).worker] = 1;
  }
  constexpr WorkerId unmapped = static_cast<WorkerId>(-1);
  std::vector<WorkerId> remap(graph.n_workers(), unmapped);
  Dataset out{AssignmentGraph(), AnswerMatrix(),  std::nullopt, std::nullopt, dataset.task_names, {}};
  std::vector<double> reliabilities;
  for (WorkerId u = 0; u < graph.n_workers(); ++u) {
    if (!worker_used[u]) continue;
    if (!dataset.worker_names.empty()) out.worker_names.push_back(dataset.worker_names[u]);
    if (dataset.measured_reliabilities) reliabilities.push_back((*dataset.measured_reliabilities)[u]);
  }
  std::size_t n_workers = 0;
  for (WorkerId u = 0; u < graph.n_workers(); ++u) {
    if (worker_used[u]) remap[u] = static_cast<WorkerId>(n_workers++);
  }

  std::vector<Edge> edges;
  std::vector<Label> answers;
  for (EdgeId e = 0; e < graph.n_edges(); ++e) {
    if (!keep[e]) continue;
    edges.push_back({graph.edge(e).task, remap[graph.edge(e).worker]});
    answers.push_back(dataset.answers[e]);
  }
  out.graph = AssignmentGraph(graph.n_tasks(), n_workers, std::move(edges));
  out.answers = AnswerMatrix(std::move(answers));
  out.truth_labels = dataset.truth_labels;
  if (dataset.measured_reliabilities) out.measured_reliabilities = std::move(reliabilities);
  validate(out);
  return out;
}

}  // namespace crowdbp
