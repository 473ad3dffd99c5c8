#include "crowdbp/prior.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>

#include "crowdbp/error.hpp"

namespace crowdbp {

namespace {

constexpr double kWeightSumTolerance = 1e-12;

double log_sum_exp(std::span<const double> terms) {
  double peak = kLogZero;
  for (double t : terms) peak = std::max(peak, t);
  if (peak == kLogZero) return kLogZero;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return peak + std::log(sum);
}

// c * log(x) with 0 * log(0) = 0.
double count_log(std::size_t c, double x) { return c == 0 ? 0.0 : static_cast<double>(c) * std::log(x); }

double parse_number(std::string_view text, std::string_view what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && *first == ' ') ++first;
  while (last != first && last[-1] == ' ') --last;
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) {
    fail(ErrorKind::parameter, "cannot parse " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

}  // namespace

ReliabilityPrior ReliabilityPrior::discrete(std::vector<Atom> atoms) {
  if (atoms.empty()) fail(ErrorKind::parameter, "a discrete prior needs at least one atom");
  double total = 0.0;
  for (const Atom& a : atoms) {
    if (!(a.p >= 0.0 && a.p <= 1.0)) fail(ErrorKind::parameter, "atom location " + format_double(a.p) + " outside [0, 1]");
    if (!(a.weight > 0.0)) fail(ErrorKind::parameter, "atom weights must be positive");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    fail(ErrorKind::parameter, "atom weights sum to " + format_double(total) + ", not 1");
  }
  std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.p < b.p; });
  ReliabilityPrior prior;
  prior.kind_ = Kind::discrete;
  prior.atoms_ = std::move(atoms);
  return prior;
}

ReliabilityPrior ReliabilityPrior::beta(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    fail(ErrorKind::parameter, "beta prior parameters must be positive");
  }
  ReliabilityPrior prior;
  prior.kind_ = Kind::beta;
  prior.alpha_ = alpha;
  prior.beta_ = beta;
  return prior;
}

Moments ReliabilityPrior::moments() const {
  if (kind_ == Kind::beta) {
    const double s = alpha_ + beta_;
    const double mean = alpha_ / s;
    const double second = alpha_ * (alpha_ + 1.0) / (s * (s + 1.0));
    return {2.0 * mean - 1.0, 4.0 * second - 4.0 * mean + 1.0};
  }
  double mu = 0.0;
  double q = 0.0;
  for (const Atom& a : atoms_) {
    const double m = 2.0 * a.p - 1.0;
    mu += a.weight * m;
    q += a.weight * m * m;
  }
  return {mu, q};
}

double ReliabilityPrior::log_factor(std::size_t c, std::size_t r) const {
  if (c > r) fail(ErrorKind::parameter, "factor count c exceeds r");
  if (kind_ == Kind::beta) {
    const double cd = static_cast<double>(c);
    const double wd = static_cast<double>(r - c);
    return std::lgamma(alpha_ + cd) + std::lgamma(beta_ + wd) - std::lgamma(alpha_ + beta_ + static_cast<double>(r)) -
           (std::lgamma(alpha_) + std::lgamma(beta_) - std::lgamma(alpha_ + beta_));
  }
  std::vector<double> terms;
  terms.reserve(atoms_.size());
  for (const Atom& a : atoms_) {
    if ((a.p == 0.0 && c > 0) || (a.p == 1.0 && c < r)) continue;
    terms.push_back(std::log(a.weight) + count_log(c, a.p) + count_log(r - c, 1.0 - a.p));
  }
  return log_sum_exp(terms);
}

double ReliabilityPrior::sample(Rng& rng) const {
  if (kind_ == Kind::beta) {
    std::gamma_distribution<double> ga(alpha_, 1.0);
    std::gamma_distribution<double> gb(beta_, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x + y > 0.0 ? x / (x + y) : (alpha_ >= beta_ ? 1.0 : 0.0);
  }
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (const Atom& a : atoms_) {
    cumulative += a.weight;
    if (u < cumulative) return a.p;
  }
  return atoms_.back().p;
}

std::string ReliabilityPrior::to_string() const {
  if (kind_ == Kind::beta) return "beta:" + format_double(alpha_) + "," + format_double(beta_);
  std::string out = "atoms:";
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    if (k) out += ',';
    out += format_double(atoms_[k].p) + "=" + format_double(atoms_[k].weight);
  }
  return out;
}

ReliabilityPrior spammer_hammer() { return ReliabilityPrior::discrete({{0.5, 0.5}, {0.9, 0.5}}); }

ReliabilityPrior adversary_spammer_hammer() {
  return ReliabilityPrior::discrete({{0.1, 0.25}, {0.5, 0.25}, {0.9, 0.5}});
}

ReliabilityPrior parse_prior(std::string_view text) {
  if (text == "sh") return spammer_hammer();
  if (text == "ash") return adversary_spammer_hammer();
  if (text.starts_with("beta:")) {
    const std::string_view body = text.substr(5);
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) fail(ErrorKind::parameter, "expected beta:A,B");
    return ReliabilityPrior::beta(parse_number(body.substr(0, comma), "beta alpha"),
                                  parse_number(body.substr(comma + 1), "beta beta"));
  }
  if (text.starts_with("atoms:")) {
    std::vector<Atom> atoms;
    std::string_view body = text.substr(6);
    while (!body.empty()) {
      const auto comma = body.find(',');
      const std::string_view item = body.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) fail(ErrorKind::parameter, "expected p=w in '" + std::string(item) + "'");
      atoms.push_back({parse_number(item.substr(0, eq), "atom location"), parse_number(item.substr(eq + 1), "atom weight")});
      body = comma == std::string_view::npos ? std::string_view{} : body.substr(comma + 1);
    }
    return ReliabilityPrior::discrete(std::move(atoms));
  }
  fail(ErrorKind::parameter, "unknown prior '" + std::string(text) + "' (expected sh, ash, beta:A,B or atoms:p=w,...)");
}

ReliabilityPrior empirical_prior(std::span<const double> estimates) {
  if (estimates.empty()) fail(ErrorKind::parameter, "empirical prior needs at least one estimate");
  std::vector<double> sorted(estimates.begin(), estimates.end());
  for (double p : sorted) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::parameter, "reliability estimate outside [0, 1]");
  }
  std::sort(sorted.begin(), sorted.end());
  const double unit = 1.0 / static_cast<double>(sorted.size());
  std::vector<Atom> atoms;
  for (std::size_t k = 0; k < sorted.size();) {
    std::size_t run = k;
    while (run < sorted.size() && sorted[run] == sorted[k]) ++run;
    atoms.push_back({sorted[k], static_cast<double>(run - k) * unit});
    k = run;
  }
  return ReliabilityPrior::discrete(std::move(atoms));
}

FactorTable::FactorTable(const ReliabilityPrior& prior, std::size_t r_max) : r_max_(r_max) {
  values_.resize(index(0, r_max + 1));
  for (std::size_t r = 0; r <= r_max; ++r) {
    for (std::size_t c = 0; c <= r; ++c) values_[index(c, r)] = prior.log_factor(c, r);
  }
}

}  // namespace crowdbp
