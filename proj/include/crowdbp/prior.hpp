#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdbp/rng.hpp"

namespace crowdbp {

/// A point mass of the reliability distribution.
struct Atom {
  double p;
  double weight;

  friend bool operator==(const Atom&, const Atom&) = default;
};

/// mu = E[2p - 1], q = E[(2p - 1)^2].
struct Moments {
  double mu;
  double q;
};

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// Reliability distribution pi over worker correctness p in [0, 1].
/// Either a finite set of atoms or a Beta(alpha, beta) density.
class ReliabilityPrior {
 public:
  enum class Kind { discrete, beta };

  /// Atoms are sorted by p; weights must be positive and sum to 1 within 1e-12.
  static ReliabilityPrior discrete(std::vector<Atom> atoms);
  static ReliabilityPrior beta(double alpha, double beta);

  Kind kind() const noexcept { return kind_; }
  bool is_discrete() const noexcept { return kind_ == Kind::discrete; }
  std::span<const Atom> atoms() const noexcept { return atoms_; }
  double alpha() const noexcept { return alpha_; }
  double beta_param() const noexcept { return beta_; }

  Moments moments() const;

  /// log E[p^c (1-p)^(r-c)]. Returns kLogZero when the expectation is exactly 0.
  double log_factor(std::size_t c, std::size_t r) const;

  double sample(Rng& rng) const;

  /// Canonical text form, parseable by parse_prior.
  std::string to_string() const;

 private:
  ReliabilityPrior() = default;

  Kind kind_ = Kind::discrete;
  std::vector<Atom> atoms_;
  double alpha_ = 0.0;
  double beta_ = 0.0;
};

/// pi(0.5) = pi(0.9) = 1/2.
ReliabilityPrior spammer_hammer();
/// pi(0.1) = pi(0.5) = 1/4, pi(0.9) = 1/2.
ReliabilityPrior adversary_spammer_hammer();

/// Parses `sh`, `ash`, `beta:A,B` or `atoms:p1=w1,p2=w2,...`.
ReliabilityPrior parse_prior(std::string_view text);

/// Discrete prior with one atom of weight 1/n per estimate; equal values merge.
ReliabilityPrior empirical_prior(std::span<const double> estimates);

/// Precomputed log f(c, r) for 0 <= c <= r <= r_max.
class FactorTable {
 public:
  FactorTable(const ReliabilityPrior& prior, std::size_t r_max);

  std::size_t r_max() const noexcept { return r_max_; }
  double log_value(std::size_t c, std::size_t r) const { return values_[index(c, r)]; }

  /// Row r as log values, c = 0..r.
  std::span<const double> row(std::size_t r) const { return {values_.data() + index(0, r), r + 1}; }

 private:
  static std::size_t index(std::size_t c, std::size_t r) { return r * (r + 1) / 2 + c; }

  std::size_t r_max_;
  std::vector<double> values_;
};

}  // namespace crowdbp
