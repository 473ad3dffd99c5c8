#include <cmath>
#include <random>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "crowdbp/error.hpp"
#include "crowdbp/prior.hpp"
#include "doctest.h"
#include "reference.hpp"

using namespace crowdbp;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::parameter;
}

double log_binomial(std::size_t r, std::size_t c) {
  return std::lgamma(static_cast<double>(r) + 1) - std::lgamma(static_cast<double>(c) + 1) -
         std::lgamma(static_cast<double>(r - c) + 1);
}

// Tanh-sinh integration of p^c (1-p)^(r-c) against the Beta density.
double beta_factor_by_quadrature(double a, double b, std::size_t c, std::size_t r) {
  const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double ca = static_cast<double>(c) + a - 1.0;
  const double cb = static_cast<double>(r - c) + b - 1.0;
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(
      [&](double p) {
        const double left = ca == 0.0 ? 0.0 : ca * std::log(p);
        const double right = cb == 0.0 ? 0.0 : cb * std::log1p(-p);
        return std::exp(log_norm + left + right);
      },
      0.0, 1.0);
}

}  // namespace

TEST_CASE("moments of the named priors") {
  const auto sh = spammer_hammer().moments();
  CHECK(sh.mu == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(sh.q == doctest::Approx(0.32).epsilon(1e-14));
  const auto ash = adversary_spammer_hammer().moments();
  CHECK(ash.mu == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(ash.q == doctest::Approx(0.48).epsilon(1e-14));
  const auto b = ReliabilityPrior::beta(2, 1).moments();
  CHECK(b.mu == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  // E[(2p-1)^2] for Beta(2,1): 4 E[p^2] - 4 E[p] + 1 = 4/2 - 8/3 + 1.
  CHECK(b.q == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("factor values") {
  const auto sh = spammer_hammer();
  CHECK(std::exp(sh.log_factor(2, 2)) == doctest::Approx(0.53).epsilon(1e-14));
  CHECK(std::exp(sh.log_factor(1, 2)) == doctest::Approx(0.17).epsilon(1e-14));
  CHECK(std::exp(sh.log_factor(0, 2)) == doctest::Approx(0.13).epsilon(1e-14));
  CHECK(std::exp(ReliabilityPrior::beta(2, 1).log_factor(1, 1)) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(sh.log_factor(0, 0) == 0.0);
  CHECK(ReliabilityPrior::beta(3, 5).log_factor(0, 0) == doctest::Approx(0.0));
  CHECK(kind_of([&] { sh.log_factor(3, 2); }) == ErrorKind::parameter);
}

TEST_CASE("exact zeros become the -inf sentinel") {
  const auto perfect = parse_prior("atoms:1=1");
  CHECK(perfect.log_factor(0, 1) == kLogZero);
  CHECK(perfect.log_factor(1, 1) == 0.0);
  const auto adversary = parse_prior("atoms:0=1");
  CHECK(adversary.log_factor(1, 2) == kLogZero);
  CHECK(adversary.log_factor(0, 2) == 0.0);
}

TEST_CASE("factor matches the independent linear-domain sum") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto atoms = ref::random_atoms(rng, 5);
    const auto prior = ReliabilityPrior::discrete(atoms);
    for (std::size_t r = 0; r <= 12; ++r) {
      for (std::size_t c = 0; c <= r; ++c) {
        const double expected = std::log(static_cast<double>(ref::factor(atoms, c, r)));
        REQUIRE(prior.log_factor(c, r) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("factor table rows are normalized over answer patterns") {
  std::mt19937_64 rng(3);
  std::vector<ReliabilityPrior> priors{spammer_hammer(), adversary_spammer_hammer(), ReliabilityPrior::beta(2, 1),
                                       ReliabilityPrior::beta(0.5, 0.5), ReliabilityPrior::beta(7, 2)};
  for (int k = 0; k < 20; ++k) priors.push_back(ReliabilityPrior::discrete(ref::random_atoms(rng, 6)));
  for (const auto& prior : priors) {
    const FactorTable table(prior, 40);
    for (std::size_t r = 0; r <= 40; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c <= r; ++c) total += std::exp(log_binomial(r, c) + table.log_value(c, r));
      REQUIRE(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("closed-form Beta factor matches numerical integration") {
  const double shapes[][2] = {{2, 1}, {1, 1}, {3, 2}, {2.5, 4}, {5, 1.5}};
  for (const auto& s : shapes) {
    const auto prior = ReliabilityPrior::beta(s[0], s[1]);
    for (std::size_t r = 0; r <= 10; ++r) {
      for (std::size_t c = 0; c <= r; ++c) {
        const double exact = std::exp(prior.log_factor(c, r));
        REQUIRE(std::abs(exact - beta_factor_by_quadrature(s[0], s[1], c, r)) < 1e-8);
      }
    }
  }
}

TEST_CASE("uninformative prior gives 2^-r everywhere") {
  const auto half = parse_prior("atoms:0.5=1");
  for (std::size_t r = 0; r <= 20; ++r) {
    for (std::size_t c = 0; c <= r; ++c) {
      CHECK(half.log_factor(c, r) == doctest::Approx(-static_cast<double>(r) * std::log(2.0)).epsilon(1e-14));
    }
  }
}

TEST_CASE("empirical prior merges equal estimates") {
  const std::vector<double> a{0.5, 0.9};
  const auto pa = empirical_prior(a);
  REQUIRE(pa.atoms().size() == 2);
  CHECK(pa.atoms()[0] == Atom{0.5, 0.5});
  CHECK(pa.atoms()[1] == Atom{0.9, 0.5});
  const std::vector<double> b{0.7, 0.7, 0.7};
  const auto pb = empirical_prior(b);
  REQUIRE(pb.atoms().size() == 1);
  CHECK(pb.atoms()[0] == Atom{0.7, 1.0});
  const std::vector<double> c{0.75, 0.25, 1.0, 0.75};
  const auto pc = empirical_prior(c);
  REQUIRE(pc.atoms().size() == 3);
  CHECK(pc.atoms()[0] == Atom{0.25, 0.25});
  CHECK(pc.atoms()[1] == Atom{0.75, 0.5});
  CHECK(pc.atoms()[2] == Atom{1.0, 0.25});
  CHECK(kind_of([] { empirical_prior(std::vector<double>{}); }) == ErrorKind::parameter);
  CHECK(kind_of([] { empirical_prior(std::vector<double>{1.2}); }) == ErrorKind::parameter);
}

TEST_CASE("prior validation") {
  CHECK(kind_of([] { ReliabilityPrior::discrete({}); }) == ErrorKind::parameter);
  CHECK(kind_of([] { ReliabilityPrior::discrete({{1.5, 1.0}}); }) == ErrorKind::parameter);
  CHECK(kind_of([] { ReliabilityPrior::discrete({{0.5, 0.5}, {0.9, 0.4}}); }) == ErrorKind::parameter);
  CHECK(kind_of([] { ReliabilityPrior::discrete({{0.5, 1.0}, {0.9, 0.0}}); }) == ErrorKind::parameter);
  CHECK(kind_of([] { ReliabilityPrior::beta(0, 1); }) == ErrorKind::parameter);
  CHECK(kind_of([] { ReliabilityPrior::beta(1, -2); }) == ErrorKind::parameter);
}

TEST_CASE("prior specification strings") {
  CHECK(parse_prior("sh").atoms().size() == 2);
  CHECK(parse_prior("ash").atoms().size() == 3);
  const auto b = parse_prior("beta:2,1");
  CHECK(b.kind() == ReliabilityPrior::Kind::beta);
  CHECK(b.alpha() == 2.0);
  CHECK(b.beta_param() == 1.0);
  const auto a = parse_prior("atoms:0.9=0.5,0.5=0.5");
  CHECK(a.atoms()[0].p == 0.5);
  for (const char* bad : {"", "xyz", "beta:2", "beta:a,b", "atoms:0.5", "atoms:0.5=0.7", "atoms:0.5=x"}) {
    CAPTURE(bad);
    CHECK(kind_of([&] { parse_prior(bad); }) == ErrorKind::parameter);
  }
  for (const auto& p : {spammer_hammer(), adversary_spammer_hammer(), ReliabilityPrior::beta(0.3, 7.25)}) {
    const auto again = parse_prior(p.to_string());
    CHECK(again.to_string() == p.to_string());
  }
}

TEST_CASE("samples follow the prior") {
  Rng rng = make_rng(5);
  const auto b = ReliabilityPrior::beta(2, 1);
  double sum = 0.0;
  for (int k = 0; k < 20000; ++k) {
    const double p = b.sample(rng);
    REQUIRE(p >= 0.0);
    REQUIRE(p <= 1.0);
    sum += p;
  }
  CHECK(std::abs(sum / 20000.0 - 2.0 / 3.0) < 0.01);
}
