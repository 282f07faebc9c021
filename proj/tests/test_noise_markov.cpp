#include <cmath>
#include <vector>

#include <doctest.h>

#include "fraclab/errors.hpp"
#include "fraclab/noise.hpp"
#include "test_util.hpp"

using namespace fraclab;
using namespace fraclab::noise;

namespace {

const std::vector<std::vector<double>> kFlip{{-1.0, 1.0}, {1.0, -1.0}};

}  // namespace

TEST_CASE("markov_stationary_distribution: detailed-balance oracles") {
  {
    const auto pi = markov_stationary_distribution(kFlip);
    REQUIRE(pi.size() == 2);
    CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-12));
  }
  {
    // birth-death 0 <-> 1 <-> 2 with birth 1, death 2: pi ~ (4, 2, 1)/7
    const std::vector<std::vector<double>> q{
        {-1.0, 1.0, 0.0}, {2.0, -3.0, 1.0}, {0.0, 2.0, -2.0}};
    const auto pi = markov_stationary_distribution(q);
    REQUIRE(pi.size() == 3);
    CHECK(pi[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(pi[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
    CHECK(pi[2] == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  }
}

TEST_CASE("sample_markov_chain: two-state flip has correlation e^{-2 lambda t}") {
  const TimeGrid grid(0.25, 64);
  const std::size_t n_paths = 4000;
  const auto ens =
      sample_markov_chain(grid, kFlip, {-1.0, 1.0}, n_paths, 21);
  CHECK(ens.kind() == EnsembleKind::kMarkovChain);
  CHECK(!ens.h().has_value());
  // states are +-1 with symmetric stationary law: zero mean, unit variance
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p)
    for (std::size_t i = 0; i < 64; ++i) {
      m1 += ens.at(p, i);
      m2 += ens.at(p, i) * ens.at(p, i);
    }
  m1 /= static_cast<double>(n_paths * 64);
  m2 /= static_cast<double>(n_paths * 64);
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));  // values are exactly +-1
  CHECK(std::abs(m1) < 0.05);
  for (std::size_t lag : {1u, 4u, 12u}) {
    const double target = std::exp(-2.0 * 0.25 * static_cast<double>(lag));
    const double rho = testutil::lag_correlation(ens, lag);
    const double se = testutil::lag_correlation_se(ens, lag);
    CHECK(std::abs(rho - target) <= 3.0 * se);
  }
}

TEST_CASE("sample_markov_chain: occupation fractions follow pi") {
  const std::vector<std::vector<double>> q{
      {-1.0, 1.0, 0.0}, {2.0, -3.0, 1.0}, {0.0, 2.0, -2.0}};
  const std::vector<double> values{0.0, 1.0, 2.0};
  const TimeGrid grid(0.5, 128);
  const std::size_t n_paths = 2000;
  const auto ens = sample_markov_chain(grid, q, values, n_paths, 8, false);
  std::vector<double> occ(3, 0.0);
  for (std::size_t p = 0; p < n_paths; ++p)
    for (std::size_t i = 0; i < 128; ++i)
      occ[static_cast<std::size_t>(ens.at(p, i) + 0.5)] += 1.0;
  const double total = static_cast<double>(n_paths * 128);
  // crude SE: treat paths as the independent unit
  const double se = 1.0 / std::sqrt(static_cast<double>(n_paths));
  CHECK(std::abs(occ[0] / total - 4.0 / 7.0) <= 3.0 * se);
  CHECK(std::abs(occ[1] / total - 2.0 / 7.0) <= 3.0 * se);
  CHECK(std::abs(occ[2] / total - 1.0 / 7.0) <= 3.0 * se);
}

TEST_CASE("sample_markov_chain: recentre subtracts the stationary mean") {
  const TimeGrid grid(0.5, 16);
  const auto raw = sample_markov_chain(grid, kFlip, {0.0, 1.0}, 50, 4, false);
  const auto centred = sample_markov_chain(grid, kFlip, {0.0, 1.0}, 50, 4, true);
  for (std::size_t i = 0; i < 16; ++i)
    CHECK(centred.at(7, i) == doctest::Approx(raw.at(7, i) - 0.5).epsilon(1e-12));
}

TEST_CASE("sample_markov_chain: input validation") {
  const TimeGrid grid(0.5, 8);
  // row sums must vanish, off-diagonals must be nonnegative
  CHECK_THROWS_AS(
      static_cast<void>(sample_markov_chain(grid, {{-1.0, 0.5}, {1.0, -1.0}},
                                            {0.0, 1.0}, 2, 1)),
      InvalidGenerator);
  CHECK_THROWS_AS(
      static_cast<void>(sample_markov_chain(grid, {{1.0, -1.0}, {1.0, -1.0}},
                                            {0.0, 1.0}, 2, 1)),
      InvalidGenerator);
  CHECK_THROWS_AS(
      static_cast<void>(sample_markov_chain(grid, kFlip, {0.0}, 2, 1)),
      std::invalid_argument);
  // absorbing second state: not irreducible
  CHECK_THROWS_AS(
      static_cast<void>(sample_markov_chain(grid, {{-1.0, 1.0}, {0.0, 0.0}},
                                            {0.0, 1.0}, 2, 1)),
      NotIrreducible);
  CHECK_THROWS_AS(
      static_cast<void>(markov_stationary_distribution(
          {{-1.0, 1.0, 0.0}, {1.0, -1.0, 0.0}, {0.0, 0.0, 0.0}})),
      NotIrreducible);
}

TEST_CASE("sample_markov_chain: determinism") {
  const TimeGrid grid(0.25, 32);
  const auto a = sample_markov_chain(grid, kFlip, {-1.0, 1.0}, 6, 99);
  const auto b = sample_markov_chain(grid, kFlip, {-1.0, 1.0}, 6, 99);
  CHECK(a.values() == b.values());
  const auto c = sample_markov_chain(grid, kFlip, {-1.0, 1.0}, 6, 100);
  CHECK(a.values() != c.values());
}
