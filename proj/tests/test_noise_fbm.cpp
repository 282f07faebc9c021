#include <cmath>
#include <vector>

#include <doctest.h>

#include "fraclab/noise.hpp"

using namespace fraclab;
using namespace fraclab::noise;

TEST_CASE("fbm_covariance: closed form") {
  const HurstParameter half(0.5);
  CHECK(fbm_covariance(1.0, 1.0, half) == doctest::Approx(1.0));
  CHECK(fbm_covariance(1.0, 2.0, half) == doctest::Approx(1.0));  // min(s,t)
  CHECK(fbm_covariance(1.0, 4.0, HurstParameter(0.75)) ==
        doctest::Approx(1.901923788646684).epsilon(1e-14));  // (1+8-3^1.5)/2
  CHECK(fbm_covariance(2.0, 3.0, HurstParameter(0.3)) ==
        doctest::Approx(fbm_covariance(3.0, 2.0, HurstParameter(0.3))));
}

TEST_CASE("increment_correlation: exact second difference and its tail") {
  const HurstParameter half(0.5);
  for (double t : {1.5, 2.0, 7.0}) CHECK(increment_correlation(t, half) == 0.0);
  for (double h : {0.3, 0.6, 0.8})
    CHECK(increment_correlation(1.0, HurstParameter(h)) ==
          doctest::Approx(0.5 * std::pow(2.0, 2.0 * h) - 1.0));
  CHECK(increment_correlation(10.0, HurstParameter(0.8)) ==
        doctest::Approx(0.19118086146520596).epsilon(1e-14));
  CHECK(increment_correlation(1.0, HurstParameter(0.3)) ==
        doctest::Approx(-0.242141716744801).epsilon(1e-13));
  // asymptotic prefactor of the second difference is H(2H-1)
  for (double h : {0.3, 0.65, 0.8, 0.9}) {
    const double t = 50.0;
    const double asym = h * (2.0 * h - 1.0) * std::pow(t, 2.0 * h - 2.0);
    CHECK(increment_correlation(t, HurstParameter(h)) / asym ==
          doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("sample_fbm: BM variance and fractional covariance oracles") {
  const std::size_t n_paths = 10000;
  {
    const TimeGrid grid(1.0 / 256.0, 256);
    const auto ens = sample_fbm(grid, HurstParameter(0.5), n_paths, 42);
    double m2 = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
      double b1 = 0.0;
      for (std::size_t i = 0; i < 256; ++i) b1 += ens.at(p, i);
      m2 += b1 * b1;
    }
    m2 /= n_paths;
    const double se = std::sqrt(2.0 / n_paths);  // Var of chi2 mean
    CHECK(std::abs(m2 - 1.0) <= 3.0 * se);
  }
  {
    const TimeGrid grid(1.0 / 256.0, 256);
    const auto ens = sample_fbm(grid, HurstParameter(0.75), n_paths, 42);
    double cov = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
      double bh = 0.0, b1 = 0.0;
      for (std::size_t i = 0; i < 128; ++i) bh += ens.at(p, i);
      b1 = bh;
      for (std::size_t i = 128; i < 256; ++i) b1 += ens.at(p, i);
      cov += bh * b1;
    }
    cov /= n_paths;
    const double target = fbm_covariance(0.5, 1.0, HurstParameter(0.75));
    const double vh = fbm_covariance(0.5, 0.5, HurstParameter(0.75));
    const double v1 = fbm_covariance(1.0, 1.0, HurstParameter(0.75));
    const double se = std::sqrt((vh * v1 + target * target) / n_paths);
    CHECK(std::abs(cov - target) <= 3.0 * se);
  }
}

TEST_CASE("sample_fbm: determinism and path-keyed streams") {
  const TimeGrid grid(0.125, 32);
  const auto a = sample_fbm(grid, HurstParameter(0.7), 5, 7);
  const auto b = sample_fbm(grid, HurstParameter(0.7), 5, 7);
  CHECK(a.values() == b.values());
  // a path's values depend on (seed, path index) only, not on n_paths
  const auto wide = sample_fbm(grid, HurstParameter(0.7), 9, 7);
  for (std::size_t i = 0; i < 32; ++i) CHECK(wide.at(3, i) == a.at(3, i));
  const auto other = sample_fbm(grid, HurstParameter(0.7), 5, 8);
  CHECK(other.at(0, 0) != a.at(0, 0));
}

TEST_CASE("sampled covariance matches the closed form at all grid pairs") {
  // cumulative sums against fbm_covariance, 3 SE per pair
  const std::size_t n_paths = 10000, n = 64;
  const TimeGrid grid(1.0 / 64.0, n);
  for (double h : {0.3, 0.5, 0.7, 0.9}) {
    const HurstParameter hp(h);
    const auto ens = sample_fbm(grid, hp, n_paths, 1234);
    std::vector<double> acc(n_paths * n);
    for (std::size_t p = 0; p < n_paths; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += ens.at(p, i);
        acc[p * n + i] = s;
      }
    }
    std::size_t failures = 0;
    for (std::size_t i = 0; i < n; i += 3) {
      for (std::size_t j = i; j < n; j += 3) {
        double c = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) c += acc[p * n + i] * acc[p * n + j];
        c /= n_paths;
        const double ti = grid.time(i + 1), tj = grid.time(j + 1);
        const double target = fbm_covariance(ti, tj, hp);
        const double se = std::sqrt((fbm_covariance(ti, ti, hp) * fbm_covariance(tj, tj, hp) +
                                     target * target) /
                                    n_paths);
        if (std::abs(c - target) > 3.0 * se) ++failures;
      }
    }
    CHECK(failures == 0);
  }
}

TEST_CASE("dense fallback produces the same law") {
  const std::size_t n = 48, n_paths = 8000;
  const HurstParameter h(0.7);
  const FgnSampler dense(0.25, n, h, FgnRoute::kDense);
  CHECK(dense.dense());
  double var = 0.0, lag1 = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const auto x = dense.sample_path(11, p);
    for (std::size_t i = 0; i < n; ++i) var += x[i] * x[i];
    for (std::size_t i = 0; i + 1 < n; ++i) lag1 += x[i] * x[i + 1];
  }
  var /= static_cast<double>(n_paths * n);
  lag1 /= static_cast<double>(n_paths * (n - 1));
  const double cell = std::pow(0.25, 1.4);
  CHECK(var == doctest::Approx(cell).epsilon(0.05));
  CHECK(lag1 / cell ==
        doctest::Approx(increment_correlation(1.0, h)).epsilon(0.12));
}
