#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "fraclab/errors.hpp"
#include "fraclab/fou.hpp"
#include "fraclab/hermite.hpp"
#include "fraclab/noise.hpp"
#include "fraclab/quadrature.hpp"
#include "fraclab/stats.hpp"
#include "test_util.hpp"

using namespace fraclab;
using namespace fraclab::noise;

TEST_CASE("FouKernel: pinned constants and closed forms at h=1/2") {
  {
    const fou::FouKernel k(HurstParameter(0.7));
    CHECK(k.c_h() == doctest::Approx(1.0918091308839122).epsilon(1e-14));
    CHECK(k.variance() == doctest::Approx(0.6210846722521527).epsilon(1e-12));
    // variance has the independent closed form H*Gamma(2H)
    CHECK(k.variance() == doctest::Approx(0.7 * std::tgamma(1.4)).epsilon(1e-12));
  }
  {
    const fou::FouKernel k(HurstParameter(0.8));
    CHECK(k.variance() == doctest::Approx(0.7148122794301524).epsilon(1e-12));
  }
  {
    // at h=1/2 the kernel is exactly e^{-u} and the process is the classical OU
    const fou::FouKernel k(HurstParameter(0.5));
    for (double u : {0.01, 0.5, 3.0, 25.0, 80.0})
      CHECK(k.k(u) == doctest::Approx(std::exp(-u)).epsilon(1e-13));
    CHECK(k.variance() == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(k.autocorrelation(2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-10));
  }
}

TEST_CASE("FouKernel: covariance tail has exponent 2H-2") {
  for (double h : {0.3, 0.7, 0.8}) {
    const fou::FouKernel k{HurstParameter(h)};
    const double asym = h * (2.0 * h - 1.0) / k.variance();
    for (double t : {20.0, 35.0}) {
      const double ratio = k.autocorrelation(t) / (asym * std::pow(t, 2.0 * h - 2.0));
      CHECK(ratio == doctest::Approx(1.0).epsilon(0.02));
    }
  }
}

TEST_CASE("fou_autocorrelation: wrapper and spec example") {
  const double r = fou_autocorrelation(20.0, HurstParameter(0.8));
  const double power = std::pow(20.0, -0.4);
  CHECK(r / power > 0.2);
  CHECK(r / power < 5.0);
  CHECK(fou_autocorrelation(0.0, HurstParameter(0.6)) == doctest::Approx(1.0));
}

TEST_CASE("sample_fou exact_covariance: normalization, memory, determinism") {
  const TimeGrid grid(0.25, 128);
  const std::size_t n_paths = 4000;
  {
    const auto ens = sample_fou(grid, HurstParameter(0.5), n_paths, 3,
                                FouMethod::kExactCovariance);
    CHECK(ens.kind() == EnsembleKind::kFou);
    CHECK(ens.normalized());
    // unit variance columnwise
    double var = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p)
      for (std::size_t i = 0; i < 128; ++i) var += ens.at(p, i) * ens.at(p, i);
    var /= static_cast<double>(n_paths * 128);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
    // OU decay e^{-t} at a few lags, 3 SE
    for (std::size_t lag : {1u, 4u, 8u}) {
      const double target = std::exp(-0.25 * static_cast<double>(lag));
      const double rho = testutil::lag_correlation(ens, lag);
      const double se = testutil::lag_correlation_se(ens, lag);
      CHECK(std::abs(rho - target) <= 3.0 * se);
    }
  }
  {
    const auto a = sample_fou(grid, HurstParameter(0.7), 6, 9,
                              FouMethod::kExactCovariance);
    const auto b = sample_fou(grid, HurstParameter(0.7), 6, 9,
                              FouMethod::kExactCovariance);
    CHECK(a.values() == b.values());
  }
}

TEST_CASE("sample_fou: long-memory tail exponent is 2H-2") {
  // time-averaged correlations over lags in [8,24] time units, log-log slope
  const double h = 0.7;
  const TimeGrid grid(0.5, 512);
  const auto ens = sample_fou(grid, HurstParameter(h), 2000, 17,
                              FouMethod::kExactCovariance);
  std::vector<double> lx, ly;
  for (std::size_t lag = 16; lag <= 48; lag += 4) {
    const double rho = testutil::lag_correlation(ens, lag);
    REQUIRE(rho > 0.0);
    lx.push_back(std::log(0.5 * static_cast<double>(lag)));
    ly.push_back(std::log(rho));
  }
  const auto fit = stats::least_squares(lx, ly);
  CHECK(fit.slope == doctest::Approx(2.0 * h - 2.0).epsilon(0.12));
}

TEST_CASE("sample_fou euler_burnin: matches stationary law loosely") {
  const TimeGrid grid(0.25, 96);
  const auto ens = sample_fou(grid, HurstParameter(0.5), 3000, 5,
                              FouMethod::kEulerBurnin);
  double var = 0.0;
  for (std::size_t p = 0; p < ens.n_paths(); ++p)
    for (std::size_t i = 0; i < 96; ++i) var += ens.at(p, i) * ens.at(p, i);
  var /= static_cast<double>(ens.n_paths() * 96);
  CHECK(var == doctest::Approx(1.0).epsilon(0.06));
  const double rho = testutil::lag_correlation(ens, 4);
  CHECK(rho == doctest::Approx(std::exp(-1.0)).epsilon(0.1));
}

TEST_CASE("sample_fou: grid cap on the exact route") {
  const TimeGrid grid(0.01, 4097);
  CHECK_THROWS_AS(static_cast<void>(sample_fou(grid, HurstParameter(0.7), 2, 1,
                                               FouMethod::kExactCovariance)),
                  GridTooLarge);
}

TEST_CASE("conditional_split: variances sum to one and match the kernel") {
  const TimeGrid grid(0.25, 41);
  for (double h : {0.3, 0.5, 0.7}) {
    const HurstParameter hp(h);
    const fou::FouKernel kernel{hp};
    const auto split = conditional_split(hp, grid, 0);
    REQUIRE(split.sigma_bar_sq.size() == 41);
    CHECK(split.sigma_bar_sq[0] == doctest::Approx(1.0));
    CHECK(split.sigma_tilde_sq[0] == doctest::Approx(0.0));
    for (std::size_t j = 0; j < 41; ++j)
      CHECK(split.sigma_bar_sq[j] + split.sigma_tilde_sq[j] ==
            doctest::Approx(1.0).epsilon(1e-10));
    // sigma_tilde^2(d) = int_0^d K^2 / Var : mass generated after the anchor
    for (std::size_t j : {1u, 4u, 20u}) {
      const double d = 0.25 * static_cast<double>(j);
      const double head = kernel.k2_head(std::min(d, 1.0)) +
                          (d > 1.0 ? integrate(
                                         [&](double u) { return kernel.k(u) * kernel.k(u); },
                                         1.0, d)
                                         .value
                                   : 0.0);
      CHECK(split.sigma_tilde_sq[j] ==
            doctest::Approx(head / kernel.variance()).epsilon(1e-7));
    }
  }
  {
    // h=1/2: sigma_bar^2(d) = e^{-2d}
    const auto split = conditional_split(HurstParameter(0.5), grid, 5);
    REQUIRE(split.sigma_bar_sq.size() == 36);
    CHECK(split.anchor == 5);
    CHECK(split.sigma_bar_sq[3] == doctest::Approx(std::exp(-1.5)).epsilon(1e-8));
  }
  {
    // the far future forgets the anchor
    const TimeGrid longer(1.0, 201);
    const auto split = conditional_split(HurstParameter(0.7), longer, 0);
    CHECK(split.sigma_bar_sq.back() < 0.02);
  }
  CHECK_THROWS_AS(static_cast<void>(conditional_split(HurstParameter(0.7), grid, 41)),
                  std::invalid_argument);
}

TEST_CASE("conditional_hermite_expectation: Gaussian smoothing identity") {
  // E[H_l(a + sigma_tilde Z)] = sigma_bar^l H_l(a / sigma_bar) for any fixed a
  // with sigma_bar^2 + sigma_tilde^2 = 1 (generating-function identity).
  const auto rule = gauss_hermite_probabilists(80);
  for (double sb2 : {1.0, 0.73, 0.22, 0.04}) {
    const double st = std::sqrt(1.0 - sb2);
    for (int l : {0, 1, 2, 3, 5, 8}) {
      for (double a : {-1.3, 0.0, 0.4, 2.0}) {
        const double got = conditional_hermite_expectation(l, sb2, a);
        double ref = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q)
          ref += rule.weights[q] * hermite::hermite_eval(l, a + st * rule.nodes[q]);
        CHECK(got == doctest::Approx(ref).epsilon(1e-8));
      }
    }
  }
  // degenerate split: everything forgotten
  CHECK(conditional_hermite_expectation(0, 0.0, 0.3) == doctest::Approx(1.0));
  CHECK(conditional_hermite_expectation(3, 0.0, 0.3) == doctest::Approx(0.0));
  CHECK_THROWS_AS(static_cast<void>(conditional_hermite_expectation(2, -0.1, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("memory_loss_integral: OU identity and tail verdicts") {
  {
    // G = H_1, h = 1/2: integrand is e^{-s}, integral 1
    hermite::HermiteProfile p;
    p.coeffs = {0.0, 1.0};
    p.rank = 1;
    const auto r = memory_loss_integral(p, HurstParameter(0.5), 40.0);
    CHECK(r.verdict == TailVerdict::kFinite);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-3));
  }
  {
    // rank 3 at h=0.7: integrand ~ s^{3(H-1)} = s^{-0.9}, divergent
    hermite::HermiteProfile p;
    p.coeffs = {0.0, 0.0, 0.0, 1.0};
    p.rank = 3;
    const auto r = memory_loss_integral(p, HurstParameter(0.7), 60.0);
    CHECK(r.verdict == TailVerdict::kTailDivergent);
    CHECK(r.fitted_exponent == doctest::Approx(-0.9).epsilon(0.08));
  }
  {
    // rank 2 at h=0.6: exponent 2(0.6-1) = -0.8, divergent
    hermite::HermiteProfile p;
    p.coeffs = {0.0, 0.0, 1.0};
    p.rank = 2;
    const auto r = memory_loss_integral(p, HurstParameter(0.6), 60.0);
    CHECK(r.verdict == TailVerdict::kTailDivergent);
    CHECK(r.fitted_exponent == doctest::Approx(-0.8).epsilon(0.1));
  }
  {
    // rank 2 at h=0.3: exponent -1.4, integrable
    hermite::HermiteProfile p;
    p.coeffs = {0.0, 0.0, 1.0};
    p.rank = 2;
    const auto r = memory_loss_integral(p, HurstParameter(0.3), 60.0);
    CHECK(r.verdict == TailVerdict::kFinite);
    CHECK(r.fitted_exponent < -1.0);
    CHECK(r.value > 0.0);
    CHECK(r.tail_bound < 0.05 * r.value);
  }
  {
    hermite::HermiteProfile p;
    p.coeffs = {1.0};  // constant map, rank 0
    p.rank = 0;
    CHECK_THROWS_AS(static_cast<void>(memory_loss_integral(p, HurstParameter(0.7), 10.0)),
                    RankZero);
  }
}

TEST_CASE("VolterraChain: normalization and the h=1/2 AR(1) limit") {
  {
    const fou::VolterraChain chain(HurstParameter(0.5), 0.25, 32.0);
    CHECK(chain.memory_cells() == 128);
    double s2 = 0.0;
    for (double w : chain.weights()) s2 += w * w;
    CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));
    // e^{-u} kernel gives exactly geometric weights => AR(1) with rho = e^{-step}
    for (std::size_t j : {1u, 3u, 10u})
      CHECK(chain.rho(j) ==
            doctest::Approx(std::exp(-0.25 * static_cast<double>(j))).epsilon(1e-12));
  }
  {
    const fou::VolterraChain chain(HurstParameter(0.7), 0.25, 64.0);
    CHECK(chain.rho(0) == doctest::Approx(1.0).epsilon(1e-12));
    // long-lag decay tracks the process autocorrelation within a few percent
    const fou::FouKernel kernel{HurstParameter(0.7)};
    for (std::size_t j : {8u, 32u, 96u}) {
      const double t = 0.25 * static_cast<double>(j);
      CHECK(chain.rho(j) == doctest::Approx(kernel.autocorrelation(t)).epsilon(0.06));
    }
  }
}

TEST_CASE("VolterraChain: sigma_bar_sq is the retained conditional variance") {
  const fou::VolterraChain chain(HurstParameter(0.7), 0.5, 48.0);
  REQUIRE(chain.memory_cells() == 96);
  CHECK(chain.sigma_bar_sq(0) == doctest::Approx(1.0));
  CHECK(chain.sigma_bar_sq(96) == doctest::Approx(0.0));
  double tail = 0.0;
  const auto& k = chain.weights();
  for (std::size_t m = 10; m < k.size(); ++m) tail += k[m] * k[m];
  CHECK(chain.sigma_bar_sq(10) == doctest::Approx(tail).epsilon(1e-12));
}

TEST_CASE("VolterraChain: simulated law and exact conditional mean") {
  const fou::VolterraChain chain(HurstParameter(0.7), 0.25, 48.0);
  const std::size_t n_paths = 3000, count = 96;
  double var = 0.0, lag4 = 0.0;
  std::vector<double> cond_err;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const auto path = chain.simulate(count, 77, p);
    REQUIRE(path.y.size() == count);
    for (std::size_t i = 0; i < count; ++i) var += path.y[i] * path.y[i];
    for (std::size_t i = 0; i + 4 < count; ++i) lag4 += path.y[i] * path.y[i + 4];
    // prediction of y_{i0+d} from innovations known at i0 has exactly the
    // variance 1 - sigma_bar_sq(d) around the conditional mean
    const std::size_t i0 = 40, d = 6;
    const double mean = chain.conditional_mean(path, i0, d);
    cond_err.push_back(path.y[i0 + d] - mean);
  }
  var /= static_cast<double>(n_paths * count);
  lag4 /= static_cast<double>(n_paths * (count - 4));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  CHECK(lag4 == doctest::Approx(chain.rho(4)).epsilon(0.06));
  const double resid_var = stats::variance(cond_err);
  CHECK(resid_var == doctest::Approx(1.0 - chain.sigma_bar_sq(6)).epsilon(0.08));
  CHECK(std::abs(stats::mean(cond_err)) < 0.05);
}
