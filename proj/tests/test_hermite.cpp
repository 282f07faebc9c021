#include <cmath>
#include <numbers>

#include <doctest.h>

#include "fraclab/errors.hpp"
#include "fraclab/hermite.hpp"
#include "fraclab/quadrature.hpp"
#include "fraclab/rng.hpp"

using namespace fraclab;
using namespace fraclab::hermite;

TEST_CASE("hermite_eval: definition, parity, degree cap") {
  for (double x : {-2.0, -0.3, 0.0, 1.7}) {
    CHECK(hermite_eval(0, x) == 1.0);
    CHECK(hermite_eval(1, x) == x);
    CHECK(hermite_eval(2, x) == doctest::Approx(x * x - 1.0));
  }
  CHECK(hermite_eval(3, 2.0) == doctest::Approx(2.0));  // 8 - 6
  for (int l : {1, 3, 5, 7, 9}) CHECK(hermite_eval(l, 0.0) == 0.0);
  CHECK_THROWS_AS(hermite_eval(65, 0.0), DegreeTooLarge);
}

TEST_CASE("expand: polynomial coefficients are exact") {
  const auto cubic = expand([](double x) { return x * x * x; }, 8);
  CHECK(cubic.coeffs[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(cubic.coeffs[3] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cubic.coeffs[0] == 0.0);
  CHECK(cubic.coeffs[2] == 0.0);
  CHECK(cubic.coeffs[5] == 0.0);
  CHECK(cubic.rank == 1);
  CHECK(cubic.residual < 1e-10);

  const auto h2 = expand([](double x) { return x * x - 1.0; }, 6);
  CHECK(h2.coeffs[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h2.rank == 2);
}

TEST_CASE("expand: sign observable against the analytic first coefficient") {
  // Gauss-Hermite converges ~1/n on the kink, so pin the tolerance to the
  // node count rather than to machine precision.
  const auto prof = expand([](double x) { return x >= 0.0 ? 1.0 : -1.0; }, 9, 512);
  CHECK(prof.coeffs[1] ==
        doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(2e-3));
  CHECK(prof.coeffs[0] == 0.0);
  CHECK(prof.coeffs[2] == 0.0);
  CHECK(prof.coeffs[4] == 0.0);
  CHECK(prof.rank == 1);
}

TEST_CASE("expand: exponential observable, known coefficient law") {
  // e^x = e^{1/2} sum H_l/l!
  const auto prof = expand([](double x) { return std::exp(x); }, 12);
  const double e_half = 1.6487212707001282;
  for (int l = 0; l <= 8; ++l) {
    double f = 1.0;
    for (int k = 2; k <= l; ++k) f *= k;
    CHECK(prof.coeffs[static_cast<std::size_t>(l)] ==
          doctest::Approx(e_half / f).epsilon(1e-9));
  }
}

TEST_CASE("expand rejects non-square-integrable observables") {
  CHECK_THROWS_AS(expand([](double x) { return std::exp(x * x / 3.0); }, 4),
                  QuadratureDivergence);
}

TEST_CASE("expand: centred assertion") {
  CHECK_THROWS_AS(
      expand([](double x) { return x * x; }, 4, 0, /*assert_centred=*/true),
      NotCentred);
  CHECK_NOTHROW(
      expand([](double x) { return x * x - 1.0; }, 4, 0, /*assert_centred=*/true));
}

TEST_CASE("synthesis reproduces a degree-10 polynomial in L2") {
  const auto g = [](double x) {
    return 0.3 * std::pow(x, 10) - x * x * x + 2.0 * x - 0.7;
  };
  const auto prof = expand(g, 10);
  const auto back = synthesize(prof);
  const auto rule = gauss_hermite_probabilists(48);
  double err2 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double d = g(rule.nodes[i]) - back(rule.nodes[i]);
    err2 += rule.weights[i] * d * d;
  }
  CHECK(err2 <= prof.residual + 1e-8);
}

TEST_CASE("tabulated observables expand like their closures") {
  std::vector<double> xs, ys;
  for (double x = -10.0; x <= 10.0; x += 0.01) {
    xs.push_back(x);
    ys.push_back(std::tanh(x));
  }
  const auto tab = expand_tabulated(xs, ys, 6);
  const auto ref = expand([](double x) { return std::tanh(x); }, 6);
  CHECK(tab.rank == 1);
  CHECK(tab.coeffs[1] == doctest::Approx(ref.coeffs[1]).epsilon(1e-6));
  CHECK(tab.coeffs[3] == doctest::Approx(ref.coeffs[3]).epsilon(1e-4));
}

TEST_CASE("correlation_of_chaos: closed form and Monte Carlo") {
  CHECK(correlation_of_chaos(1, 0.37) == doctest::Approx(0.37));
  CHECK(correlation_of_chaos(2, 0.5) == doctest::Approx(0.5));  // 2 * 0.25
  for (int k : {1, 2, 3}) CHECK(correlation_of_chaos(k, 0.0) == 0.0);

  // E[H_k(Y1) H_k(Y2)] over correlated pairs, 10^6 draws, 3 SE
  RngStream rng(99, 0, rng_purpose::kDriver);
  for (double rho : {0.1, 0.5, 0.9}) {
    for (int k : {1, 2, 3, 4, 5, 6}) {
      const std::size_t n = 1000000;
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rho * z1 + std::sqrt(1.0 - rho * rho) * rng.normal();
        const double v = hermite_eval(k, z1) * hermite_eval(k, z2);
        s += v;
        s2 += v * v;
      }
      const double m = s / n;
      const double se = std::sqrt((s2 / n - m * m) / n);
      CHECK(std::abs(m - correlation_of_chaos(k, rho)) <= 3.0 * se);
    }
  }
}

TEST_CASE("h_star: arithmetic and sign threshold") {
  CHECK(h_star(2, HurstParameter(0.7)) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(h_star(1, HurstParameter(0.8)) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(h_star(3, HurstParameter(0.7)) == doctest::Approx(0.1).epsilon(1e-12));
  // affine in m and h; negative exactly when m > 1/(1-h)
  const HurstParameter h(0.7);
  const double d1 = h_star(2, h) - h_star(1, h);
  const double d2 = h_star(5, h) - h_star(4, h);
  CHECK(d1 == doctest::Approx(d2).epsilon(1e-14));
  CHECK(h_star(4, h) < 0.0);  // 4 > 1/0.3
  CHECK(h_star(3, h) > 0.0);  // 3 < 1/0.3
}

TEST_CASE("fast_chaos_decay: verdicts") {
  HermiteProfile finite;
  finite.coeffs = {0.0, 2.0, 0.0, 1.0};
  finite.rank = 1;
  finite.l_max = 3;
  const auto fv = fast_chaos_decay(finite, 4);
  CHECK(fv.verdict == DecayVerdict::kConverging);
  // |c_1| sqrt(1!) 7^{1/2} + |c_3| sqrt(3!) 7^{3/2}
  CHECK(fv.sum ==
        doctest::Approx(2.0 * std::sqrt(7.0) + std::sqrt(6.0) * std::pow(7.0, 1.5)));

  HermiteProfile inv_fact;  // c_l = 1/l!: converging for every q
  inv_fact.l_max = 40;
  inv_fact.rank = 0;
  double f = 1.0;
  for (int l = 0; l <= 40; ++l) {
    if (l > 1) f *= l;
    inv_fact.coeffs.push_back(1.0 / f);
  }
  CHECK(fast_chaos_decay(inv_fact, 4).verdict == DecayVerdict::kConverging);
  CHECK(fast_chaos_decay(inv_fact, 12).verdict == DecayVerdict::kConverging);

  HermiteProfile critical;  // c_l = 1/sqrt(l!): terms are (2q-1)^{l/2}
  critical.l_max = 40;
  critical.rank = 0;
  f = 1.0;
  for (int l = 0; l <= 40; ++l) {
    if (l > 1) f *= l;
    critical.coeffs.push_back(1.0 / std::sqrt(f));
  }
  CHECK(fast_chaos_decay(critical, 1).verdict == DecayVerdict::kDiverging);
  CHECK(fast_chaos_decay(critical, 4).verdict == DecayVerdict::kDiverging);
}

TEST_CASE("scaling_alpha: three cases and monotonicity") {
  CHECK(scaling_alpha(0.01, 0.4) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(scaling_alpha(0.01, 0.8) ==
        doctest::Approx(2.51188643150958).epsilon(1e-14));
  CHECK(scaling_alpha(0.01, 0.5) ==
        doctest::Approx(1.0 / std::sqrt(0.01 * std::abs(std::log(0.01))))
            .epsilon(1e-14));
  // decreasing in eps; the borderline form 1/sqrt(eps |ln eps|) turns around
  // at eps = 1/e, so stay below that
  for (const double hs : {0.3, 0.5, 0.9}) {
    double prev = 1e308;
    for (double eps = 1e-4; eps < 0.3; eps *= 3.0) {
      const double a = scaling_alpha(eps, hs);
      CHECK(a < prev);
      prev = a;
    }
  }
  // unified form agrees away from the borderline
  const auto rule = make_scaling_rule(0.8);
  CHECK(rule.regime == ScalingRegime::kHermite);
  CHECK(rule.alpha(0.02) == doctest::Approx(rule.alpha_unified(0.02)));
  CHECK(make_scaling_rule(0.2).regime == ScalingRegime::kWiener);
  CHECK(make_scaling_rule(0.5).regime == ScalingRegime::kBorderline);
}

namespace {

HermiteProfile pure(int rank) {
  HermiteProfile p;
  p.coeffs.assign(static_cast<std::size_t>(rank) + 1, 0.0);
  p.coeffs.back() = 1.0;
  p.rank = rank;
  p.l_max = rank;
  return p;
}

}  // namespace

TEST_CASE("assumption_gate: admissible and violated configurations") {
  const HurstParameter h(0.7);

  // single Wiener channel: only 1/2 - 1/p > 1/3 binds
  const auto single = assumption_gate({pure(2)}, {16.0}, h, 1);
  CHECK(single.pass);

  // empty Hermite block never triggers the joint condition
  const auto two_wiener = assumption_gate({pure(4), pure(3)}, {16.0, 16.0}, h, 2);
  CHECK(two_wiener.pass);

  // mixed configuration violating the joint Hoelder-sum inequality:
  // (1/2 - 1/8) + (H*(1) - 1/8) = 0.375 + 0.575 = 0.95 < 1
  const auto mixed = assumption_gate({pure(4), pure(1)}, {8.0, 8.0}, h, 1);
  CHECK_FALSE(mixed.pass);
  CHECK(mixed.violated == "min(1/2 - 1/p_k) + min(H*(m_k) - 1/p_k) > 1");

  // the same split with large p passes: 0.4999 + 0.6999 > 1
  const auto mixed_ok =
      assumption_gate({pure(4), pure(1)}, {10000.0, 10000.0}, h, 1);
  CHECK(mixed_ok.pass);

  // Hermite-block channel with H* barely above 1/2 fails its own inequality
  const auto low = assumption_gate({pure(2)}, {16.0}, HurstParameter(0.76), 0);
  CHECK_FALSE(low.pass);
  CHECK(low.violated == "H*(m_k) - 1/p_k > 1/2 (channel 0)");

  // Wiener channel with small p fails the 1/3 bound
  const auto smallp = assumption_gate({pure(2)}, {4.0}, h, 1);
  CHECK_FALSE(smallp.pass);

  CHECK_THROWS_AS(assumption_gate({pure(1), pure(2)}, {16.0, 16.0}, h, 1),
                  OrderingViolation);
  CHECK_THROWS_AS(assumption_gate({pure(0)}, {16.0}, h, 1), RankZero);
}

TEST_CASE("profile json round trip") {
  const auto prof = expand([](double x) { return x * x * x - 3.0 * x; }, 6);
  const auto j = prof.to_json();
  CHECK(j.at("convention") == "probabilist-unnormalized");
  const auto back = HermiteProfile::from_json(j);
  CHECK(back.rank == prof.rank);
  CHECK(back.coeffs == prof.coeffs);
}
