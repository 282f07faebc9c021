#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "fraclab/errors.hpp"
#include "fraclab/fou.hpp"
#include "fraclab/noise.hpp"
#include "fraclab/roughpath.hpp"
#include "fraclab/time_grid.hpp"
#include "test_util.hpp"

using namespace fraclab;
using rough::LiftedPath;

namespace {

// path values t_i -> c * t_i (one coordinate)
std::vector<double> linear_path(const TimeGrid& grid, double c) {
  std::vector<double> p(grid.count());
  for (std::size_t i = 0; i < grid.count(); ++i) p[i] = c * grid.time(i);
  return p;
}

// prepend 0 and cumulate increments: a Brownian-type path on count+1 nodes
std::vector<double> cumulative(const StationaryEnsemble& inc, std::size_t path) {
  std::vector<double> p(inc.grid().count() + 1, 0.0);
  for (std::size_t i = 0; i < inc.grid().count(); ++i)
    p[i + 1] = p[i] + inc.at(path, i);
  return p;
}

// interleave coordinates into the row-major count x d layout
std::vector<double> zip_paths(const std::vector<std::vector<double>>& coords) {
  const std::size_t d = coords.size();
  const std::size_t n = coords[0].size();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = coords[k][i];
  return out;
}

}  // namespace

TEST_CASE("canonical lift of a linear path: left sums converge to t^2/2") {
  // exact left sum for X_t = t: XX_{0,t_i} = (t_i^2 - t_i*step)/2
  for (std::size_t n : {128UL, 256UL}) {
    const TimeGrid grid(1.0 / static_cast<double>(n), n + 1);
    const auto lift = rough::canonical_lift(grid, linear_path(grid, 1.0), 1);
    for (std::size_t i : {n / 3, n}) {
      const double t = grid.time(i);
      CHECK(lift.xx0(i, 0, 0) ==
            doctest::Approx((t * t - t * grid.step()) / 2.0).epsilon(1e-12));
    }
  }
  // the defect against the continuum area t^2/2 is exactly t*step/2: halving
  // the step halves it
  const TimeGrid g1(1.0 / 128, 129), g2(1.0 / 256, 257);
  const auto l1 = rough::canonical_lift(g1, linear_path(g1, 1.0), 1);
  const auto l2 = rough::canonical_lift(g2, linear_path(g2, 1.0), 1);
  const double e1 = std::abs(l1.xx0(128, 0, 0) - 0.5);
  const double e2 = std::abs(l2.xx0(256, 0, 0) - 0.5);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("canonical lift: constant path gives the zero lift") {
  const TimeGrid grid(0.1, 33);
  std::vector<double> flat(grid.count(), 4.25);
  const auto lift = rough::canonical_lift(grid, flat, 1);
  for (double v : lift.x_data()) CHECK(v == 0.0);
  for (double v : lift.xx_data()) CHECK(v == 0.0);
}

TEST_CASE("lift construction: shape validation") {
  const TimeGrid grid(0.1, 9);
  std::vector<double> p(grid.count() * 2 - 1, 0.0);
  CHECK_THROWS_AS(rough::canonical_lift(grid, p, 2), DimensionMismatch);
  // direct construction requires X_0 = 0 and XX_{0,0} = 0
  std::vector<double> x(grid.count(), 0.0), xx(grid.count(), 0.0);
  x[0] = 1.0;
  CHECK_THROWS_AS(LiftedPath(grid, 1, x, xx), std::invalid_argument);
}

TEST_CASE("diagonal identity: XX^{ii} + half quadratic variation = half squared increment") {
  const TimeGrid inc_grid(0.01, 512);
  const auto inc = noise::sample_fbm(inc_grid, HurstParameter(0.4), 2, 99);
  const TimeGrid grid(0.01, 513);
  const auto paths = zip_paths({cumulative(inc, 0), cumulative(inc, 1)});
  const auto lift = rough::canonical_lift(grid, paths, 2);

  for (std::size_t s : {0UL, 17UL, 300UL}) {
    for (std::size_t t : {s + 1, s + 63, std::size_t{512}}) {
      for (std::size_t k : {0UL, 1UL}) {
        double qv = 0.0;
        for (std::size_t i = s; i < t; ++i) {
          const double dx = lift.x(i + 1, k) - lift.x(i, k);
          qv += dx * dx;
        }
        const double inc_st = lift.increment(s, t, k);
        CHECK(lift.area(s, t, k, k) + qv / 2.0 ==
              doctest::Approx(inc_st * inc_st / 2.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("chen defect: canonical reconstruction is exact, raw data can violate") {
  const TimeGrid inc_grid(0.02, 256);
  const auto inc = noise::sample_fbm(inc_grid, HurstParameter(0.6), 2, 7);
  const TimeGrid grid(0.02, 257);
  auto coords = std::vector<std::vector<double>>{cumulative(inc, 0), cumulative(inc, 1)};
  const auto lift = rough::canonical_lift(grid, zip_paths(coords), 2);

  double scale = 0.0;
  for (double v : lift.x_data()) scale = std::max(scale, v * v);
  CHECK(rough::chen_defect(lift, 512, 11) <= 1e-12 * std::max(1.0, scale));

  // zeroing the second level breaks Chen by exactly the cross term
  // X_{s,u} (x) X_{u,t}; the schedule always probes (0, mid, end)
  const auto x_of = [&](std::size_t i, std::size_t k) { return lift.x(i, k); };
  const auto xx_zero = [](std::size_t, std::size_t, std::size_t, std::size_t) {
    return 0.0;
  };
  const double defect = rough::chen_defect(grid, 2, x_of, xx_zero, 512, 11);
  const std::size_t mid = (grid.count() - 1) / 2, end = grid.count() - 1;
  double at_mid = 0.0;
  for (std::size_t j : {0UL, 1UL})
    for (std::size_t k : {0UL, 1UL})
      at_mid = std::max(at_mid, std::abs(lift.increment(0, mid, j) *
                                         lift.increment(mid, end, k)));
  CHECK(defect >= at_mid);
  CHECK(defect <= 4.0 * scale + 1e-12);

  // recentring: a constant shift of the raw path leaves the lift untouched
  // up to the rounding of (p_i + c) - (p_0 + c)
  for (auto& c : coords)
    for (auto& v : c) v += 3.7;
  const auto shifted = rough::canonical_lift(grid, zip_paths(coords), 2);
  for (std::size_t i = 0; i < lift.x_data().size(); ++i)
    CHECK(std::abs(shifted.x_data()[i] - lift.x_data()[i]) <= 1e-12);
  for (std::size_t i = 0; i < lift.xx_data().size(); ++i)
    CHECK(std::abs(shifted.xx_data()[i] - lift.xx_data()[i]) <=
          1e-12 * std::max(1.0, scale));
}

TEST_CASE("holder norm: linear and zero paths in closed form") {
  const TimeGrid grid(1.0 / 256, 257);
  const auto lift = rough::canonical_lift(grid, linear_path(grid, 1.0), 1);
  // ratio (t-s)/(t-s)^alpha is maximal on the full span [0,1];
  // second level: sqrt((dt^2 - step*dt)/2)/dt^alpha, also maximal at dt = 1
  const auto rep = rough::holder_norm(lift, 0.5, 1 << 12, 3);
  CHECK(rep.first_order_norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.second_order_norm ==
        doctest::Approx(std::sqrt((1.0 - grid.step()) / 2.0)).epsilon(1e-12));

  const auto zero = rough::canonical_lift(grid, std::vector<double>(257, 0.0), 1);
  const auto zrep = rough::holder_norm(zero, 0.5, 1 << 12, 3);
  CHECK(zrep.first_order_norm == 0.0);
  CHECK(zrep.second_order_norm == 0.0);

  const auto j = rep.to_json();
  CHECK(j.at("alpha").get<double>() == 0.5);
  CHECK(j.at("pair_budget").get<std::size_t>() == (1 << 12));
  CHECK(j.at("seed").get<std::uint64_t>() == 3);
}

TEST_CASE("holder norm on a Brownian lift: stable across pair seeds, monotone in budget") {
  const TimeGrid inc_grid(1.0 / 4096, 4096);
  const auto inc = noise::sample_fbm(inc_grid, HurstParameter(0.5), 1, 2024);
  const TimeGrid grid(1.0 / 4096, 4097);
  const auto lift = rough::canonical_lift(grid, cumulative(inc, 0), 1);

  const auto a = rough::holder_norm(lift, 0.45, 1 << 14, 1);
  const auto b = rough::holder_norm(lift, 0.45, 1 << 14, 2);
  CHECK(a.first_order_norm > 0.0);
  CHECK(std::isfinite(a.first_order_norm));
  CHECK(std::isfinite(a.second_order_norm));
  CHECK(std::abs(a.first_order_norm - b.first_order_norm) <=
        0.2 * std::max(a.first_order_norm, b.first_order_norm));
  CHECK(std::abs(a.second_order_norm - b.second_order_norm) <=
        0.2 * std::max(a.second_order_norm, b.second_order_norm));

  // a larger budget evaluates a superset of pairs, so the sup cannot drop
  const auto small = rough::holder_norm(lift, 0.45, 1 << 10, 5);
  const auto midb = rough::holder_norm(lift, 0.45, 1 << 12, 5);
  const auto large = rough::holder_norm(lift, 0.45, 1 << 16, 5);
  CHECK(small.first_order_norm <= midb.first_order_norm + 1e-15);
  CHECK(midb.first_order_norm <= large.first_order_norm + 1e-15);
  CHECK(small.second_order_norm <= midb.second_order_norm + 1e-15);
  CHECK(midb.second_order_norm <= large.second_order_norm + 1e-15);
}

TEST_CASE("rough distance: pseudometric axioms and linear-drift closed form") {
  const TimeGrid inc_grid(1.0 / 512, 512);
  const auto inc = noise::sample_fbm(inc_grid, HurstParameter(0.55), 3, 31);
  const TimeGrid grid(1.0 / 512, 513);
  const auto la = rough::canonical_lift(grid, cumulative(inc, 0), 1);
  const auto lb = rough::canonical_lift(grid, cumulative(inc, 1), 1);
  const auto lc = rough::canonical_lift(grid, cumulative(inc, 2), 1);

  CHECK(rough::rough_distance(la, la, 0.4) == 0.0);
  CHECK(rough::rough_distance(la, lb, 0.4) == rough::rough_distance(lb, la, 0.4));
  // triangle inequality on the shared pair schedule
  const double ab = rough::rough_distance(la, lb, 0.4, 1 << 12, 9);
  const double bc = rough::rough_distance(lb, lc, 0.4, 1 << 12, 9);
  const double ac = rough::rough_distance(la, lc, 0.4, 1 << 12, 9);
  CHECK(ac <= ab + bc + 1e-12);

  // zero path vs c*t: first-order term c*T^{1-alpha}; second-order term
  // c^2 * dt(dt - step)/2 / dt^{2 alpha}, both maximal on the full span
  const double c = 0.75, alpha = 0.4;
  const auto lin = rough::canonical_lift(grid, linear_path(grid, c), 1);
  const auto zero = rough::canonical_lift(grid, std::vector<double>(513, 0.0), 1);
  const double expected =
      c * std::pow(1.0, 1.0 - alpha) + c * c * (1.0 - grid.step()) / 2.0;
  CHECK(rough::rough_distance(lin, zero, alpha) ==
        doctest::Approx(expected).epsilon(1e-12));

  const TimeGrid other(1.0 / 512, 257);
  const auto stub = rough::canonical_lift(other, std::vector<double>(257, 0.0), 1);
  CHECK_THROWS_AS(rough::rough_distance(la, stub, 0.4), GridMismatch);
}

TEST_CASE("scaled functional lift: zero observable and input validation") {
  const TimeGrid fast(0.5, 201);
  const auto ens = noise::sample_fou(fast, HurstParameter(0.7), 4, 5,
                                     noise::FouMethod::kExactCovariance);

  hermite::HermiteProfile zero_g;
  zero_g.coeffs = {0.0};
  zero_g.rank = 0;
  zero_g.l_max = 0;
  const auto lifts = rough::scaled_functional_lift(ens, {zero_g}, 0.01, {1.0}, 0.5);
  REQUIRE(lifts.size() == 4);
  for (const auto& l : lifts) {
    for (double v : l.x_data()) CHECK(v == 0.0);
    for (double v : l.xx_data()) CHECK(v == 0.0);
  }

  hermite::HermiteProfile biased;
  biased.coeffs = {0.5, 1.0};
  biased.rank = 1;
  biased.l_max = 1;
  CHECK_THROWS_AS(rough::scaled_functional_lift(ens, {biased}, 0.01, {1.0}, 0.5),
                  NotCentred);

  hermite::HermiteProfile h1;
  h1.coeffs = {0.0, 1.0};
  h1.rank = 1;
  h1.l_max = 1;
  // horizon: 200 fast cells x 0.5 = 100 time units = 1.0 slow at eps = 0.01
  CHECK_THROWS_AS(rough::scaled_functional_lift(ens, {h1}, 0.01, {1.0}, 1.5),
                  HorizonTooShort);
  CHECK_THROWS_AS(rough::scaled_functional_lift(ens, {h1}, 0.01, {1.0, 2.0}, 0.5),
                  DimensionMismatch);

  // d=1 diagonal identity holds on the functional lift as well
  const auto one = rough::scaled_functional_lift(ens, {h1}, 0.01, {10.0}, 1.0);
  const auto& l = one[0];
  const std::size_t n = l.grid().count() - 1;
  double qv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = l.x(i + 1, 0) - l.x(i, 0);
    qv += dx * dx;
  }
  const double full = l.increment(0, n, 0);
  CHECK(l.area(0, n, 0, 0) + qv / 2.0 ==
        doctest::Approx(full * full / 2.0).epsilon(1e-12));
}

TEST_CASE("scaled functional lift: diffusive variance of the OU linear functional" *
          doctest::timeout(180)) {
  // Var(alpha eps int_0^1 y_{s/eps} ds) -> 2 int_0^inf e^{-s} ds = 2 for the
  // normalized OU with alpha = eps^{-1/2}; fast step 0.25 keeps the trapezoid
  // bias (~ step^2/6) well under the Monte Carlo band
  const double eps = 1e-3;
  const TimeGrid fast(0.25, 4001);
  hermite::HermiteProfile h1;
  h1.coeffs = {0.0, 1.0};
  h1.rank = 1;
  h1.l_max = 1;
  const double alpha = 1.0 / std::sqrt(eps);

  const std::size_t n_batches = 8, batch = 1250;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    const auto ens = noise::sample_fou(fast, HurstParameter(0.5), batch, 100 + b,
                                       noise::FouMethod::kEulerBurnin);
    const auto lifts = rough::scaled_functional_lift(ens, {h1}, eps, {alpha}, 1.0);
    for (const auto& l : lifts) {
      const double x1 = l.x(l.grid().count() - 1, 0);
      sum += x1 * x1;
      sum_sq += x1 * x1 * x1 * x1;
    }
  }
  const double n = static_cast<double>(n_batches * batch);
  const double var = sum / n;
  const double se = std::sqrt((sum_sq / n - var * var) / n);
  CHECK(std::abs(var - 2.0) <= 3.0 * se);
}

TEST_CASE("moment scaling: L^8 of X and L^4 of XX against the window width" *
          doctest::timeout(300)) {
  // rank-2 observable under h = 0.6: H*(2) = 0.2 < 1/2, diffusive regime;
  // fitted exponents of the moment norms over windows of 32..512 slow cells
  const double eps = 1e-3;
  const TimeGrid fast(1.0, 1001);
  hermite::HermiteProfile h2;
  h2.coeffs = {0.0, 0.0, 1.0};
  h2.rank = 2;
  h2.l_max = 2;
  const double alpha = 1.0 / std::sqrt(eps);

  const std::vector<std::size_t> gaps = {32, 64, 128, 256, 512};
  std::vector<double> sum_x8(gaps.size(), 0.0), sum_xx4(gaps.size(), 0.0);
  std::vector<double> counts(gaps.size(), 0.0);

  const std::size_t n_batches = 4, batch = 2500;
  for (std::size_t b = 0; b < n_batches; ++b) {
    const auto ens = noise::sample_fou(fast, HurstParameter(0.6), batch, 500 + b,
                                       noise::FouMethod::kEulerBurnin);
    const auto lifts = rough::scaled_functional_lift(ens, {h2}, eps, {alpha}, 1.0);
    for (const auto& l : lifts) {
      const std::size_t last = l.grid().count() - 1;
      for (std::size_t gi = 0; gi < gaps.size(); ++gi) {
        for (std::size_t s = 0; s + gaps[gi] <= last; s += gaps[gi]) {
          const double dx = l.increment(s, s + gaps[gi], 0);
          const double axx = l.area(s, s + gaps[gi], 0, 0);
          sum_x8[gi] += std::pow(dx, 8);
          sum_xx4[gi] += std::pow(axx, 4);
          counts[gi] += 1.0;
        }
      }
    }
  }

  // least-squares slope of log L^p vs log dt
  const auto slope = [&](const std::vector<double>& sums, double p) {
    std::vector<double> xs, ys;
    for (std::size_t gi = 0; gi < gaps.size(); ++gi) {
      xs.push_back(std::log(static_cast<double>(gaps[gi]) * eps));
      ys.push_back(std::log(std::pow(sums[gi] / counts[gi], 1.0 / p)));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
  };

  CHECK(slope(sum_x8, 8.0) == doctest::Approx(0.5).epsilon(0.10));
  CHECK(slope(sum_xx4, 4.0) == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("area drift: identity, Chen preservation, additivity of (t-s)A") {
  const TimeGrid inc_grid(0.01, 128);
  const auto inc = noise::sample_fbm(inc_grid, HurstParameter(0.5), 2, 77);
  const TimeGrid grid(0.01, 129);
  const auto lift =
      rough::canonical_lift(grid, zip_paths({cumulative(inc, 0), cumulative(inc, 1)}), 2);

  const auto same = rough::add_area_drift(lift, {0.0, 0.0, 0.0, 0.0});
  CHECK(same.xx_data() == lift.xx_data());

  const std::vector<double> a = {0.5, -1.25, 2.0, 0.125};
  const auto shifted = rough::add_area_drift(lift, a);
  CHECK(shifted.x_data() == lift.x_data());
  double scale = 0.0;
  for (double v : lift.x_data()) scale = std::max(scale, v * v);
  CHECK(rough::chen_defect(shifted, 256, 4) <= 1e-12 * std::max(1.0, scale));
  for (std::size_t s : {3UL, 40UL}) {
    for (std::size_t t : {s + 5, std::size_t{128}}) {
      const double dt = grid.time(t) - grid.time(s);
      for (std::size_t j : {0UL, 1UL})
        for (std::size_t k : {0UL, 1UL})
          CHECK(shifted.area(s, t, j, k) ==
                doctest::Approx(lift.area(s, t, j, k) + dt * a[j * 2 + k])
                    .epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(rough::add_area_drift(lift, {1.0, 2.0, 3.0}), DimensionMismatch);
}

TEST_CASE("lift persistence: bit-exact round trip") {
  const TimeGrid inc_grid(0.05, 64);
  const auto inc = noise::sample_fbm(inc_grid, HurstParameter(0.7), 2, 13);
  const TimeGrid grid(0.05, 65);
  const auto lift =
      rough::canonical_lift(grid, zip_paths({cumulative(inc, 0), cumulative(inc, 1)}), 2);

  const auto path = std::filesystem::temp_directory_path() / "fraclab_lift_rt.bin";
  lift.save(path.string());
  const auto back = LiftedPath::load(path.string());
  std::filesystem::remove(path);

  CHECK(back.d() == lift.d());
  CHECK(back.grid().count() == lift.grid().count());
  CHECK(back.grid().step() == lift.grid().step());
  CHECK(back.x_data() == lift.x_data());
  CHECK(back.xx_data() == lift.xx_data());
}
