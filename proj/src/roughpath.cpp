#include "fraclab/roughpath.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fraclab/errors.hpp"
#include "fraclab/parallel.hpp"
#include "fraclab/rng.hpp"

namespace fraclab::rough {

namespace {

constexpr char kMagic[8] = {'F', 'R', 'A', 'C', 'L', 'F', 'T', '1'};

// Dyadic-gap pair schedule.  Gaps are powers of two; within a gap level the
// anchors are thinned by a power of two so that a doubled budget evaluates a
// strict superset of pairs (sup statistics are then monotone in the budget).
// Random pairs from a seeded stream top up the budget; the full span is
// always included.
std::vector<std::pair<std::size_t, std::size_t>> pair_schedule(
    std::size_t count, std::size_t pair_budget, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(pair_budget + 8);
  pairs.emplace_back(0, count - 1);

  std::size_t n_levels = 0;
  for (std::size_t g = 1; g < count; g *= 2) ++n_levels;
  const std::size_t cap = std::max<std::size_t>(8, pair_budget / (2 * n_levels));
  for (std::size_t g = 1; g < count; g *= 2) {
    std::size_t thin = 1;
    while ((count - 1) / (g * thin) > cap) thin *= 2;
    for (std::size_t i = 0; i + g < count; i += g * thin) pairs.emplace_back(i, i + g);
  }

  RngStream rng(seed, 0, rng_purpose::kPairs);
  while (pairs.size() < pair_budget) {
    std::size_t i = static_cast<std::size_t>(rng.next_u64() % count);
    std::size_t j = static_cast<std::size_t>(rng.next_u64() % count);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    pairs.emplace_back(i, j);
  }
  return pairs;
}

double sup_ratios(const LiftedPath& a, const LiftedPath* b, double alpha,
                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                  double& second_sup) {
  const std::size_t d = a.d();
  const TimeGrid& grid = a.grid();
  double first = 0.0, second = 0.0;
  for (const auto& [s, t] : pairs) {
    const double dt = grid.time(t) - grid.time(s);
    double n1 = 0.0, n2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double v = a.increment(s, t, k);
      if (b) v -= b->increment(s, t, k);
      n1 += v * v;
    }
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) {
        double v = a.area(s, t, j, k);
        if (b) v -= b->area(s, t, j, k);
        n2 += v * v;
      }
    first = std::max(first, std::sqrt(n1) / std::pow(dt, alpha));
    second = std::max(second, std::sqrt(n2) / std::pow(dt, 2.0 * alpha));
  }
  second_sup = second;
  return first;
}

}  // namespace

LiftedPath::LiftedPath(TimeGrid grid, std::size_t d, std::vector<double> x,
                       std::vector<double> xx)
    : grid_(grid), d_(d), x_(std::move(x)), xx_(std::move(xx)) {
  if (d_ == 0) throw std::invalid_argument("LiftedPath: d must be positive");
  if (x_.size() != grid_.count() * d_ || xx_.size() != grid_.count() * d_ * d_)
    throw DimensionMismatch("LiftedPath: x/xx sizes inconsistent with grid and d");
  for (std::size_t k = 0; k < d_; ++k)
    if (x_[k] != 0.0)
      throw std::invalid_argument("LiftedPath: path must start at 0");
  for (std::size_t jk = 0; jk < d_ * d_; ++jk)
    if (xx_[jk] != 0.0)
      throw std::invalid_argument("LiftedPath: second level must start at 0");
}

void LiftedPath::save(const std::string& filename) const {
  nlohmann::json header;
  header["grid"] = {{"step", grid_.step()}, {"count", grid_.count()}};
  header["d"] = d_;
  const std::string hs = header.dump();

  std::ofstream out(filename, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + filename);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.write(reinterpret_cast<const char*>(x_.data()),
            static_cast<std::streamsize>(x_.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(xx_.data()),
            static_cast<std::streamsize>(xx_.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + filename);
}

LiftedPath LiftedPath::load(const std::string& filename) {
  std::ifstream in(filename, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + filename);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a lift container: " + filename);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  const auto header = nlohmann::json::parse(hs);

  TimeGrid grid(header.at("grid").at("step").get<double>(),
                header.at("grid").at("count").get<std::size_t>());
  const auto d = header.at("d").get<std::size_t>();
  std::vector<double> x(grid.count() * d), xx(grid.count() * d * d);
  in.read(reinterpret_cast<char*>(x.data()),
          static_cast<std::streamsize>(x.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(xx.data()),
          static_cast<std::streamsize>(xx.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated lift container: " + filename);
  return LiftedPath(grid, d, std::move(x), std::move(xx));
}

LiftedPath canonical_lift(const TimeGrid& grid, const std::vector<double>& paths,
                          std::size_t d) {
  if (d == 0) throw std::invalid_argument("canonical_lift: d must be positive");
  const std::size_t count = grid.count();
  if (paths.size() != count * d)
    throw DimensionMismatch("canonical_lift: paths size is not count * d");

  std::vector<double> x(count * d), xx(count * d * d, 0.0);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t k = 0; k < d; ++k) x[i * d + k] = paths[i * d + k] - paths[k];
  for (std::size_t i = 0; i + 1 < count; ++i) {
    const double* xi = x.data() + i * d;
    const double* xn = x.data() + (i + 1) * d;
    const double* prev = xx.data() + i * d * d;
    double* next = xx.data() + (i + 1) * d * d;
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        next[j * d + k] = prev[j * d + k] + xi[j] * (xn[k] - xi[k]);
  }
  return LiftedPath(grid, d, std::move(x), std::move(xx));
}

double chen_defect(const TimeGrid& grid, std::size_t d,
                   const std::function<double(std::size_t, std::size_t)>& x,
                   const std::function<double(std::size_t, std::size_t,
                                              std::size_t, std::size_t)>& xx,
                   std::size_t sample_triples, std::uint64_t seed) {
  const std::size_t count = grid.count();
  if (count < 3) return 0.0;
  RngStream rng(seed, 0, rng_purpose::kPairs);
  double worst = 0.0;
  for (std::size_t n = 0; n < sample_triples; ++n) {
    std::size_t s, u, t;
    if (n == 0) {  // the full span with its midpoint is always checked
      s = 0;
      u = (count - 1) / 2;
      t = count - 1;
    } else {
      std::size_t a = static_cast<std::size_t>(rng.next_u64() % count);
      std::size_t b = static_cast<std::size_t>(rng.next_u64() % count);
      std::size_t c = static_cast<std::size_t>(rng.next_u64() % count);
      s = std::min({a, b, c});
      t = std::max({a, b, c});
      u = a + b + c - s - t;
      if (s == u || u == t) continue;
    }
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) {
        const double defect = xx(s, t, j, k) - xx(s, u, j, k) - xx(u, t, j, k) -
                              (x(u, j) - x(s, j)) * (x(t, k) - x(u, k));
        worst = std::max(worst, std::abs(defect));
      }
  }
  return worst;
}

double chen_defect(const LiftedPath& lift, std::size_t sample_triples,
                   std::uint64_t seed) {
  return chen_defect(
      lift.grid(), lift.d(),
      [&](std::size_t i, std::size_t k) { return lift.x(i, k); },
      [&](std::size_t s, std::size_t t, std::size_t j, std::size_t k) {
        return lift.area(s, t, j, k);
      },
      sample_triples, seed);
}

nlohmann::json HolderReport::to_json() const {
  return {{"alpha", alpha},
          {"first_order_norm", first_order_norm},
          {"second_order_norm", second_order_norm},
          {"pair_budget", pair_budget},
          {"seed", seed}};
}

HolderReport holder_norm(const LiftedPath& lift, double alpha,
                         std::size_t pair_budget, std::uint64_t seed) {
  if (!(alpha > 1.0 / 3.0 && alpha < 1.0))
    throw std::invalid_argument("holder_norm: alpha must be in (1/3, 1)");
  const auto pairs = pair_schedule(lift.grid().count(), pair_budget, seed);
  HolderReport report;
  report.alpha = alpha;
  report.pair_budget = pair_budget;
  report.seed = seed;
  double second_sq = 0.0;
  report.first_order_norm = sup_ratios(lift, nullptr, alpha, pairs, second_sq);
  report.second_order_norm = std::sqrt(second_sq);
  return report;
}

double rough_distance(const LiftedPath& a, const LiftedPath& b, double alpha,
                      std::size_t pair_budget, std::uint64_t seed) {
  if (!(a.grid() == b.grid()) || a.d() != b.d())
    throw GridMismatch("rough_distance: lifts live on different grids");
  if (!(alpha > 1.0 / 3.0 && alpha < 1.0))
    throw std::invalid_argument("rough_distance: alpha must be in (1/3, 1)");
  const auto pairs = pair_schedule(a.grid().count(), pair_budget, seed);
  double second = 0.0;
  const double first = sup_ratios(a, &b, alpha, pairs, second);
  return first + second;
}

std::vector<LiftedPath> scaled_functional_lift(
    const StationaryEnsemble& ensemble,
    const std::vector<hermite::HermiteProfile>& g, double epsilon,
    const std::vector<double>& alphas, double t_max) {
  const std::size_t d = g.size();
  if (d == 0)
    throw std::invalid_argument("scaled_functional_lift: no observables");
  if (alphas.size() != d)
    throw DimensionMismatch("scaled_functional_lift: one scaling per observable");
  if (!(epsilon > 0.0 && t_max > 0.0))
    throw std::invalid_argument("scaled_functional_lift: need epsilon, t_max > 0");
  for (const auto& profile : g) {
    const double tol = hermite::kRankTol * std::max(1.0, std::sqrt(profile.norm_sq()));
    if (profile.coeffs.empty() || std::abs(profile.coeffs[0]) > tol)
      throw NotCentred("scaled_functional_lift: observable has nonzero mean");
  }

  const TimeGrid& fast = ensemble.grid();
  const double slow_step = epsilon * fast.step();
  const std::size_t n_cells =
      static_cast<std::size_t>(std::floor(t_max / slow_step + 1e-9));
  if (n_cells < 1 || n_cells + 1 > fast.count())
    throw HorizonTooShort("scaled_functional_lift: ensemble shorter than t_max/epsilon");
  const TimeGrid slow(slow_step, n_cells + 1);

  std::vector<std::function<double(double)>> eval;
  eval.reserve(d);
  for (const auto& profile : g) eval.push_back(hermite::synthesize(profile));

  std::vector<std::vector<double>> xs(ensemble.n_paths());
  parallel_for(ensemble.n_paths(), [&](std::size_t p) {
    const double* y = ensemble.path(p);
    std::vector<double> x((n_cells + 1) * d, 0.0);
    std::vector<double> prev(d), cur(d);
    for (std::size_t k = 0; k < d; ++k) prev[k] = eval[k](y[0]);
    for (std::size_t i = 0; i < n_cells; ++i) {
      for (std::size_t k = 0; k < d; ++k) cur[k] = eval[k](y[i + 1]);
      for (std::size_t k = 0; k < d; ++k)
        x[(i + 1) * d + k] =
            x[i * d + k] + alphas[k] * slow_step * 0.5 * (prev[k] + cur[k]);
      std::swap(prev, cur);
    }
    xs[p] = std::move(x);
  });

  std::vector<LiftedPath> lifts;
  lifts.reserve(ensemble.n_paths());
  for (std::size_t p = 0; p < ensemble.n_paths(); ++p)
    lifts.push_back(canonical_lift(slow, xs[p], d));
  return lifts;
}

LiftedPath add_area_drift(const LiftedPath& lift, const std::vector<double>& a) {
  const std::size_t d = lift.d();
  if (a.size() != d * d)
    throw DimensionMismatch("add_area_drift: drift matrix must be d x d");
  std::vector<double> xx = lift.xx_data();
  for (std::size_t i = 0; i < lift.grid().count(); ++i) {
    const double t = lift.grid().time(i);
    for (std::size_t jk = 0; jk < d * d; ++jk) xx[i * d * d + jk] += t * a[jk];
  }
  return LiftedPath(lift.grid(), d, lift.x_data(), std::move(xx));
}

}  // namespace fraclab::rough
