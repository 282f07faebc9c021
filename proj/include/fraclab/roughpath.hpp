#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraclab/ensemble.hpp"
#include "fraclab/hermite.hpp"
#include "fraclab/time_grid.hpp"

namespace fraclab::rough {

// A level-2 rough path sampled on a grid: the first-order path X_{0,t_i}
// (X_0 = 0) and the iterated integrals against the origin, XX_{0,t_i}.
// Two-parameter values come from Chen's relation,
//   XX_{s,t} = XX_{0,t} - XX_{0,s} - X_{0,s} (x) X_{s,t},
// which keeps storage linear in the grid and -- being an algebraic identity --
// satisfies the discrete Chen composition exactly for any stored data.
class LiftedPath {
 public:
  LiftedPath(TimeGrid grid, std::size_t d, std::vector<double> x,
             std::vector<double> xx);

  const TimeGrid& grid() const { return grid_; }
  std::size_t d() const { return d_; }

  // X_{0,t_i}^k
  double x(std::size_t i, std::size_t k) const { return x_[i * d_ + k]; }
  // XX_{0,t_i}^{jk}
  double xx0(std::size_t i, std::size_t j, std::size_t k) const {
    return xx_[(i * d_ + j) * d_ + k];
  }

  double increment(std::size_t s, std::size_t t, std::size_t k) const {
    return x(t, k) - x(s, k);
  }
  // XX_{s,t}^{jk} by Chen reconstruction
  double area(std::size_t s, std::size_t t, std::size_t j, std::size_t k) const {
    return xx0(t, j, k) - xx0(s, j, k) - x(s, j) * increment(s, t, k);
  }

  const std::vector<double>& x_data() const { return x_; }
  const std::vector<double>& xx_data() const { return xx_; }

  void save(const std::string& filename) const;
  static LiftedPath load(const std::string& filename);

 private:
  TimeGrid grid_;
  std::size_t d_;
  std::vector<double> x_;   // count x d, row-major
  std::vector<double> xx_;  // count x d x d
};

// Left-Riemann lift of sampled paths (count x d, row-major):
//   XX_{0,t_{i+1}} = XX_{0,t_i} + X_{0,t_i} (x) dX_i,
// the path recentred so X_0 = 0.
LiftedPath canonical_lift(const TimeGrid& grid, const std::vector<double>& paths,
                          std::size_t d);

// max |XX_{s,t} - XX_{s,u} - XX_{u,t} - X_{s,u} (x) X_{u,t}| over sampled
// triples s < u < t, for an arbitrary two-parameter second level xx(s,t,j,k).
double chen_defect(const TimeGrid& grid, std::size_t d,
                   const std::function<double(std::size_t, std::size_t)>& x,
                   const std::function<double(std::size_t, std::size_t,
                                              std::size_t, std::size_t)>& xx,
                   std::size_t sample_triples, std::uint64_t seed);

// Same defect on a stored lift.  The Chen-reconstructed second level makes
// this zero up to rounding by construction; it certifies the reconstruction
// arithmetic, while the map overload above can express genuine violations.
double chen_defect(const LiftedPath& lift, std::size_t sample_triples,
                   std::uint64_t seed);

struct HolderReport {
  double alpha = 0.0;
  double first_order_norm = 0.0;   // sup |X_{s,t}| / |t-s|^alpha
  double second_order_norm = 0.0;  // sup sqrt(|XX_{s,t}|) / |t-s|^alpha
  std::size_t pair_budget = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

inline constexpr std::size_t kDefaultPairBudget = std::size_t{1} << 16;

// Norms over a dyadic pair schedule (power-of-two gaps, power-of-two thinning
// so a larger budget always evaluates a superset of pairs) topped up with
// seeded random pairs; the full span (0, count-1) is always included.
HolderReport holder_norm(const LiftedPath& lift, double alpha,
                         std::size_t pair_budget = kDefaultPairBudget,
                         std::uint64_t seed = 0);

// Inhomogeneous alpha-Hoelder distance over the same pair schedule:
//   sup |X^a_{s,t} - X^b_{s,t}| / |t-s|^alpha
//     + sup |XX^a_{s,t} - XX^b_{s,t}| / |t-s|^{2 alpha}.
double rough_distance(const LiftedPath& a, const LiftedPath& b, double alpha,
                      std::size_t pair_budget = kDefaultPairBudget,
                      std::uint64_t seed = 0);

// Per-path lift of the scaled occupation functionals
//   X^k_t = alpha_k int_0^t G_k(y_{s/eps}) ds
// on the slow clock: trapezoidal first order over the fast samples, canonical
// (left-Riemann) second order.  The lift grid has step eps * fast_step and
// spans t_max.  Observables must be centred (|c_0| <= tolerance).
std::vector<LiftedPath> scaled_functional_lift(
    const StationaryEnsemble& ensemble,
    const std::vector<hermite::HermiteProfile>& g, double epsilon,
    const std::vector<double>& alphas, double t_max);

// XX_{s,t} += (t - s) A, i.e. XX_{0,t_i} += t_i A: the Chen-compatible
// area drift of the limiting lift.  A is d x d row-major.
LiftedPath add_area_drift(const LiftedPath& lift, const std::vector<double>& a);

}  // namespace fraclab::rough
