#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fraclab/ensemble.hpp"
#include "fraclab/hermite.hpp"
#include "fraclab/roughpath.hpp"
#include "fraclab/time_grid.hpp"

namespace fraclab::solve {

// A driving field f: state -> tangent.  jacobian fills d f_i / d x_j
// row-major (dim x dim); when absent it is replaced by central differences
// with step 1e-6, which costs ~1e-9 relative accuracy in the area terms.
struct VectorField {
  std::function<void(std::span<const double>, std::span<double>)> f;
  std::function<void(std::span<const double>, std::span<double>)> jacobian;
};

VectorField make_field_1d(std::function<double(double)> f,
                          std::function<double(double)> df = nullptr);

// Slow/fast system dx/dt = sum_k alpha_k(eps) f_k(x) G_k(y_{t/eps}); channels
// below n_split carry Wiener-regime scaling, the rest Hermite-regime (the
// split only matters downstream -- each alpha_k follows H*(rank G_k) anyway).
struct MultiscaleSystem {
  std::size_t dim = 0;
  std::vector<VectorField> fields;
  std::vector<hermite::HermiteProfile> observables;
  std::size_t n_split = 0;
  std::vector<double> x0;
};

struct StepStats {
  double max_step = 0.0;
  double error_estimate = 0.0;  // sup-norm gap between the last two refinements
  std::size_t refinements = 0;
};

class SolutionPath {
 public:
  SolutionPath(TimeGrid grid, std::size_t dim, std::vector<double> states,
               std::string scheme, StepStats stats);

  const TimeGrid& grid() const { return grid_; }
  std::size_t dim() const { return dim_; }
  double at(std::size_t i, std::size_t k) const { return states_[i * dim_ + k]; }
  const std::vector<double>& states() const { return states_; }
  const std::string& scheme() const { return scheme_; }
  const StepStats& stats() const { return stats_; }

  std::vector<double> final_state() const;

  void save(const std::string& filename) const;
  static SolutionPath load(const std::string& filename);
  void export_csv(const std::string& filename) const;

 private:
  TimeGrid grid_;
  std::size_t dim_;
  std::vector<double> states_;  // count x dim, row-major
  std::string scheme_;
  StepStats stats_;
};

inline constexpr double kBlowupThreshold = 1e8;

// RK4 over the slow clock with the fast observable samples G_k(y_i) linearly
// interpolated in between; substeps keep the slow step <= eps/8 and aligned
// with fast cells, so for f == 1 the result reproduces the trapezoidal
// functional lift exactly.  The ensemble supplies the fast grid and (for fOU
// kinds) the Hurst parameter behind the H*(m_k) scalings; ensembles without
// one (Markov noise) run all channels at the Wiener scaling 1/sqrt(eps).
SolutionPath solve_multiscale(const MultiscaleSystem& system, double epsilon,
                              const StationaryEnsemble& ensemble,
                              std::size_t path_index, double t_max);

// Davie second-order scheme along a level-2 rough driver:
//   x += f_k(x) X^k_{s,t} + (Df_j f_i)(x) XX^{ij}_{s,t}  (+ b(x) (t-s)),
// run on dyadically refined subsamplings of the lift grid until two
// consecutive refinements agree to tol in sup norm or the grid resolution is
// reached (the finest information the lift carries); the remaining gap is
// reported as error_estimate.  NoConvergence if refinement stops improving
// while still above tol.
SolutionPath solve_rde(const std::vector<VectorField>& fields,
                       const rough::LiftedPath& lift, std::vector<double> x0,
                       const std::function<void(std::span<const double>,
                                                std::span<double>)>& drift_b = nullptr,
                       double tol = 1e-6);

// Left-point Young-Euler against a driver of empirical Hoelder exponent
// > 0.55 (dyadic sup-increment fit; RegularityTooLow otherwise), with the
// same refinement cascade as solve_rde.
SolutionPath solve_young(const std::vector<VectorField>& fields,
                         const TimeGrid& grid, const std::vector<double>& driver,
                         std::size_t d, std::vector<double> x0,
                         double tol = 1e-6);

// Independent 1-D reference: x_t = F^{-1}(F(x0) + X_t) with F' = 1/f,
// F by adaptive quadrature and the inverse by bisection to 1e-12.  Valid
// while f keeps a fixed sign on the explored interval (FieldVanishes
// otherwise); the driver is the already-scaled path X with X_0 = 0.
SolutionPath oracle_1d(const std::function<double(double)>& f, double x0,
                       const TimeGrid& grid, const std::vector<double>& driver);

}  // namespace fraclab::solve
