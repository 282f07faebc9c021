#pragma once

#include <cstdint>
#include <vector>

#include "fraclab/ensemble.hpp"
#include "fraclab/hermite.hpp"
#include "fraclab/time_grid.hpp"

namespace fraclab::noise {

// Cov(B_s, B_t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2 for fractional BM.
double fbm_covariance(double s, double t, const HurstParameter& h);

// Correlation of unit-spaced fBM increments at lag t >= 1:
// (t+1)^{2H}/2 + (t-1)^{2H}/2 - t^{2H}; ~ H(2H-1) t^{2H-2} for large t.
double increment_correlation(double t, const HurstParameter& h);

// Exact Gaussian sampling of fBM increments over the grid cells via circulant
// embedding of the stationary increment covariance; dense factorization
// fallback for count <= 4096.
StationaryEnsemble sample_fbm(const TimeGrid& grid, const HurstParameter& h,
                              std::size_t n_paths, std::uint64_t seed);

enum class FgnRoute { kAuto, kCirculant, kDense };

// Reusable sampler for stationary fractional Gaussian noise (fBM increments
// over cells of width step): the circulant spectrum or dense factor is built
// once, then each path is an independent deterministic stream.
class FgnSampler {
 public:
  FgnSampler(double step, std::size_t count, const HurstParameter& h,
             FgnRoute route = FgnRoute::kAuto);

  std::size_t count() const { return count_; }
  bool dense() const { return !dense_factor_.empty(); }

  std::vector<double> sample_path(std::uint64_t seed,
                                  std::uint64_t path_index) const;

 private:
  std::size_t count_;
  double scale_;                     // step^H: cell standard deviation
  std::vector<double> sqrt_lambda_;  // circulant eigenvalue roots (size m_)
  std::size_t m_ = 0;
  std::vector<double> dense_factor_;  // lower-triangular Cholesky, row-major
};

enum class FouMethod { kExactCovariance, kEulerBurnin };

// Stationary fractional Ornstein-Uhlenbeck (dy = -y dt + dB^H), normalized to
// unit variance.  exact_covariance: dense factorization of the stationary
// covariance (count <= 4096, else GridTooLarge).  euler_burnin: Euler-Maruyama
// from zero with >= 10 time units of burn-in, normalized by the calibrated
// empirical deviation; NonStationary if the per-path mean-drift test fails at
// the 1% level.
StationaryEnsemble sample_fou(const TimeGrid& grid, const HurstParameter& h,
                              std::size_t n_paths, std::uint64_t seed,
                              FouMethod method);

// Normalized stationary fOU correlation rho(t), rho(0) = 1, via quadrature on
// the moving-average representation; e^{-t} at h = 1/2.
double fou_autocorrelation(double t, const HurstParameter& h);

// Continuous-time Markov chain with generator rate_matrix, started from the
// stationary distribution, read off at the grid times as state_values[state];
// recentre subtracts the stationary mean.
StationaryEnsemble sample_markov_chain(const TimeGrid& grid,
                                       const std::vector<std::vector<double>>& rate_matrix,
                                       const std::vector<double>& state_values,
                                       std::size_t n_paths, std::uint64_t seed,
                                       bool recentre = true);

std::vector<double> markov_stationary_distribution(
    const std::vector<std::vector<double>>& rate_matrix);

// Variance split sigma_bar^2(s) = E[(E[y_s|F_k])^2] of the normalized fOU at
// anchor index k, evaluated at the grid offsets s = t_k .. t_{count-1}.
ConditionalSplit conditional_split(const HurstParameter& h, const TimeGrid& grid,
                                   std::size_t anchor);

// E[H_l(a + ytilde)] = sigma_bar^l H_l(a / sigma_bar) for a unit-variance
// split; limit convention at sigma_bar = 0 is 0 for l >= 1 and 1 for l = 0.
double conditional_hermite_expectation(int l, double sigma_bar_sq, double a);

enum class TailVerdict { kFinite, kTailDivergent };

struct MemoryLossResult {
  double value = 0.0;       // integral over [0, horizon]
  double tail_bound = 0.0;  // fitted power-law mass beyond the horizon
  double fitted_exponent = 0.0;
  TailVerdict verdict = TailVerdict::kFinite;
};

// integral_0^horizon || E[G(y_s) | F_0] ||_{L2} ds for the normalized fOU:
// the integrand is sqrt( sum_l c_l^2 l! sigma_bar^{2l}(s) ), decaying like
// s^{H*(m)-1}; the verdict follows the fitted tail exponent (divergent when
// >= -1).
MemoryLossResult memory_loss_integral(const hermite::HermiteProfile& profile,
                                      const HurstParameter& h, double horizon);

}  // namespace fraclab::noise
