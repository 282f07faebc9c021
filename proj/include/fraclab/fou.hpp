#pragma once

#include <cstdint>
#include <vector>

#include "fraclab/time_grid.hpp"

namespace fraclab::fou {

// Moving-average (Volterra) kernel of the stationary solution of
// dy = -y dt + dB^H over white noise:
//   K(u) = C_H [ u^{H-1/2} - int_0^u e^{-(u-v)} v^{H-1/2} dv ],
// with K(u) = e^{-u} at H = 1/2 and K(u) ~ C_H (H-1/2) u^{H-3/2} as u -> inf.
// All integrals carry analytic power-law tail handling so the slowly decaying
// kernel never has to be truncated.
class FouKernel {
 public:
  explicit FouKernel(const HurstParameter& h);

  double h() const { return h_; }
  double c_h() const { return c_h_; }

  double k(double u) const;

  // int_0^u K^2, int_u^inf K^2, and the total Var = int_0^inf K^2 = H Gamma(2H)
  double k2_head(double u) const;
  double k2_tail(double u) const;
  double variance() const { return variance_; }

  // Cov(t) = int_0^inf K(v) K(v+t) dv and its unit-variance normalization
  double covariance(double t) const;
  double autocorrelation(double t) const;

  // signed cell root-mean-square over [a, b]: sign(int K) * sqrt(mean K^2)
  double cell_l2(double a, double b) const;

 private:
  double k_series(double u) const;  // exact confluent series, u < crossover
  double k_asymptotic(double u) const;

  double h_;
  double c_h_;
  double variance_;
  static constexpr double kCrossover = 40.0;
};

// Finite-memory moving-average chain on a uniform grid:
//   y_i = sum_{m=0}^{M-1} k_m w_{i-m},  w i.i.d. N(0,1),
// with k_m the signed cell-L2 discretization of the fOU kernel over
// [m step, (m+1) step], renormalized to sum k_m^2 = 1.  The chain is exactly
// stationary with unit variance, its conditional split is exact in closed
// form, and at H = 1/2 it reproduces the AR(1) structure of the OU process.
class VolterraChain {
 public:
  VolterraChain(const HurstParameter& h, double step, double memory);

  double h() const { return h_; }
  double step() const { return step_; }
  double memory() const { return static_cast<double>(weights_.size()) * step_; }
  std::size_t memory_cells() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }

  // exact autocorrelation rho(j) = sum_m k_m k_{m+j} (zero beyond memory)
  double rho(std::size_t j) const;

  // exact split variance of y_{a+d} given F_a: sum_{m >= d} k_m^2
  double sigma_bar_sq(std::size_t d) const;

  // One path of length count together with its driving innovations;
  // w has length count + M - 1 and y_i = sum_m k_m w[i + M-1 - m], so
  // w[M-1 + i] is the innovation arriving at grid index i.
  struct Path {
    std::vector<double> y;
    std::vector<double> w;
  };
  Path simulate(std::size_t count, std::uint64_t seed, std::uint64_t path_index) const;

  // E[y_{a+d} | F_a] realized on a simulated path: the surviving part of the
  // moving average, sum_{m >= d} k_m w[a + d + M-1 - m].
  double conditional_mean(const Path& path, std::size_t anchor, std::size_t d) const;

 private:
  double h_;
  double step_;
  std::vector<double> weights_;
  std::vector<double> rho_;  // precomputed autocorrelation, lags 0..M-1
};

}  // namespace fraclab::fou
