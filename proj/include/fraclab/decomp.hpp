#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "fraclab/fou.hpp"
#include "fraclab/hermite.hpp"
#include "fraclab/time_grid.hpp"

namespace fraclab::decomp {

// Unit-block functionals of one centred observable U = G(y) along one
// finite-memory chain path, blocks k = 1..L:
//   integrals[k-1]  I(k)   = int_{k-1}^k U(y_s) ds
//   tails[k-1]      U^(k)  = int_{k-1}^{k+memory} E[U(y_s)|F_k] ds
//   tail_means[k]          = E[U^(k+1) | F_k], k = 0..L
//   martingale[k-1] M_k    = sum_{l<=k} ( U^(l) - E[U^(l)|F_{l-1}] )
// All integrals share one trapezoidal rule on the chain grid, and the
// conditional expectations use the exact closed form of the chain's
// variance split, which makes U^(k) = I(k) + E[U^(k+1)|F_k] an identity of
// the discretization, not an approximation.
struct BlockFunctionals {
  std::vector<double> integrals;
  std::vector<double> tails;
  std::vector<double> tail_means;
  std::vector<double> martingale;
};

// Trapezoidal I(k) over every complete unit block the grid covers.  The step
// must divide the unit block; the observable is evaluated as synthesized
// (an uncentred profile is allowed here -- some consistency checks use one).
std::vector<double> block_integrals(const TimeGrid& grid,
                                    const std::vector<double>& y,
                                    const hermite::HermiteProfile& g);

// U^(k) truncated at `horizon` (time units): the realized block [k-1, k]
// plus the conditional tail over [k, min(horizon, k + memory)].  The chain's
// conditional expectation vanishes identically beyond its memory, so a
// horizon past k + memory adds exact zeros -- but if the continuum
// memory-loss integral behind the chain diverges, that request is
// unanswerable and throws TailDivergent instead of silently truncating.
double conditional_tail(const fou::VolterraChain& chain,
                        const fou::VolterraChain::Path& path,
                        const hermite::HermiteProfile& g, std::size_t k,
                        double horizon);

// E[U^(k+1) | F_k] for k = 0..blocks, by the same closed form and weights.
std::vector<double> conditional_tail_means(const fou::VolterraChain& chain,
                                           const fou::VolterraChain::Path& path,
                                           const hermite::HermiteProfile& g,
                                           std::size_t blocks);

// M_k = sum_{l<=k} (u_hat[l-1] - cond_means[l-1]); cond_means[l-1] is
// E[U^(l)|F_{l-1}] (extra trailing entries are ignored).
std::vector<double> martingale_sequence(const std::vector<double>& u_hat,
                                        const std::vector<double>& cond_means);

// One pass over a path: all four sequences for blocks 1..blocks.
BlockFunctionals block_functionals(const fou::VolterraChain& chain,
                                   const fou::VolterraChain::Path& path,
                                   const hermite::HermiteProfile& g,
                                   std::size_t blocks);

// A^{ij} = sum_l l! c^i_l c^j_l int_0^inf rho(s)^l ds for the continuum fOU
// correlation, adaptive quadrature plus a fitted power tail; TailDivergent
// when the slowest contributing chaos level has l(2h-2) >= -1.
double area_constant(const hermite::HermiteProfile& gi,
                     const hermite::HermiteProfile& gj, const HurstParameter& h);

// Same constant for the chain law itself: the lag trapezoid of
// sum_l l! c^i_l c^j_l rho_chain^l, exact because rho_chain has finite
// support.  This is the constant the discrete functionals drift around.
double area_constant(const hermite::HermiteProfile& gi,
                     const hermite::HermiteProfile& gj,
                     const fou::VolterraChain& chain);

// The composite residual of the martingale/area decomposition of the
// iterated integral, per path:
//   err = double_integral - martingale_sum - area_term,
// where double_integral = eps * int_0^L ( int_0^s V ) U ds (trapezoid),
// martingale_sum = eps * sum_{k=1}^{L-1} (M_{k+1} - M_k) N_k and
// area_term = (eps L) A^{ij}_chain.  block_double_sum keeps the strictly
// block-ordered variant eps * sum_k I(k) sum_{k'<k} J(k'), whose d = 1
// algebra ( = X^2/2 - eps/2 sum I(k)^2 for X = sqrt(eps) sum I ) is checked
// separately; it is NOT the quantity that converges -- its near-diagonal
// deficit stays O(1) in eps.
struct ResidualReport {
  double epsilon = 0.0;
  double t = 0.0;  // eps * L, the horizon actually covered
  std::size_t blocks = 0;
  double double_integral = 0.0;
  double martingale_sum = 0.0;
  double area_term = 0.0;
  double block_double_sum = 0.0;
  double err = 0.0;

  nlohmann::json to_json() const;
};

ResidualReport lemma_residual(const fou::VolterraChain& chain,
                              const fou::VolterraChain::Path& path,
                              const hermite::HermiteProfile& gi,
                              const hermite::HermiteProfile& gj, double epsilon,
                              double t);

}  // namespace fraclab::decomp
