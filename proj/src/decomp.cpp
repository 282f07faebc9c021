#include "fraclab/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fraclab/errors.hpp"
#include "fraclab/noise.hpp"
#include "fraclab/quadrature.hpp"

namespace fraclab::decomp {

namespace {

// cells per unit block; the chain grid must tile [k-1, k] exactly
std::size_t cells_per_block(double step) {
  const double cells = 1.0 / step;
  const auto n = static_cast<std::size_t>(std::llround(cells));
  if (n < 1 || std::abs(static_cast<double>(n) * step - 1.0) > 1e-9)
    throw std::invalid_argument("decomp: grid step must divide the unit block");
  return n;
}

bool is_centred(const hermite::HermiteProfile& g) {
  if (g.coeffs.empty()) return true;
  const double tol = hermite::kRankTol * std::max(1.0, std::sqrt(g.norm_sq()));
  return std::abs(g.coeffs[0]) <= tol;
}

// smallest chaos level l >= 1 carrying mass, 0 if the profile is constant
int first_active_level(const hermite::HermiteProfile& g) {
  for (std::size_t l = 1; l < g.coeffs.size(); ++l)
    if (g.coeffs[l] != 0.0) return static_cast<int>(l);
  return 0;
}

// E[U(y_{a+d}) | F_a] by the term-by-term closed form
double conditional_value(const fou::VolterraChain& chain,
                         const fou::VolterraChain::Path& path,
                         const hermite::HermiteProfile& g, std::size_t anchor,
                         std::size_t d) {
  const double sb2 = chain.sigma_bar_sq(d);
  const double ybar = chain.conditional_mean(path, anchor, d);
  double sum = 0.0;
  for (std::size_t l = 0; l < g.coeffs.size(); ++l)
    if (g.coeffs[l] != 0.0)
      sum += g.coeffs[l] *
             noise::conditional_hermite_expectation(static_cast<int>(l), sb2, ybar);
  return sum;
}

std::vector<double> synthesized_values(const hermite::HermiteProfile& g,
                                       const std::vector<double>& y,
                                       std::size_t count) {
  const auto u = hermite::synthesize(g);
  std::vector<double> vals(count);
  for (std::size_t i = 0; i < count; ++i) vals[i] = u(y[i]);
  return vals;
}

}  // namespace

std::vector<double> block_integrals(const TimeGrid& grid,
                                    const std::vector<double>& y,
                                    const hermite::HermiteProfile& g) {
  if (y.size() < grid.count())
    throw DimensionMismatch("block_integrals: path shorter than grid");
  const std::size_t cpb = cells_per_block(grid.step());
  const std::size_t blocks = (grid.count() - 1) / cpb;
  if (blocks < 1)
    throw HorizonTooShort("block_integrals: grid shorter than one unit block");

  const auto u = synthesized_values(g, y, blocks * cpb + 1);
  std::vector<double> result(blocks);
  for (std::size_t k = 0; k < blocks; ++k) {
    const std::size_t b = k * cpb;
    double acc = 0.5 * (u[b] + u[b + cpb]);
    for (std::size_t i = b + 1; i < b + cpb; ++i) acc += u[i];
    result[k] = acc * grid.step();
  }
  return result;
}

double conditional_tail(const fou::VolterraChain& chain,
                        const fou::VolterraChain::Path& path,
                        const hermite::HermiteProfile& g, std::size_t k,
                        double horizon) {
  if (k < 1) throw std::invalid_argument("conditional_tail: blocks start at k = 1");
  const std::size_t cpb = cells_per_block(chain.step());
  const std::size_t a = k * cpb;
  if (a + 1 > path.y.size())
    throw HorizonTooShort("conditional_tail: path shorter than k blocks");

  const double step = chain.step();
  const double memory_end = static_cast<double>(k) + chain.memory();
  const int level = first_active_level(g);
  if (horizon > memory_end + 0.5 * step && level >= 1) {
    // past its memory the chain's conditional expectation is exactly the
    // profile mean; extending the claim to `horizon` is only honest when the
    // continuum memory loss behind the centred part actually converges
    hermite::HermiteProfile centred = g;
    centred.coeffs[0] = 0.0;
    centred.rank = level;
    // probe well past the kernel crossover so the fitted exponent sees the
    // genuine power regime, not the faster pre-asymptotic decay
    const auto loss = noise::memory_loss_integral(
        centred, HurstParameter(chain.h()), std::max(chain.memory(), 60.0));
    if (loss.verdict == noise::TailVerdict::kTailDivergent)
      throw TailDivergent("conditional_tail: continuum memory-loss integral diverges");
  }

  const auto u = synthesized_values(g, path.y, a + 1);
  // realized block [k-1, k]
  const std::size_t b = a - cpb;
  double acc = 0.5 * u[b];
  for (std::size_t i = b + 1; i < a; ++i) acc += u[i];

  // conditional tail [k, min(horizon, k + memory)]
  const double tail_span = std::min(horizon, memory_end) - static_cast<double>(k);
  const auto tail_cells = tail_span > 0.0
                              ? std::min(static_cast<std::size_t>(
                                             std::floor(tail_span / step + 1e-9)),
                                         chain.memory_cells())
                              : std::size_t{0};
  if (tail_cells == 0) return (acc + 0.5 * u[a]) * step;

  acc += u[a];  // node k is interior to [k-1, k + tail]
  for (std::size_t d = 1; d < tail_cells; ++d)
    acc += conditional_value(chain, path, g, a, d);
  acc += 0.5 * conditional_value(chain, path, g, a, tail_cells);
  double result = acc * step;
  // beyond memory the conditional expectation equals the profile mean exactly
  if (horizon > memory_end && !g.coeffs.empty())
    result += g.coeffs[0] * (horizon - memory_end);
  return result;
}

std::vector<double> conditional_tail_means(const fou::VolterraChain& chain,
                                           const fou::VolterraChain::Path& path,
                                           const hermite::HermiteProfile& g,
                                           std::size_t blocks) {
  const std::size_t cpb = cells_per_block(chain.step());
  if (blocks * cpb + 1 > path.y.size())
    throw HorizonTooShort("conditional_tail_means: path shorter than requested blocks");

  const std::size_t m = chain.memory_cells();
  const auto u = synthesized_values(g, path.y, blocks * cpb + 1);
  std::vector<double> result(blocks + 1);
  for (std::size_t k = 0; k <= blocks; ++k) {
    const std::size_t a = k * cpb;
    // E[U^(k+1)|F_k] = trapezoid of E[U(y_s)|F_k] over [k, k+1+memory]; the
    // integrand vanishes from d = memory on, leaving half node k plus the
    // interior of the chain window
    double acc = 0.5 * u[a];
    for (std::size_t d = 1; d < m; ++d)
      acc += conditional_value(chain, path, g, a, d);
    result[k] = acc * chain.step();
  }
  return result;
}

std::vector<double> martingale_sequence(const std::vector<double>& u_hat,
                                        const std::vector<double>& cond_means) {
  if (cond_means.size() < u_hat.size())
    throw DimensionMismatch("martingale_sequence: one conditional mean per block");
  std::vector<double> m(u_hat.size());
  double acc = 0.0;
  for (std::size_t l = 0; l < u_hat.size(); ++l) {
    acc += u_hat[l] - cond_means[l];
    m[l] = acc;
  }
  return m;
}

BlockFunctionals block_functionals(const fou::VolterraChain& chain,
                                   const fou::VolterraChain::Path& path,
                                   const hermite::HermiteProfile& g,
                                   std::size_t blocks) {
  if (blocks < 1)
    throw std::invalid_argument("block_functionals: need at least one block");
  const std::size_t cpb = cells_per_block(chain.step());
  if (blocks * cpb + 1 > path.y.size())
    throw HorizonTooShort("block_functionals: path shorter than requested blocks");

  BlockFunctionals out;
  const TimeGrid grid(chain.step(), blocks * cpb + 1);
  out.integrals = block_integrals(grid, path.y, g);

  // one linear pass; per anchor the tail of U^(k) and E[U^(k+1)|F_k] share
  // the conditional window, so calling conditional_tail per block (which
  // would re-synthesize the path prefix each time) is avoided
  const std::size_t m = chain.memory_cells();
  const double step = chain.step();
  const double c0 = g.coeffs.empty() ? 0.0 : g.coeffs[0];
  const auto u = hermite::synthesize(g);
  out.tail_means.resize(blocks + 1);
  out.tails.resize(blocks);
  for (std::size_t k = 0; k <= blocks; ++k) {
    const std::size_t a = k * cpb;
    double cs = 0.0;
    for (std::size_t d = 1; d < m; ++d)
      cs += conditional_value(chain, path, g, a, d);
    const double half_node = 0.5 * u(path.y[a]);
    out.tail_means[k] = (half_node + cs) * step;
    // the tail's own trapezoid carries half the (exactly constant) node at
    // k + memory, which the mean window drops as an exact zero
    if (k >= 1)
      out.tails[k - 1] =
          out.integrals[k - 1] + (half_node + cs + 0.5 * c0) * step;
  }
  out.martingale = martingale_sequence(out.tails, out.tail_means);
  return out;
}

namespace {

// chaos levels carried by both profiles; l = 0 is excluded by centring
std::vector<std::size_t> shared_levels(const hermite::HermiteProfile& gi,
                                       const hermite::HermiteProfile& gj) {
  std::vector<std::size_t> ls;
  const std::size_t top = std::min(gi.coeffs.size(), gj.coeffs.size());
  for (std::size_t l = 1; l < top; ++l)
    if (gi.coeffs[l] != 0.0 && gj.coeffs[l] != 0.0) ls.push_back(l);
  return ls;
}

double factorial(std::size_t l) {
  double f = 1.0;
  for (std::size_t i = 2; i <= l; ++i) f *= static_cast<double>(i);
  return f;
}

}  // namespace

double area_constant(const hermite::HermiteProfile& gi,
                     const hermite::HermiteProfile& gj, const HurstParameter& h) {
  if (!is_centred(gi) || !is_centred(gj))
    throw NotCentred("area_constant: observables must be centred");
  const auto levels = shared_levels(gi, gj);
  if (levels.empty()) return 0.0;

  const double power = 2.0 * h.value() - 2.0;  // rho ~ s^{2h-2}
  if (!h.is_half()) {
    const double slowest = static_cast<double>(levels.front()) * power;
    if (slowest >= -1.0)
      throw TailDivergent("area_constant: int rho^l diverges at chaos level " +
                          std::to_string(levels.front()));
  }

  constexpr double kHorizon = 60.0;
  double total = 0.0;
  for (const std::size_t l : levels) {
    const auto li = static_cast<double>(l);
    const auto q = integrate(
        [&](double s) { return std::pow(noise::fou_autocorrelation(s, h), li); },
        0.0, kHorizon, 1e-10, 1e-8);
    double tail = 0.0;
    if (!h.is_half()) {
      // power tail calibrated at the horizon: rho(S)^l * S / (-(l(2h-2)+1))
      const double rho_end = noise::fou_autocorrelation(kHorizon, h);
      tail = std::pow(rho_end, li) * kHorizon / (-(li * power + 1.0));
    }
    total += factorial(l) * gi.coeffs[l] * gj.coeffs[l] * (q.value + tail);
  }
  return total;
}

double area_constant(const hermite::HermiteProfile& gi,
                     const hermite::HermiteProfile& gj,
                     const fou::VolterraChain& chain) {
  if (!is_centred(gi) || !is_centred(gj))
    throw NotCentred("area_constant: observables must be centred");
  const auto levels = shared_levels(gi, gj);
  if (levels.empty()) return 0.0;

  double acc = 0.0;
  for (std::size_t d = 0; d < chain.memory_cells(); ++d) {
    const double rho = chain.rho(d);
    double c = 0.0;
    for (const std::size_t l : levels)
      c += factorial(l) * gi.coeffs[l] * gj.coeffs[l] *
           std::pow(rho, static_cast<double>(l));
    acc += (d == 0 ? 0.5 : 1.0) * c;
  }
  return acc * chain.step();
}

nlohmann::json ResidualReport::to_json() const {
  return nlohmann::json{{"epsilon", epsilon},
                        {"t", t},
                        {"blocks", blocks},
                        {"double_integral", double_integral},
                        {"martingale_sum", martingale_sum},
                        {"area_term", area_term},
                        {"block_double_sum", block_double_sum},
                        {"err", err}};
}

ResidualReport lemma_residual(const fou::VolterraChain& chain,
                              const fou::VolterraChain::Path& path,
                              const hermite::HermiteProfile& gi,
                              const hermite::HermiteProfile& gj, double epsilon,
                              double t) {
  if (!(epsilon > 0.0 && t > 0.0))
    throw std::invalid_argument("lemma_residual: need epsilon, t > 0");
  const auto blocks = static_cast<std::size_t>(std::floor(t / epsilon + 1e-9));
  if (blocks < 2)
    throw std::invalid_argument("lemma_residual: horizon shorter than two blocks");
  const std::size_t cpb = cells_per_block(chain.step());
  const std::size_t last = blocks * cpb;
  if (last + 1 > path.y.size())
    throw HorizonTooShort("lemma_residual: path shorter than t/epsilon blocks");

  ResidualReport rep;
  rep.epsilon = epsilon;
  rep.blocks = blocks;
  rep.t = epsilon * static_cast<double>(blocks);

  const auto fi = block_functionals(chain, path, gi, blocks);
  const auto fj = gi.coeffs == gj.coeffs
                      ? fi
                      : block_functionals(chain, path, gj, blocks);

  // continuum double integral: trapezoid of U * prefix-trapezoid(V)
  const auto u = synthesized_values(gi, path.y, last + 1);
  const auto v = synthesized_values(gj, path.y, last + 1);
  const double step = chain.step();
  double prefix = 0.0, acc = 0.0;
  for (std::size_t i = 1; i <= last; ++i) {
    const double node_prev = u[i - 1] * prefix;
    prefix += 0.5 * step * (v[i - 1] + v[i]);
    acc += 0.5 * step * (node_prev + u[i] * prefix);
  }
  rep.double_integral = epsilon * acc;

  double mart = 0.0;
  for (std::size_t k = 1; k < blocks; ++k)
    mart += (fi.martingale[k] - fi.martingale[k - 1]) * fj.martingale[k - 1];
  rep.martingale_sum = epsilon * mart;

  rep.area_term = rep.t * area_constant(gi, gj, chain);

  double block_sum = 0.0, prefix_j = 0.0;
  for (std::size_t k = 0; k < blocks; ++k) {
    block_sum += fi.integrals[k] * prefix_j;
    prefix_j += fj.integrals[k];
  }
  rep.block_double_sum = epsilon * block_sum;

  rep.err = rep.double_integral - rep.martingale_sum - rep.area_term;
  return rep;
}

}  // namespace fraclab::decomp
