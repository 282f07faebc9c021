#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraclab/time_grid.hpp"

namespace fraclab::hermite {

// Probabilists' family: H0=1, H1=x, H_{l+1} = x H_l - l H_{l-1},
// orthogonality E[H_k(Z) H_j(Z)] = delta_{kj} k!.
double hermite_eval(int l, double x);

// Chaos coefficients of an observable G = sum c_l H_l against N(0,1).
struct HermiteProfile {
  std::vector<double> coeffs;  // c_0 .. c_{l_max}
  int rank = 0;                // smallest l with |c_l| above the relative tolerance
  int l_max = 0;
  double residual = 0.0;       // L2 mass beyond l_max, clipped at 0

  double norm_sq() const;  // sum c_l^2 l! + residual

  nlohmann::json to_json() const;
  static HermiteProfile from_json(const nlohmann::json& j);
};

inline constexpr double kRankTol = 1e-10;  // relative to L2 norm of G

// c_l = E[G(Z) H_l(Z)] / l! by Gauss-Hermite quadrature.  n_nodes = 0 picks
// 2*l_max + 8 (exact for polynomial G of degree <= l_max + 3).  Coefficients
// below kRankTol * ||G|| are hard-zeroed; assert_centred additionally demands
// c_0 be below that threshold.
HermiteProfile expand(const std::function<double(double)>& g, int l_max,
                      int n_nodes = 0, bool assert_centred = false);

// Tabulated observable: monotone cubic interpolation through (xs, ys),
// clamped to the end values outside the table.
HermiteProfile expand_tabulated(const std::vector<double>& xs,
                                const std::vector<double>& ys, int l_max,
                                int n_nodes = 0);

std::function<double(double)> synthesize(const HermiteProfile& profile);

// E[H_k(Y1) H_k(Y2)] for a unit-variance Gaussian pair with correlation rho.
double correlation_of_chaos(int k, double rho);

// H*(m) = m(h-1) + 1; the borderline H* = 1/2 separates the Wiener-limit and
// Hermite-limit regimes.
double h_star(int m, const HurstParameter& h);

enum class DecayVerdict { kConverging, kDiverging, kInconclusive };

struct ChaosDecaySum {
  double sum = 0.0;  // partial sum of |c_l| sqrt(l!) (2q-1)^{l/2}
  DecayVerdict verdict = DecayVerdict::kInconclusive;
};

ChaosDecaySum fast_chaos_decay(const HermiteProfile& profile, int q);

enum class ScalingRegime { kWiener, kBorderline, kHermite };

std::string to_string(ScalingRegime r);

// alpha(eps): 1/sqrt(eps) below the borderline, eps^{H*-1} above it,
// 1/sqrt(eps |ln eps|) exactly at it.
double scaling_alpha(double epsilon, double h_star_value);

struct ScalingRule {
  double h_star = 0.0;
  ScalingRegime regime = ScalingRegime::kWiener;

  double alpha(double epsilon) const { return scaling_alpha(epsilon, h_star); }
  // eps^{(H* v 1/2) - 1}; equivalent to alpha away from the borderline
  double alpha_unified(double epsilon) const;
};

ScalingRule make_scaling_rule(double h_star_value);

struct GateResult {
  bool pass = true;
  std::string violated;  // name of the first violated inequality, empty if pass
};

// Admissibility of a multi-channel configuration: channels 0..n_split-1 are
// Wiener-regime, the rest Hermite-regime; ranks must be non-increasing.
// Checks, in order: per-channel "1/2 - 1/p_k > 1/3" (Wiener block),
// "H*(m_k) - 1/p_k > 1/2" (Hermite block), and for mixed configurations the
// joint Hoelder-sum condition
//   min_{k<n}(1/2 - 1/p_k) + min_{k>=n}(H*(m_k) - 1/p_k) > 1.
GateResult assumption_gate(const std::vector<HermiteProfile>& profiles,
                           const std::vector<double>& p,
                           const HurstParameter& h, std::size_t n_split);

}  // namespace fraclab::hermite
