#include "fraclab/hermite.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fraclab/errors.hpp"
#include "fraclab/quadrature.hpp"

namespace fraclab::hermite {

double hermite_eval(int l, double x) {
  if (l < 0) throw std::invalid_argument("hermite_eval: negative degree");
  if (l > 64) throw DegreeTooLarge("hermite degree " + std::to_string(l));
  if (l == 0) return 1.0;
  double hm = 1.0, hc = x;
  for (int k = 1; k < l; ++k) {
    const double hn = x * hc - static_cast<double>(k) * hm;
    hm = hc;
    hc = hn;
  }
  return hc;
}

namespace {

double factorial(int l) {
  double f = 1.0;
  for (int k = 2; k <= l; ++k) f *= static_cast<double>(k);
  return f;
}

double second_moment(const std::function<double(double)>& g,
                     const QuadRule& rule) {
  double m2 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = g(rule.nodes[i]);
    m2 += rule.weights[i] * v * v;
  }
  return m2;
}

}  // namespace

double HermiteProfile::norm_sq() const {
  double s = residual;
  for (std::size_t l = 0; l < coeffs.size(); ++l)
    s += coeffs[l] * coeffs[l] * factorial(static_cast<int>(l));
  return s;
}

nlohmann::json HermiteProfile::to_json() const {
  return nlohmann::json{{"coeffs", coeffs},
                        {"rank", rank},
                        {"l_max", l_max},
                        {"residual", residual},
                        {"convention", "probabilist-unnormalized"}};
}

HermiteProfile HermiteProfile::from_json(const nlohmann::json& j) {
  HermiteProfile p;
  p.coeffs = j.at("coeffs").get<std::vector<double>>();
  p.rank = j.at("rank").get<int>();
  p.l_max = j.at("l_max").get<int>();
  p.residual = j.at("residual").get<double>();
  return p;
}

HermiteProfile expand(const std::function<double(double)>& g, int l_max,
                      int n_nodes, bool assert_centred) {
  if (l_max < 0) throw std::invalid_argument("expand: l_max must be >= 0");
  if (l_max > 64) throw DegreeTooLarge("expand: l_max " + std::to_string(l_max));
  if (n_nodes <= 0) n_nodes = 2 * l_max + 8;
  if (n_nodes < 2 * l_max + 8) n_nodes = 2 * l_max + 8;

  const QuadRule rule = gauss_hermite_probabilists(n_nodes);
  const double m2 = second_moment(g, rule);
  // Square-integrability probe: a divergent E[G^2] grows without bound as the
  // node set extends into the tails.
  const double m2_refined = second_moment(g, gauss_hermite_probabilists(2 * n_nodes));
  if (!std::isfinite(m2) || !std::isfinite(m2_refined) ||
      m2_refined > 1.5 * m2 + 1e-12)
    throw QuadratureDivergence("expand: E[G^2] fails the tail-mass test");

  // One recurrence sweep per node gives all H_l at once.
  std::vector<double> coeffs(static_cast<std::size_t>(l_max) + 1, 0.0);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    const double wg = rule.weights[i] * g(x);
    double hm = 1.0, hc = x;
    coeffs[0] += wg;
    if (l_max >= 1) coeffs[1] += wg * x;
    for (int l = 2; l <= l_max; ++l) {
      const double hn = x * hc - static_cast<double>(l - 1) * hm;
      hm = hc;
      hc = hn;
      coeffs[static_cast<std::size_t>(l)] += wg * hn;
    }
  }
  for (int l = 0; l <= l_max; ++l)
    coeffs[static_cast<std::size_t>(l)] /= factorial(l);

  const double norm = std::sqrt(std::max(m2, 0.0));
  const double floor = kRankTol * std::max(norm, 1e-300);
  for (auto& c : coeffs)
    if (std::abs(c) <= floor) c = 0.0;
  if (assert_centred && coeffs[0] != 0.0)
    throw NotCentred("expand: c_0 = " + std::to_string(coeffs[0]));

  HermiteProfile profile;
  profile.coeffs = std::move(coeffs);
  profile.l_max = l_max;
  profile.rank = l_max + 1;
  for (int l = 0; l <= l_max; ++l)
    if (profile.coeffs[static_cast<std::size_t>(l)] != 0.0) {
      profile.rank = l;
      break;
    }
  double captured = 0.0;
  for (int l = 0; l <= l_max; ++l)
    captured += profile.coeffs[static_cast<std::size_t>(l)] *
                profile.coeffs[static_cast<std::size_t>(l)] * factorial(l);
  profile.residual = std::max(m2 - captured, 0.0);
  return profile;
}

namespace {

// Fritsch-Carlson monotone cubic through the table; clamped outside.
class MonotoneSpline {
 public:
  MonotoneSpline(std::vector<double> xs, std::vector<double> ys)
      : xs_(std::move(xs)), ys_(std::move(ys)) {
    const std::size_t n = xs_.size();
    if (n < 2 || n != ys_.size())
      throw std::invalid_argument("tabulated observable: need >= 2 sorted points");
    for (std::size_t i = 1; i < n; ++i)
      if (!(xs_[i] > xs_[i - 1]))
        throw std::invalid_argument("tabulated observable: xs not increasing");
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
      d[i] = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
    slopes_.resize(n);
    slopes_[0] = d[0];
    slopes_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i)
      slopes_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (d[i] == 0.0) {
        slopes_[i] = slopes_[i + 1] = 0.0;
        continue;
      }
      const double a = slopes_[i] / d[i], b = slopes_[i + 1] / d[i];
      const double s = a * a + b * b;
      if (s > 9.0) {
        const double t = 3.0 / std::sqrt(s);
        slopes_[i] = t * a * d[i];
        slopes_[i + 1] = t * b * d[i];
      }
    }
  }

  double operator()(double x) const {
    if (x <= xs_.front()) return ys_.front();
    if (x >= xs_.back()) return ys_.back();
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
    const double h = xs_[i + 1] - xs_[i];
    const double t = (x - xs_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return ys_[i] * (2 * t3 - 3 * t2 + 1) + h * slopes_[i] * (t3 - 2 * t2 + t) +
           ys_[i + 1] * (-2 * t3 + 3 * t2) + h * slopes_[i + 1] * (t3 - t2);
  }

 private:
  std::vector<double> xs_, ys_, slopes_;
};

}  // namespace

HermiteProfile expand_tabulated(const std::vector<double>& xs,
                                const std::vector<double>& ys, int l_max,
                                int n_nodes) {
  MonotoneSpline spline(xs, ys);
  return expand([spline](double x) { return spline(x); }, l_max, n_nodes);
}

std::function<double(double)> synthesize(const HermiteProfile& profile) {
  return [coeffs = profile.coeffs](double x) {
    double s = 0.0;
    if (!coeffs.empty()) s = coeffs[0];
    double hm = 1.0, hc = x;
    if (coeffs.size() > 1) s += coeffs[1] * x;
    for (std::size_t l = 2; l < coeffs.size(); ++l) {
      const double hn = x * hc - static_cast<double>(l - 1) * hm;
      hm = hc;
      hc = hn;
      s += coeffs[l] * hn;
    }
    return s;
  };
}

double correlation_of_chaos(int k, double rho) {
  if (k < 0) throw std::invalid_argument("correlation_of_chaos: negative degree");
  if (std::abs(rho) > 1.0 + 1e-12)
    throw std::invalid_argument("correlation_of_chaos: |rho| > 1");
  return factorial(k) * std::pow(rho, k);
}

double h_star(int m, const HurstParameter& h) {
  if (m < 1) throw std::invalid_argument("h_star: rank must be >= 1");
  return static_cast<double>(m) * (h.value() - 1.0) + 1.0;
}

ChaosDecaySum fast_chaos_decay(const HermiteProfile& profile, int q) {
  if (q < 1) throw std::invalid_argument("fast_chaos_decay: q must be >= 1");
  const double g = std::sqrt(2.0 * q - 1.0);
  ChaosDecaySum out;
  std::vector<std::pair<int, double>> terms;  // (degree, |c_l| sqrt(l!) g^l)
  for (std::size_t l = 0; l < profile.coeffs.size(); ++l) {
    const double c = std::abs(profile.coeffs[l]);
    if (c == 0.0) continue;
    const double t =
        c * std::sqrt(factorial(static_cast<int>(l))) * std::pow(g, static_cast<double>(l));
    out.sum += t;
    terms.emplace_back(static_cast<int>(l), t);
  }
  // Ratio test on a trailing window of nonzero terms, per unit of degree so
  // parity-sparse series (odd-only, even-only) are handled uniformly.
  if (terms.size() < 3) {
    out.verdict = DecayVerdict::kConverging;  // finitely many terms
    return out;
  }
  const std::size_t w0 = terms.size() > 8 ? terms.size() - 8 : 0;
  double rmax = 0.0, rmin = 1e300;
  for (std::size_t i = w0 + 1; i < terms.size(); ++i) {
    const int dl = terms[i].first - terms[i - 1].first;
    const double r = std::pow(terms[i].second / terms[i - 1].second, 1.0 / dl);
    rmax = std::max(rmax, r);
    rmin = std::min(rmin, r);
  }
  if (rmax < 1.0 - 1e-9)
    out.verdict = DecayVerdict::kConverging;
  else if (rmin >= 1.0 - 1e-9)
    out.verdict = DecayVerdict::kDiverging;
  else
    out.verdict = DecayVerdict::kInconclusive;
  return out;
}

std::string to_string(ScalingRegime r) {
  switch (r) {
    case ScalingRegime::kWiener: return "wiener";
    case ScalingRegime::kBorderline: return "borderline";
    case ScalingRegime::kHermite: return "hermite";
  }
  throw std::logic_error("unknown ScalingRegime");
}

double scaling_alpha(double epsilon, double h_star_value) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("scaling_alpha: epsilon outside (0,1)");
  if (std::abs(h_star_value - 0.5) < 1e-12)
    return 1.0 / std::sqrt(epsilon * std::abs(std::log(epsilon)));
  if (h_star_value < 0.5) return 1.0 / std::sqrt(epsilon);
  return std::pow(epsilon, h_star_value - 1.0);
}

double ScalingRule::alpha_unified(double epsilon) const {
  return std::pow(epsilon, std::max(h_star, 0.5) - 1.0);
}

ScalingRule make_scaling_rule(double h_star_value) {
  ScalingRule rule;
  rule.h_star = h_star_value;
  if (std::abs(h_star_value - 0.5) < 1e-12)
    rule.regime = ScalingRegime::kBorderline;
  else if (h_star_value < 0.5)
    rule.regime = ScalingRegime::kWiener;
  else
    rule.regime = ScalingRegime::kHermite;
  return rule;
}

GateResult assumption_gate(const std::vector<HermiteProfile>& profiles,
                           const std::vector<double>& p,
                           const HurstParameter& h, std::size_t n_split) {
  const std::size_t n_ch = profiles.size();
  if (p.size() != n_ch || n_split > n_ch)
    throw std::invalid_argument("assumption_gate: inconsistent channel counts");
  for (std::size_t k = 0; k < n_ch; ++k)
    if (profiles[k].rank < 1)
      throw RankZero("assumption_gate: channel " + std::to_string(k));
  for (std::size_t k = 1; k < n_ch; ++k)
    if (profiles[k].rank > profiles[k - 1].rank)
      throw OrderingViolation("assumption_gate: ranks must be non-increasing");
  for (std::size_t k = 0; k < n_ch; ++k)
    if (!(p[k] > 2.0))
      return {false, "p_k > 2 (channel " + std::to_string(k) + ")"};

  double min_wiener = 1e300, min_hermite = 1e300;
  for (std::size_t k = 0; k < n_split; ++k) {
    const double v = 0.5 - 1.0 / p[k];
    if (!(v > 1.0 / 3.0))
      return {false, "1/2 - 1/p_k > 1/3 (channel " + std::to_string(k) + ")"};
    min_wiener = std::min(min_wiener, v);
  }
  for (std::size_t k = n_split; k < n_ch; ++k) {
    const double v = h_star(profiles[k].rank, h) - 1.0 / p[k];
    if (!(v > 0.5))
      return {false, "H*(m_k) - 1/p_k > 1/2 (channel " + std::to_string(k) + ")"};
    min_hermite = std::min(min_hermite, v);
  }
  // Joint condition only binds when both blocks are populated.
  if (n_split > 0 && n_split < n_ch) {
    if (!(min_wiener + min_hermite > 1.0))
      return {false, "min(1/2 - 1/p_k) + min(H*(m_k) - 1/p_k) > 1"};
  }
  return {true, ""};
}

}  // namespace fraclab::hermite
