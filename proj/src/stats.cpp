#include "fraclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fraclab/rng.hpp"

namespace fraclab::stats {

double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double skewness(const std::vector<double>& x) {
  const double m = mean(x);
  double s2 = 0.0, s3 = 0.0;
  for (double v : x) {
    const double d = v - m;
    s2 += d * d;
    s3 += d * d * d;
  }
  const double n = static_cast<double>(x.size());
  s2 /= n;
  s3 /= n;
  return s3 / std::pow(s2, 1.5);
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("quantile of empty sample");
  const double pos = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= n) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  // Wichura's algorithm AS241 (PPND16).
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p outside (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const std::size_t n = sample.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  const double sq = std::sqrt(static_cast<double>(n));
  // Stephens' finite-sample correction before the asymptotic tail.
  const double lambda = d * (sq + 0.12 + 0.11 / sq);
  return {d, kolmogorov_q(lambda), n};
}

KsResult ks_test_standard_normal(std::vector<double> sample) {
  return ks_test(std::move(sample), [](double x) { return normal_cdf(x); });
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // Quantile coupling over the merged breakpoints of both empirical CDFs.
  const std::size_t n = a.size(), m = b.size();
  double s = 0.0, u = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    const double ua = static_cast<double>(i + 1) / n;
    const double ub = static_cast<double>(j + 1) / m;
    const double next = std::min(ua, ub);
    s += (next - u) * std::abs(a[i] - b[j]);
    u = next;
    if (ua <= next) ++i;
    if (ub <= next) ++j;
  }
  return s;
}

double wasserstein1_vs_normal(std::vector<double> sample, double mu, double sigma) {
  std::sort(sample.begin(), sample.end());
  // W1 = int |F_n - F| dx.  A(x) = int_{-inf}^x F is closed-form; each
  // inter-order-statistic piece splits where F crosses the step level i/n,
  // and the tails use A(x_(1)) and  int_c^inf (1-F) = mu - c + A(c).
  auto anti = [=](double x) {
    const double u = (x - mu) / sigma;
    return (x - mu) * normal_cdf(u) + sigma * normal_pdf(u);
  };
  auto quant = [=](double p) { return mu + sigma * normal_quantile(p); };
  const std::size_t n = sample.size();
  double total = anti(sample.front());
  for (std::size_t i = 1; i < n; ++i) {
    const double p = static_cast<double>(i) / n;
    const double a = sample[i - 1], b = sample[i];
    if (a >= b) continue;
    const double xc = std::clamp(quant(p), a, b);
    total += p * (xc - a) - (anti(xc) - anti(a));
    total += (anti(b) - anti(xc)) - p * (b - xc);
  }
  total += mu - sample.back() + anti(sample.back());
  return total;
}

double wasserstein1_vs_lognormal(std::vector<double> sample, double mu, double sigma) {
  std::sort(sample.begin(), sample.end());
  if (sample.front() <= 0.0)
    throw std::invalid_argument("wasserstein1_vs_lognormal: nonpositive sample");
  const double m1 = std::exp(mu + 0.5 * sigma * sigma);
  auto anti = [=](double x) {
    const double u = (std::log(x) - mu) / sigma;
    return x * normal_cdf(u) - m1 * normal_cdf(u - sigma);
  };
  auto quant = [=](double p) { return std::exp(mu + sigma * normal_quantile(p)); };
  const std::size_t n = sample.size();
  double total = anti(sample.front());
  for (std::size_t i = 1; i < n; ++i) {
    const double p = static_cast<double>(i) / n;
    const double a = sample[i - 1], b = sample[i];
    if (a >= b) continue;
    const double xc = std::clamp(quant(p), a, b);
    total += p * (xc - a) - (anti(xc) - anti(a));
    total += (anti(b) - anti(xc)) - p * (b - xc);
  }
  total += m1 - sample.back() + anti(sample.back());
  return total;
}

double sliced_wasserstein1(const std::vector<std::vector<double>>& a,
                           const std::vector<std::vector<double>>& b,
                           std::uint64_t seed, int n_projections) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("sliced_wasserstein1: empty sample");
  const std::size_t d = a.front().size();
  RngStream rng(seed, 0, rng_purpose::kProjection);
  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < d; ++k) {  // coordinate axes first
    std::vector<double> e(d, 0.0);
    e[k] = 1.0;
    dirs.push_back(e);
  }
  for (int k = 0; k < n_projections; ++k) {
    std::vector<double> v(d);
    double norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    dirs.push_back(v);
  }
  double acc = 0.0;
  std::vector<double> pa(a.size()), pb(b.size());
  for (const auto& v : dirs) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += v[k] * a[i][k];
      pa[i] = s;
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += v[k] * b[i][k];
      pb[i] = s;
    }
    acc += wasserstein1(pa, pb);
  }
  return acc / static_cast<double>(dirs.size());
}

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 3)
    throw std::invalid_argument("least_squares: need >= 3 points");
  double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  fit.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  // two-sided 97.5% Student-t quantiles for small residual dof
  static constexpr double kT[] = {0,    12.71, 4.303, 3.182, 2.776, 2.571,
                                  2.447, 2.365, 2.306, 2.262, 2.228};
  const std::size_t dof = n - 2;
  const double t = dof < 11 ? kT[dof] : (dof < 30 ? 2.05 : 1.96);
  fit.slope_ci95 = t * fit.slope_stderr;
  return fit;
}

LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0)
      throw std::invalid_argument("loglog_fit: nonpositive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return least_squares(lx, ly);
}

}  // namespace fraclab::stats
