#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace fraclab::stats {

double mean(const std::vector<double>& x);
double variance(const std::vector<double>& x);  // unbiased
double skewness(const std::vector<double>& x);
double quantile_sorted(const std::vector<double>& sorted, double p);

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);  // Wichura AS241

struct KsResult {
  double statistic = 0.0;  // sup |F_n - F|
  double p_value = 0.0;    // asymptotic, finite-n corrected
  std::size_t n = 0;
};

// One-sample Kolmogorov-Smirnov against an arbitrary continuous CDF.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);
KsResult ks_test_standard_normal(std::vector<double> sample);
double kolmogorov_q(double lambda);  // tail probability of sup|Brownian bridge|

// Exact 1-D Wasserstein-1 between empirical laws (quantile coupling; sizes
// may differ).  Two equal samples give 0; shifting one by c gives |c|.
double wasserstein1(std::vector<double> a, std::vector<double> b);

// Exact 1-D Wasserstein-1 between an empirical law and a closed-form law.
double wasserstein1_vs_normal(std::vector<double> sample, double mu, double sigma);
double wasserstein1_vs_lognormal(std::vector<double> sample, double mu, double sigma);

// Sliced Wasserstein-1 for d >= 2: average of 1-D distances over seeded unit
// projections plus the coordinate axes.  Rows of a and b are points in R^d.
double sliced_wasserstein1(const std::vector<std::vector<double>>& a,
                           const std::vector<std::vector<double>>& b,
                           std::uint64_t seed, int n_projections = 64);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_ci95 = 0.0;  // half-width
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);
LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace fraclab::stats
