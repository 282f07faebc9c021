#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fraclab/errors.hpp"
#include "fraclab/fft.hpp"
#include "fraclab/noise.hpp"
#include "fraclab/parallel.hpp"
#include "fraclab/rng.hpp"

namespace fraclab::noise {

double fbm_covariance(double s, double t, const HurstParameter& h) {
  if (s < 0.0 || t < 0.0)
    throw std::invalid_argument("fbm_covariance: negative time");
  const double e = 2.0 * h.value();
  return 0.5 * (std::pow(s, e) + std::pow(t, e) - std::pow(std::abs(t - s), e));
}

double increment_correlation(double t, const HurstParameter& h) {
  if (t < 1.0) throw std::invalid_argument("increment_correlation: lag < 1");
  const double e = 2.0 * h.value();
  return 0.5 * std::pow(t + 1.0, e) + 0.5 * std::pow(t - 1.0, e) - std::pow(t, e);
}

namespace {

// autocovariance of unit-variance fGN at integer lag j
double fgn_autocov(std::size_t j, double h2) {
  if (j == 0) return 1.0;
  const double t = static_cast<double>(j);
  return 0.5 * std::pow(t + 1.0, h2) + 0.5 * std::pow(t - 1.0, h2) -
         std::pow(t, h2);
}

}  // namespace

FgnSampler::FgnSampler(double step, std::size_t count, const HurstParameter& h,
                       FgnRoute route)
    : count_(count), scale_(std::pow(step, h.value())) {
  if (count < 1) throw std::invalid_argument("FgnSampler: empty grid");
  const double h2 = 2.0 * h.value();

  if (route != FgnRoute::kDense) {
    // Circulant embedding: eigenvalues are the DFT of the autocovariance
    // extended symmetrically around the half point.
    m_ = std::max<std::size_t>(fft::next_pow2(2 * count), 8);
    std::vector<std::complex<double>> c(m_);
    for (std::size_t j = 0; j <= m_ / 2; ++j) c[j] = fgn_autocov(j, h2);
    for (std::size_t j = m_ / 2 + 1; j < m_; ++j) c[j] = c[m_ - j];
    fft::forward(c.data(), m_);
    double lambda_max = 0.0, lambda_min = 0.0;
    for (const auto& v : c) {
      lambda_max = std::max(lambda_max, v.real());
      lambda_min = std::min(lambda_min, v.real());
    }
    if (lambda_min >= -1e-9 * std::max(1.0, lambda_max)) {
      sqrt_lambda_.resize(m_);
      for (std::size_t j = 0; j < m_; ++j)
        sqrt_lambda_[j] = std::sqrt(std::max(c[j].real(), 0.0));
      return;
    }
    if (route == FgnRoute::kCirculant)
      throw EmbeddingNotPSD("circulant spectrum has negative entries");
  }

  if (count > 4096)
    throw EmbeddingNotPSD("dense fallback limited to count <= 4096");
  Eigen::MatrixXd cov(count, count);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = fgn_autocov(i - j, h2);
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw EmbeddingNotPSD("dense factorization failed");
  const Eigen::MatrixXd L = llt.matrixL();
  dense_factor_.resize(count * count);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < count; ++j)
      dense_factor_[i * count + j] =
          L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

std::vector<double> FgnSampler::sample_path(std::uint64_t seed,
                                            std::uint64_t path_index) const {
  RngStream rng(seed, path_index, rng_purpose::kDriver);
  std::vector<double> out(count_);

  if (!dense_factor_.empty()) {
    std::vector<double> z(count_);
    rng.fill_normals(z.data(), count_);
    for (std::size_t i = 0; i < count_; ++i) {
      double s = 0.0;
      const double* row = dense_factor_.data() + i * count_;
      for (std::size_t j = 0; j <= i; ++j) s += row[j] * z[j];
      out[i] = scale_ * s;
    }
    return out;
  }

  // X = F diag(sqrt(lambda)) eps / sqrt(m) with conjugate-symmetric complex
  // normals eps; the real part carries the target covariance.
  std::vector<std::complex<double>> spec(m_);
  spec[0] = sqrt_lambda_[0] * rng.normal();
  spec[m_ / 2] = sqrt_lambda_[m_ / 2] * rng.normal();
  const double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
  for (std::size_t j = 1; j < m_ / 2; ++j) {
    const double re = rng.normal() * inv_sqrt2;
    const double im = rng.normal() * inv_sqrt2;
    spec[j] = sqrt_lambda_[j] * std::complex<double>(re, im);
    spec[m_ - j] = std::conj(spec[j]);
  }
  fft::forward(spec.data(), m_);
  const double norm = 1.0 / std::sqrt(static_cast<double>(m_));
  for (std::size_t i = 0; i < count_; ++i)
    out[i] = scale_ * norm * spec[i].real();
  return out;
}

StationaryEnsemble sample_fbm(const TimeGrid& grid, const HurstParameter& h,
                              std::size_t n_paths, std::uint64_t seed) {
  if (n_paths < 1) throw std::invalid_argument("sample_fbm: n_paths < 1");
  const FgnSampler sampler(grid.step(), grid.count(), h);
  std::vector<double> values(n_paths * grid.count());
  parallel_for(n_paths, [&](std::size_t p) {
    const auto path = sampler.sample_path(seed, p);
    std::copy(path.begin(), path.end(), values.begin() + p * grid.count());
  });
  return StationaryEnsemble(grid, std::move(values), n_paths,
                            EnsembleKind::kFbmIncrements, h.value(),
                            /*normalized=*/false, seed);
}

}  // namespace fraclab::noise
