#include "fraclab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace fraclab::fft {
namespace {

std::mutex plan_mutex;
std::map<std::pair<std::size_t, int>, fftw_plan> plan_cache;

fftw_plan plan_for(std::size_t n, int sign) {
  std::lock_guard<std::mutex> lock(plan_mutex);
  const auto key = std::make_pair(n, sign);
  auto it = plan_cache.find(key);
  if (it != plan_cache.end()) return it->second;
  // FFTW_UNALIGNED so the plan may execute on any caller buffer.
  std::vector<std::complex<double>> tmp(n);
  fftw_plan p = fftw_plan_dft_1d(
      static_cast<int>(n), reinterpret_cast<fftw_complex*>(tmp.data()),
      reinterpret_cast<fftw_complex*>(tmp.data()), sign,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (p == nullptr) throw std::runtime_error("fft: planning failed");
  plan_cache.emplace(key, p);
  return p;
}

void execute(std::complex<double>* data, std::size_t n, int sign) {
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft: size must be a power of two");
  fftw_plan p = plan_for(n, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data),
                   reinterpret_cast<fftw_complex*>(data));
}

}  // namespace

void forward(std::complex<double>* data, std::size_t n) {
  execute(data, n, FFTW_FORWARD);
}

void inverse(std::complex<double>* data, std::size_t n) {
  execute(data, n, FFTW_BACKWARD);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> causal_convolve(const std::vector<double>& kernel,
                                    const std::vector<double>& w,
                                    std::size_t count) {
  const std::size_t m = kernel.size();
  if (w.size() != count + m - 1)
    throw std::invalid_argument("causal_convolve: driver length mismatch");
  const std::size_t n = next_pow2(w.size() + m - 1);
  std::vector<std::complex<double>> a(n), b(n);
  for (std::size_t i = 0; i < w.size(); ++i) a[i] = w[i];
  for (std::size_t i = 0; i < m; ++i) b[i] = kernel[i];
  forward(a.data(), n);
  forward(b.data(), n);
  for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
  inverse(a.data(), n);
  std::vector<double> out(count);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = a[i + m - 1].real() * scale;
  return out;
}

}  // namespace fraclab::fft
