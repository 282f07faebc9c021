#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace fraclab::fft {

// Unnormalized in-place transforms, n a power of two.  Thread-safe: plans are
// cached per size behind a mutex, execution is re-entrant.
void forward(std::complex<double>* data, std::size_t n);
void inverse(std::complex<double>* data, std::size_t n);  // caller divides by n

std::size_t next_pow2(std::size_t n);

// Causal moving average y_i = sum_{m=0}^{M-1} kernel[m] * w[i + M - 1 - m]
// for i in [0, count), where w holds M-1 pre-history samples followed by
// count live samples (w.size() == count + M - 1).
std::vector<double> causal_convolve(const std::vector<double>& kernel,
                                    const std::vector<double>& w,
                                    std::size_t count);

}  // namespace fraclab::fft
