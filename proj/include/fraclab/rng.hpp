#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fraclab {

// Counter-based RNG (Philox-4x32-10).  A stream is a pure function of
// (seed, stream id); paths drawn from distinct streams are independent and
// reproducible regardless of scheduling, which is what makes ensemble
// sampling embarrassingly parallel and bit-stable.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    ctr_[0] = 0;
    ctr_[1] = 0;
    ctr_[2] = static_cast<std::uint32_t>(stream);
    ctr_[3] = static_cast<std::uint32_t>(stream >> 32);
  }

  // Substream helper: salts the stream id so one path can own several
  // independent streams (driver noise, burn-in, diagnostics, ...).
  RngStream(std::uint64_t seed, std::uint64_t path, std::uint32_t purpose)
      : RngStream(seed, path ^ (static_cast<std::uint64_t>(purpose) << 56)) {}

  std::uint32_t next_u32() {
    if (avail_ == 0) refill();
    return block_[--avail_];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform in (0,1), 53-bit resolution, never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  // Standard normal via Box-Muller (deterministic draw count).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  void fill_normals(double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = normal();
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static void round(std::uint32_t x[4], std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * x[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * x[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t y0 = hi1 ^ x[1] ^ k0;
    const std::uint32_t y2 = hi0 ^ x[3] ^ k1;
    x[0] = y0;
    x[1] = lo1;
    x[2] = y2;
    x[3] = lo0;
  }

  void refill() {
    std::uint32_t x[4] = {ctr_[0], ctr_[1], ctr_[2], ctr_[3]};
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int r = 0; r < 10; ++r) {
      round(x, k0, k1);
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    for (int i = 0; i < 4; ++i) block_[i] = x[i];
    avail_ = 4;
    if (++ctr_[0] == 0) ++ctr_[1];  // 64-bit block counter within the stream
  }

  std::uint32_t key_[2];
  std::uint32_t ctr_[4];
  std::uint32_t block_[4] = {};
  int avail_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Stream purposes (third RngStream constructor argument).
namespace rng_purpose {
inline constexpr std::uint32_t kDriver = 1;      // path driving noise
inline constexpr std::uint32_t kInitial = 2;     // initial conditions / states
inline constexpr std::uint32_t kLimit = 3;       // limit-law sampling
inline constexpr std::uint32_t kProjection = 4;  // sliced-distance directions
inline constexpr std::uint32_t kNested = 5;      // nested Monte Carlo resampling
inline constexpr std::uint32_t kPairs = 6;       // pair/triple schedules in norms
}  // namespace rng_purpose

}  // namespace fraclab
