#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace fraclab {

// Hurst parameter in (0,1).  h = 1/2 is the classical (Markovian) case and is
// excluded from some of the fractional machinery, so we flag it explicitly.
class HurstParameter {
 public:
  explicit HurstParameter(double h) : h_(h) {
    if (!(h > 0.0 && h < 1.0))
      throw std::invalid_argument("HurstParameter: h must lie in (0,1)");
  }

  double value() const { return h_; }
  bool is_half() const { return std::abs(h_ - 0.5) < 1e-12; }

 private:
  double h_;
};

// Uniform grid t_i = i*step, i = 0..count-1.  Origin is always 0.
class TimeGrid {
 public:
  TimeGrid(double step, std::size_t count) : step_(step), count_(count) {
    if (!(step > 0.0)) throw std::invalid_argument("TimeGrid: step must be > 0");
    if (count < 2) throw std::invalid_argument("TimeGrid: count must be >= 2");
  }

  double step() const { return step_; }
  std::size_t count() const { return count_; }
  double time(std::size_t i) const { return static_cast<double>(i) * step_; }
  double horizon() const { return time(count_ - 1); }

  bool operator==(const TimeGrid& o) const {
    return step_ == o.step_ && count_ == o.count_;
  }

 private:
  double step_;
  std::size_t count_;
};

}  // namespace fraclab
