#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fraclab/ensemble.hpp"

namespace testutil {

// time-averaged stationary autocorrelation at integer lag, pooled over paths
inline double lag_correlation(const fraclab::StationaryEnsemble& ens,
                              std::size_t lag) {
  const std::size_t n = ens.grid().count();
  double num = 0.0, den = 0.0;
  std::size_t n_num = 0, n_den = 0;
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    for (std::size_t i = 0; i + lag < n; ++i) {
      num += ens.at(p, i) * ens.at(p, i + lag);
      ++n_num;
    }
    for (std::size_t i = 0; i < n; ++i) {
      den += ens.at(p, i) * ens.at(p, i);
      ++n_den;
    }
  }
  return (num / static_cast<double>(n_num)) / (den / static_cast<double>(n_den));
}

// crude standard error for the pooled lag-correlation estimate: treats paths
// as independent replicas (they are) and uses the cross-path spread
inline double lag_correlation_se(const fraclab::StationaryEnsemble& ens,
                                 std::size_t lag) {
  const std::size_t n = ens.grid().count();
  std::vector<double> per_path;
  per_path.reserve(ens.n_paths());
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) num += ens.at(p, i) * ens.at(p, i + lag);
    for (std::size_t i = 0; i < n; ++i) den += ens.at(p, i) * ens.at(p, i);
    if (den > 0.0) per_path.push_back(num / den * static_cast<double>(n) /
                                      static_cast<double>(n - lag));
  }
  double m = 0.0;
  for (double v : per_path) m += v;
  m /= static_cast<double>(per_path.size());
  double s2 = 0.0;
  for (double v : per_path) s2 += (v - m) * (v - m);
  s2 /= static_cast<double>(per_path.size() - 1);
  return std::sqrt(s2 / static_cast<double>(per_path.size()));
}

}  // namespace testutil
