#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fraclab/time_grid.hpp"

namespace fraclab {

enum class EnsembleKind { kFbmIncrements, kFou, kMarkovChain };

std::string to_string(EnsembleKind kind);
EnsembleKind ensemble_kind_from_string(const std::string& s);

// A bundle of sampled paths of one stationary process on a shared grid.
// Immutable after construction; values are row-major (path-major).
class StationaryEnsemble {
 public:
  StationaryEnsemble(TimeGrid grid, std::vector<double> values,
                     std::size_t n_paths, EnsembleKind kind,
                     std::optional<double> h, bool normalized,
                     std::uint64_t seed);

  const TimeGrid& grid() const { return grid_; }
  std::size_t n_paths() const { return n_paths_; }
  EnsembleKind kind() const { return kind_; }
  std::optional<double> h() const { return h_; }
  bool normalized() const { return normalized_; }
  std::uint64_t seed() const { return seed_; }

  double at(std::size_t path, std::size_t i) const {
    return values_[path * grid_.count() + i];
  }
  const double* path(std::size_t p) const {
    return values_.data() + p * grid_.count();
  }
  const std::vector<double>& values() const { return values_; }

  // column i across all paths (for marginal statistics)
  std::vector<double> column(std::size_t i) const;

  void save(const std::string& filename) const;
  static StationaryEnsemble load(const std::string& filename);
  void export_csv(const std::string& filename, std::size_t max_paths = 64) const;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
  std::size_t n_paths_;
  EnsembleKind kind_;
  std::optional<double> h_;
  bool normalized_;
  std::uint64_t seed_;
};

// Variance split of a stationary unit-variance process at an anchor index:
// y_s = ybar_s + ytilde_s with ybar F_k-measurable and ytilde independent of
// F_k.  sigma_bar_sq[j] refers to s = t_{k+j}.
struct ConditionalSplit {
  std::size_t anchor = 0;
  std::vector<double> sigma_bar_sq;
  std::vector<double> sigma_tilde_sq;
};

}  // namespace fraclab
