#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fraclab/errors.hpp"
#include "fraclab/noise.hpp"
#include "fraclab/parallel.hpp"
#include "fraclab/rng.hpp"

namespace fraclab::noise {

namespace {

void validate_generator(const std::vector<std::vector<double>>& q) {
  const std::size_t n = q.size();
  if (n < 2) throw InvalidGenerator("need at least two states");
  double scale = 0.0;
  for (const auto& row : q) {
    if (row.size() != n) throw InvalidGenerator("matrix not square");
    for (const double v : row) scale = std::max(scale, std::abs(v));
  }
  if (scale == 0.0) throw InvalidGenerator("zero matrix");
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && q[i][j] < 0.0)
        throw InvalidGenerator("negative off-diagonal rate");
      sum += q[i][j];
    }
    if (std::abs(sum) > 1e-12 * scale * static_cast<double>(n))
      throw InvalidGenerator("row does not sum to zero");
  }
}

// strong connectivity of the positive-rate digraph
void check_irreducible(const std::vector<std::vector<double>>& q) {
  const std::size_t n = q.size();
  const auto reach = [&](bool transpose) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < n; ++j) {
        const double rate = transpose ? q[j][i] : q[i][j];
        if (i != j && rate > 0.0 && !seen[j]) {
          seen[j] = true;
          stack.push_back(j);
        }
      }
    }
    for (const bool s : seen)
      if (!s) return false;
    return true;
  };
  if (!reach(false) || !reach(true))
    throw NotIrreducible("positive-rate graph is not strongly connected");
}

}  // namespace

std::vector<double> markov_stationary_distribution(
    const std::vector<std::vector<double>>& rate_matrix) {
  validate_generator(rate_matrix);
  check_irreducible(rate_matrix);
  const std::size_t n = rate_matrix.size();
  // pi Q = 0 with sum(pi) = 1: overdetermined least squares on [Q^T; 1^T]
  Eigen::MatrixXd a(n + 1, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n + 1));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rate_matrix[j][i];
  for (std::size_t j = 0; j < n; ++j)
    a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = 1.0;
  b(static_cast<Eigen::Index>(n)) = 1.0;
  const Eigen::VectorXd pi = a.colPivHouseholderQr().solve(b);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = pi(static_cast<Eigen::Index>(j));
    if (out[j] < -1e-10) throw NotIrreducible("stationary solve went negative");
    out[j] = std::max(out[j], 0.0);
  }
  return out;
}

StationaryEnsemble sample_markov_chain(const TimeGrid& grid,
                                       const std::vector<std::vector<double>>& rate_matrix,
                                       const std::vector<double>& state_values,
                                       std::size_t n_paths, std::uint64_t seed,
                                       bool recentre) {
  const auto pi = markov_stationary_distribution(rate_matrix);
  const std::size_t n_states = rate_matrix.size();
  if (state_values.size() != n_states)
    throw std::invalid_argument("sample_markov_chain: state_values size mismatch");
  if (n_paths < 1) throw std::invalid_argument("sample_markov_chain: n_paths < 1");

  std::vector<double> values_centred(state_values);
  if (recentre) {
    double m = 0.0;
    for (std::size_t s = 0; s < n_states; ++s) m += pi[s] * state_values[s];
    for (auto& v : values_centred) v -= m;
  }

  const std::size_t n = grid.count();
  std::vector<double> out(n_paths * n);
  parallel_for(n_paths, [&](std::size_t p) {
    RngStream init(seed, p, rng_purpose::kInitial);
    RngStream rng(seed, p, rng_purpose::kDriver);

    std::size_t state = n_states - 1;
    const double u0 = init.uniform();
    double acc = 0.0;
    for (std::size_t s = 0; s < n_states; ++s) {
      acc += pi[s];
      if (u0 <= acc) {
        state = s;
        break;
      }
    }

    double t = 0.0;  // time of the next jump
    double rate = -rate_matrix[state][state];
    t += (rate > 0.0) ? -std::log(rng.uniform()) / rate : 1e300;
    for (std::size_t i = 0; i < n; ++i) {
      const double ti = grid.time(i);
      while (t <= ti) {
        // jump: choose the target proportionally to the off-diagonal rates
        const double u = rng.uniform() * rate;
        double a = 0.0;
        std::size_t next = state;
        for (std::size_t j = 0; j < n_states; ++j) {
          if (j == state) continue;
          a += rate_matrix[state][j];
          if (u <= a) {
            next = j;
            break;
          }
        }
        state = next;
        rate = -rate_matrix[state][state];
        t += (rate > 0.0) ? -std::log(rng.uniform()) / rate : 1e300;
      }
      out[p * n + i] = values_centred[state];
    }
  });
  return StationaryEnsemble(grid, std::move(out), n_paths,
                            EnsembleKind::kMarkovChain, std::nullopt,
                            /*normalized=*/false, seed);
}

}  // namespace fraclab::noise
