#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraclab/ensemble.hpp"

namespace fraclab::lab {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

enum class ExperimentKind {
  kClt,
  kCovariance,
  kMomentFit,
  kHermiteRegime,
  kHomogenize1d,
  kHomogenizeNd,
  kDecompResidual,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);  // ConfigInvalid

// Fast-noise source of an experiment: a stationary fOU ensemble (h, sampler
// method) or a continuous-time Markov chain (generator rows + state values).
struct NoiseSpec {
  EnsembleKind kind = EnsembleKind::kFou;
  double h = 0.7;
  double fast_step = 0.25;
  std::string method = "auto";  // auto | exact | euler
  std::vector<std::vector<double>> rate_matrix;
  std::vector<double> state_values;
};

// Driving field preset: "poly c0 c1 ..." in one dimension, or "matrix"
// with dim x dim row-major entries for a linear map.
struct FieldSpec {
  std::string kind;
  std::vector<double> params;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kClt;
  NoiseSpec noise;
  std::vector<std::vector<double>> observables;  // Hermite coefficients per channel
  std::vector<double> epsilons{1e-1, 1e-2, 1e-3};
  std::size_t n_paths = 10000;
  std::uint64_t seed = 0;
  bool has_seed = false;
  double t_max = 1.0;
  std::vector<double> times{0.25, 0.5, 1.0};
  double p_moment = 8.0;

  // pre-registered acceptance tolerances; every verdict cites the one it used
  double significance = 0.01;  // KS level, Bonferroni-divided across tests
  double sigma_band = 3.0;     // Monte Carlo bands, in units of standard error
  double exponent_tol = 0.05;
  double second_exponent_tol = 0.1;
  double w1_tol = 0.05;
  double rde_tol = 1e-3;  // refinement tolerance of the limit-law solves

  // homogenisation system
  std::vector<FieldSpec> fields;
  std::vector<double> x0{1.0};
  long n_split = -1;  // -1: every Wiener-regime channel (they must come first)

  // finite-memory chain behind decomp_residual
  double chain_step = 0.25;
  double chain_memory = 3.0;

  std::string out_dir = ".";

  // Effective values in a fixed key order; independent of the source file's
  // formatting, comments, and out_dir, so the hash identifies the experiment.
  std::string canonical_text() const;
  std::uint64_t hash() const;  // FNV-1a over canonical_text()
};

// `key = value` lines with '#' comments; `observable` and `field` repeat, one
// per channel.  Unknown keys, malformed values, and invariant violations all
// throw ConfigInvalid naming the offending field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& filename);
void validate_config(const ExperimentConfig& config);

struct Metric {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string comparison;  // "<" | "<=" | ">" | ">=" | "==" | "within" | "info"
  bool pass = true;
  std::string detail;  // states the tolerance the verdict was tested against

  nlohmann::json to_json() const;
};

// Column-oriented numbers destined for CSV / plot-data files.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(const std::string& filename) const;
};

struct ConvergenceReport {
  std::string experiment;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version = kLibraryVersion;
  std::vector<Metric> metrics;
  std::vector<Table> tables;
  std::vector<std::string> notices;
  nlohmann::json extra = nlohmann::json::object();  // experiment-shaped diagnostics

  bool pass() const;  // all verdict metrics pass ("info" rows don't vote)
  nlohmann::json to_json() const;
  // <dir>/report.json plus one CSV per table; returns the paths written
  std::vector<std::string> write_artifacts(const std::string& dir) const;
};

ConvergenceReport verify_clt(const ExperimentConfig& config);
ConvergenceReport verify_covariance(const ExperimentConfig& config);
ConvergenceReport verify_moments(const ExperimentConfig& config);
ConvergenceReport verify_hermite_regime(const ExperimentConfig& config);
ConvergenceReport homogenize(const ExperimentConfig& config);
ConvergenceReport decomp_residual(const ExperimentConfig& config);

ConvergenceReport run_experiment(const ExperimentConfig& config);

// Load + validate + run + write artifacts under the config's out_dir, with a
// one-line verdict summary per metric on stdout.  Returns 0 when every
// verdict passed, 1 otherwise; ConfigInvalid and runtime failures propagate
// to the caller.
int run(const ExperimentConfig& config);
int run(const std::string& config_file);

}  // namespace fraclab::lab
