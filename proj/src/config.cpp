#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fraclab/errors.hpp"
#include "fraclab/lab.hpp"
#include "fraclab/time_grid.hpp"

namespace fraclab::lab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v))
      throw ConfigInvalid(key + ": not a finite number: '" + s + "'");
    return v;
  } catch (const ConfigInvalid&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigInvalid(key + ": not a number: '" + s + "'");
  }
}

std::vector<double> parse_doubles(const std::string& key, const std::string& s) {
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(key, tok));
  if (out.empty()) throw ConfigInvalid(key + ": empty value");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw ConfigInvalid(key + ": not an integer: '" + s + "'");
    return v;
  } catch (const ConfigInvalid&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigInvalid(key + ": not an integer: '" + s + "'");
  }
}

// rows separated by ';', entries by whitespace
std::vector<std::vector<double>> parse_rows(const std::string& key,
                                            const std::string& s) {
  std::vector<std::vector<double>> rows;
  std::string row;
  std::istringstream in(s);
  while (std::getline(in, row, ';')) rows.push_back(parse_doubles(key, trim(row)));
  return rows;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt(v[i]);
  }
  return out;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kClt: return "clt";
    case ExperimentKind::kCovariance: return "covariance";
    case ExperimentKind::kMomentFit: return "moment_fit";
    case ExperimentKind::kHermiteRegime: return "hermite_regime";
    case ExperimentKind::kHomogenize1d: return "homogenize_1d";
    case ExperimentKind::kHomogenizeNd: return "homogenize_nd";
    case ExperimentKind::kDecompResidual: return "decomp_residual";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (const auto kind :
       {ExperimentKind::kClt, ExperimentKind::kCovariance, ExperimentKind::kMomentFit,
        ExperimentKind::kHermiteRegime, ExperimentKind::kHomogenize1d,
        ExperimentKind::kHomogenizeNd, ExperimentKind::kDecompResidual})
    if (to_string(kind) == s) return kind;
  throw ConfigInvalid("experiment: unknown kind '" + s + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  bool saw_observable = false, saw_field = false, saw_eps = false;
  bool saw_times = false, saw_x0 = false;

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("line " + std::to_string(line_no) +
                          ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (val.empty()) throw ConfigInvalid(key + ": empty value");

    if (key == "experiment") {
      c.kind = experiment_kind_from_string(val);
    } else if (key == "noise.kind") {
      if (val == "fou") c.noise.kind = EnsembleKind::kFou;
      else if (val == "markov") c.noise.kind = EnsembleKind::kMarkovChain;
      else throw ConfigInvalid("noise.kind: expected fou or markov, got '" + val + "'");
    } else if (key == "noise.h") {
      c.noise.h = parse_double(key, val);
    } else if (key == "noise.fast_step") {
      c.noise.fast_step = parse_double(key, val);
    } else if (key == "noise.method") {
      if (val != "auto" && val != "exact" && val != "euler")
        throw ConfigInvalid("noise.method: expected auto, exact or euler");
      c.noise.method = val;
    } else if (key == "markov.rates") {
      c.noise.rate_matrix = parse_rows(key, val);
    } else if (key == "markov.values") {
      c.noise.state_values = parse_doubles(key, val);
    } else if (key == "observable") {
      if (!saw_observable) c.observables.clear();
      saw_observable = true;
      c.observables.push_back(parse_doubles(key, val));
    } else if (key == "epsilons") {
      if (saw_eps) throw ConfigInvalid("epsilons: given twice");
      saw_eps = true;
      c.epsilons = parse_doubles(key, val);
    } else if (key == "n_paths") {
      c.n_paths = static_cast<std::size_t>(parse_u64(key, val));
    } else if (key == "seed") {
      c.seed = parse_u64(key, val);
      c.has_seed = true;
    } else if (key == "t_max") {
      c.t_max = parse_double(key, val);
    } else if (key == "times") {
      if (saw_times) throw ConfigInvalid("times: given twice");
      saw_times = true;
      c.times = parse_doubles(key, val);
    } else if (key == "p_moment") {
      c.p_moment = parse_double(key, val);
    } else if (key == "significance") {
      c.significance = parse_double(key, val);
    } else if (key == "sigma_band") {
      c.sigma_band = parse_double(key, val);
    } else if (key == "exponent_tol") {
      c.exponent_tol = parse_double(key, val);
    } else if (key == "second_exponent_tol") {
      c.second_exponent_tol = parse_double(key, val);
    } else if (key == "w1_tol") {
      c.w1_tol = parse_double(key, val);
    } else if (key == "rde_tol") {
      c.rde_tol = parse_double(key, val);
    } else if (key == "field") {
      if (!saw_field) c.fields.clear();
      saw_field = true;
      std::istringstream fs(val);
      FieldSpec spec;
      fs >> spec.kind;
      std::string rest;
      std::getline(fs, rest);
      if (spec.kind != "poly" && spec.kind != "matrix")
        throw ConfigInvalid("field: expected 'poly c0 c1 ...' or 'matrix ...'");
      spec.params = parse_doubles(key, trim(rest));
      c.fields.push_back(std::move(spec));
    } else if (key == "x0") {
      saw_x0 = true;
      c.x0 = parse_doubles(key, val);
    } else if (key == "n_split") {
      if (val == "auto") c.n_split = -1;
      else c.n_split = static_cast<long>(parse_u64(key, val));
    } else if (key == "chain_step") {
      c.chain_step = parse_double(key, val);
    } else if (key == "chain_memory") {
      c.chain_memory = parse_double(key, val);
    } else if (key == "out_dir") {
      c.out_dir = val;
    } else {
      throw ConfigInvalid(key + ": unknown key");
    }
  }
  (void)saw_x0;
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& filename) {
  std::ifstream in(filename, std::ios::binary);
  if (!in) throw ConfigInvalid("config file: cannot open '" + filename + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate_config(const ExperimentConfig& c) {
  if (!c.has_seed) throw ConfigInvalid("seed: mandatory and missing");
  if (c.n_paths < 2) throw ConfigInvalid("n_paths: need at least 2");
  if (!(c.t_max > 0.0)) throw ConfigInvalid("t_max: must be positive");

  if (c.epsilons.empty()) throw ConfigInvalid("epsilons: empty schedule");
  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    if (!(c.epsilons[i] > 0.0)) throw ConfigInvalid("epsilons: must be positive");
    if (i > 0 && !(c.epsilons[i] < c.epsilons[i - 1]))
      throw ConfigInvalid("epsilons: schedule must be strictly decreasing");
  }

  const struct {
    const char* name;
    double value;
  } positives[] = {{"significance", c.significance}, {"sigma_band", c.sigma_band},
                   {"exponent_tol", c.exponent_tol},
                   {"second_exponent_tol", c.second_exponent_tol},
                   {"w1_tol", c.w1_tol},           {"rde_tol", c.rde_tol},
                   {"noise.fast_step", c.noise.fast_step},
                   {"chain_step", c.chain_step},   {"chain_memory", c.chain_memory}};
  for (const auto& p : positives)
    if (!(p.value > 0.0))
      throw ConfigInvalid(std::string(p.name) + ": must be positive");
  if (c.significance >= 1.0) throw ConfigInvalid("significance: must be below 1");
  if (!(c.p_moment > 2.0)) throw ConfigInvalid("p_moment: must exceed 2");

  if (c.times.empty()) throw ConfigInvalid("times: empty");
  for (const double t : c.times)
    if (!(t >= 0.0) || t > c.t_max + 1e-12)
      throw ConfigInvalid("times: entries must lie in [0, t_max]");

  if (c.observables.empty()) throw ConfigInvalid("observable: at least one channel");
  for (const auto& coeffs : c.observables) {
    if (coeffs.empty()) throw ConfigInvalid("observable: empty coefficient list");
    bool any = false;
    for (const double v : coeffs) {
      if (!std::isfinite(v)) throw ConfigInvalid("observable: non-finite coefficient");
      any = any || v != 0.0;
    }
    if (!any && c.kind != ExperimentKind::kMomentFit &&
        c.kind != ExperimentKind::kHomogenize1d &&
        c.kind != ExperimentKind::kHomogenizeNd)
      throw ConfigInvalid("observable: identically zero channel");
  }

  if (c.noise.kind == EnsembleKind::kFou) {
    if (!(c.noise.h > 0.0 && c.noise.h < 1.0))
      throw ConfigInvalid("noise.h: must lie in (0,1)");
  } else if (c.noise.kind == EnsembleKind::kMarkovChain) {
    const std::size_t n = c.noise.rate_matrix.size();
    if (n < 2) throw ConfigInvalid("markov.rates: need a generator with >= 2 states");
    for (const auto& row : c.noise.rate_matrix)
      if (row.size() != n) throw ConfigInvalid("markov.rates: matrix not square");
    if (c.noise.state_values.size() != n)
      throw ConfigInvalid("markov.values: need one value per state");
    // the lift evaluates observables pointwise on the centred state value;
    // only linear ones stay centred under the chain's stationary law
    for (const auto& coeffs : c.observables)
      for (std::size_t l = 0; l < coeffs.size(); ++l)
        if (l != 1 && coeffs[l] != 0.0)
          throw ConfigInvalid(
              "observable: Markov noise supports linear observables of the "
              "centred state value (coefficients beyond l=1 must vanish)");
  } else {
    throw ConfigInvalid("noise.kind: experiments accept fou or markov");
  }

  const bool homog = c.kind == ExperimentKind::kHomogenize1d ||
                     c.kind == ExperimentKind::kHomogenizeNd;
  if (homog) {
    if (c.noise.kind != EnsembleKind::kFou)
      throw ConfigInvalid("noise.kind: homogenisation experiments need fou noise");
    if (c.x0.empty()) throw ConfigInvalid("x0: empty");
    if (c.fields.size() != c.observables.size())
      throw ConfigInvalid("field: need exactly one field per observable");
    const std::size_t dim = c.x0.size();
    if (c.kind == ExperimentKind::kHomogenize1d && dim != 1)
      throw ConfigInvalid("x0: homogenize_1d is one-dimensional");
    if (c.kind == ExperimentKind::kHomogenizeNd && dim < 2)
      throw ConfigInvalid("x0: homogenize_nd needs dimension >= 2");
    for (const auto& f : c.fields) {
      if (c.kind == ExperimentKind::kHomogenize1d && f.kind != "poly")
        throw ConfigInvalid("field: homogenize_1d takes poly fields");
      if (f.kind == "matrix" && f.params.size() != dim * dim)
        throw ConfigInvalid("field: matrix needs dim*dim entries");
      if (c.kind == ExperimentKind::kHomogenizeNd && f.kind != "matrix")
        throw ConfigInvalid("field: homogenize_nd takes matrix fields");
    }
    if (c.n_split >= 0 && static_cast<std::size_t>(c.n_split) > c.observables.size())
      throw ConfigInvalid("n_split: exceeds the channel count");
  }

  if (c.kind == ExperimentKind::kHermiteRegime) {
    if (c.observables.size() != 1)
      throw ConfigInvalid("observable: hermite_regime takes a single channel");
    if (c.noise.kind != EnsembleKind::kFou)
      throw ConfigInvalid("noise.kind: hermite_regime needs fou noise");
  }
  if (c.kind == ExperimentKind::kDecompResidual) {
    if (c.observables.size() != 2)
      throw ConfigInvalid("observable: decomp_residual takes exactly two channels");
    if (c.noise.kind != EnsembleKind::kFou)
      throw ConfigInvalid("noise.kind: decomp_residual needs fou noise");
  }
}

std::string ExperimentConfig::canonical_text() const {
  std::string out;
  const auto add = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  add("experiment", to_string(kind));
  add("noise.kind", noise.kind == EnsembleKind::kMarkovChain ? "markov" : "fou");
  if (noise.kind == EnsembleKind::kFou) {
    add("noise.h", fmt(noise.h));
    add("noise.method", noise.method);
  } else {
    std::string rows;
    for (std::size_t i = 0; i < noise.rate_matrix.size(); ++i) {
      if (i) rows += " ; ";
      rows += fmt(noise.rate_matrix[i]);
    }
    add("markov.rates", rows);
    add("markov.values", fmt(noise.state_values));
  }
  add("noise.fast_step", fmt(noise.fast_step));
  for (const auto& coeffs : observables) add("observable", fmt(coeffs));
  add("epsilons", fmt(epsilons));
  add("n_paths", std::to_string(n_paths));
  add("seed", std::to_string(seed));
  add("t_max", fmt(t_max));
  add("times", fmt(times));
  add("p_moment", fmt(p_moment));
  add("significance", fmt(significance));
  add("sigma_band", fmt(sigma_band));
  add("exponent_tol", fmt(exponent_tol));
  add("second_exponent_tol", fmt(second_exponent_tol));
  add("w1_tol", fmt(w1_tol));
  add("rde_tol", fmt(rde_tol));
  for (const auto& f : fields) add("field", f.kind + " " + fmt(f.params));
  add("x0", fmt(x0));
  add("n_split", n_split < 0 ? "auto" : std::to_string(n_split));
  add("chain_step", fmt(chain_step));
  add("chain_memory", fmt(chain_memory));
  return out;
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const unsigned char ch : canonical_text()) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace fraclab::lab
