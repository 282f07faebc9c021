// Command-line front end: sampling, lifting, and the verification
// experiments, all funnelled through the same config structure the `run`
// subcommand reads from a file.  Exit codes: 0 all verdicts pass, 1 a verdict
// failed, 2 configuration or runtime error.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fraclab/errors.hpp"
#include "fraclab/lab.hpp"
#include "fraclab/noise.hpp"
#include "fraclab/roughpath.hpp"
#include "fraclab/time_grid.hpp"

namespace {

using fraclab::lab::ExperimentConfig;
using fraclab::lab::ExperimentKind;

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::istringstream in(text);
  std::vector<double> out;
  double v = 0.0;
  while (in >> v) out.push_back(v);
  if (!in.eof() || out.empty())
    throw fraclab::ConfigInvalid(std::string(what) + ": expected numbers, got '" +
                                 text + "'");
  return out;
}

fraclab::lab::FieldSpec parse_field(const std::string& text) {
  std::istringstream in(text);
  fraclab::lab::FieldSpec spec;
  in >> spec.kind;
  double v = 0.0;
  while (in >> v) spec.params.push_back(v);
  if (spec.kind != "poly" && spec.kind != "matrix")
    throw fraclab::ConfigInvalid("field: kind must be poly or matrix, got '" +
                                 spec.kind + "'");
  return spec;
}

// shared scaffolding: every experiment subcommand edits one config
struct ConfigFlags {
  ExperimentConfig config;
  std::vector<std::string> observables;
  std::vector<std::string> fields;
  std::vector<std::string> rate_rows;
  std::string state_values;
  std::string noise_kind = "fou";

  void attach(CLI::App* cmd, bool with_fields) {
    cmd->add_option("--seed", config.seed, "RNG seed (required)")
        ->required()
        ->each([this](const std::string&) { config.has_seed = true; });
    cmd->add_option("--paths", config.n_paths, "Monte Carlo ensemble size");
    cmd->add_option("--eps", config.epsilons,
                    "scale schedule, strictly decreasing");
    cmd->add_option("--out", config.out_dir, "output directory for artifacts");
    cmd->add_option("--hurst", config.noise.h, "Hurst parameter of the fast noise");
    cmd->add_option("--fast-step", config.noise.fast_step,
                    "fast-clock grid step");
    cmd->add_option("--noise", noise_kind, "fast noise kind: fou or markov");
    cmd->add_option("--rate-row", rate_rows,
                    "one generator row per flag (markov noise)");
    cmd->add_option("--values", state_values, "state values (markov noise)");
    cmd->add_option("--observable", observables,
                    "Hermite coefficients 'c0 c1 ...', one channel per flag");
    cmd->add_option("--tmax", config.t_max, "slow-time horizon");
    cmd->add_option("--times", config.times, "test times within [0, tmax]");
    cmd->add_option("--p", config.p_moment, "moment order p");
    cmd->add_option("--significance", config.significance,
                    "KS significance level");
    cmd->add_option("--w1-tol", config.w1_tol, "Wasserstein-1 tolerance");
    cmd->add_option("--exponent-tol", config.exponent_tol,
                    "first-order exponent tolerance");
    if (with_fields) {
      cmd->add_option("--field", fields,
                      "driving field 'poly c0 c1 ...' or 'matrix ...', one per "
                      "channel");
      cmd->add_option("--x0", config.x0, "initial state");
      cmd->add_option("--split", config.n_split,
                      "Wiener/Hermite channel split (-1 = automatic)");
    }
  }

  ExperimentConfig finish(ExperimentKind kind) {
    config.kind = kind;
    if (!observables.empty()) {
      config.observables.clear();
      for (const auto& o : observables)
        config.observables.push_back(parse_numbers(o, "observable"));
    }
    if (!fields.empty()) {
      config.fields.clear();
      for (const auto& f : fields) config.fields.push_back(parse_field(f));
    }
    if (noise_kind == "markov") {
      config.noise.kind = fraclab::EnsembleKind::kMarkovChain;
      config.noise.rate_matrix.clear();
      for (const auto& r : rate_rows)
        config.noise.rate_matrix.push_back(parse_numbers(r, "rate_matrix"));
      if (!state_values.empty())
        config.noise.state_values = parse_numbers(state_values, "state_values");
    } else if (noise_kind != "fou") {
      throw fraclab::ConfigInvalid("noise: unknown kind '" + noise_kind + "'");
    }
    fraclab::lab::validate_config(config);
    return config;
  }
};

int do_simulate(const std::string& kind, double h, double step,
                std::size_t count, std::size_t paths, std::uint64_t seed,
                const std::vector<std::string>& rate_rows,
                const std::string& values, const std::string& out) {
  const fraclab::TimeGrid grid(step, count);
  auto ens = [&] {
    if (kind == "fbm")
      return fraclab::noise::sample_fbm(grid, fraclab::HurstParameter(h), paths,
                                        seed);
    if (kind == "fou")
      return fraclab::noise::sample_fou(
          grid, fraclab::HurstParameter(h), paths, seed,
          count <= 4096 ? fraclab::noise::FouMethod::kExactCovariance
                        : fraclab::noise::FouMethod::kEulerBurnin);
    if (kind == "markov") {
      std::vector<std::vector<double>> rates;
      for (const auto& r : rate_rows)
        rates.push_back(parse_numbers(r, "rate_matrix"));
      return fraclab::noise::sample_markov_chain(
          grid, rates, parse_numbers(values, "state_values"), paths, seed);
    }
    throw fraclab::ConfigInvalid("simulate: unknown kind '" + kind + "'");
  }();
  std::filesystem::create_directories(out);
  const auto bin = out + "/ensemble.bin";
  const auto csv = out + "/ensemble.csv";
  ens.save(bin);
  ens.export_csv(csv);
  std::cout << "wrote " << bin << " (" << paths << " paths x " << count
            << " nodes)\nwrote " << csv << "\n";
  return 0;
}

int do_lift(double h, double eps, double fast_step, double t_max,
            std::size_t paths, std::uint64_t seed,
            const std::vector<std::string>& observables,
            const std::string& out) {
  std::vector<fraclab::hermite::HermiteProfile> profiles;
  for (const auto& o : observables) {
    fraclab::hermite::HermiteProfile p;
    p.coeffs = parse_numbers(o, "observable");
    p.l_max = static_cast<int>(p.coeffs.size()) - 1;
    for (std::size_t l = 0; l < p.coeffs.size(); ++l)
      if (p.coeffs[l] != 0.0) {
        p.rank = static_cast<int>(l);
        break;
      }
    profiles.push_back(std::move(p));
  }
  if (profiles.empty())
    throw fraclab::ConfigInvalid("observable: at least one channel required");

  const double slow_step = eps * fast_step;
  const auto cells =
      static_cast<std::size_t>(std::floor(t_max / slow_step + 1e-9));
  const fraclab::TimeGrid grid(fast_step, cells + 1);
  const auto ens = fraclab::noise::sample_fou(
      grid, fraclab::HurstParameter(h), paths, seed,
      grid.count() <= 4096 ? fraclab::noise::FouMethod::kExactCovariance
                           : fraclab::noise::FouMethod::kEulerBurnin);
  std::vector<double> alphas;
  for (const auto& p : profiles)
    alphas.push_back(fraclab::hermite::scaling_alpha(
        eps, fraclab::hermite::h_star(std::max(1, p.rank),
                                      fraclab::HurstParameter(h))));
  const auto lifts =
      fraclab::rough::scaled_functional_lift(ens, profiles, eps, alphas, t_max);
  std::filesystem::create_directories(out);
  for (std::size_t p = 0; p < lifts.size(); ++p) {
    const auto name = out + "/lift_" + std::to_string(p) + ".bin";
    lifts[p].save(name);
  }
  std::cout << "wrote " << lifts.size() << " lifts under " << out << " ("
            << grid.count() << " fast nodes, slow step " << slow_step << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slow/fast homogenisation laboratory"};
  app.require_subcommand(1);

  // --- simulate ------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "sample a stationary ensemble");
  std::string sim_kind = "fou", sim_values, sim_out = ".";
  std::vector<std::string> sim_rates;
  double sim_h = 0.7, sim_step = 0.25;
  std::size_t sim_count = 1024, sim_paths = 16;
  std::uint64_t sim_seed = 0;
  sim->add_option("--kind", sim_kind, "fbm, fou, or markov");
  sim->add_option("--hurst", sim_h, "Hurst parameter");
  sim->add_option("--step", sim_step, "grid step");
  sim->add_option("--count", sim_count, "grid nodes");
  sim->add_option("--paths", sim_paths, "number of paths");
  sim->add_option("--seed", sim_seed, "RNG seed")->required();
  sim->add_option("--rate-row", sim_rates, "generator row (markov)");
  sim->add_option("--values", sim_values, "state values (markov)");
  sim->add_option("--out", sim_out, "output directory");

  // --- lift ----------------------------------------------------------------
  auto* lift = app.add_subcommand("lift", "scaled functional lifts of fOU");
  double lift_h = 0.7, lift_eps = 1e-2, lift_step = 0.25, lift_tmax = 1.0;
  std::size_t lift_paths = 4;
  std::uint64_t lift_seed = 0;
  std::vector<std::string> lift_obs;
  std::string lift_out = ".";
  lift->add_option("--hurst", lift_h, "Hurst parameter");
  lift->add_option("--eps", lift_eps, "scale parameter");
  lift->add_option("--fast-step", lift_step, "fast grid step");
  lift->add_option("--tmax", lift_tmax, "slow horizon");
  lift->add_option("--paths", lift_paths, "number of paths");
  lift->add_option("--seed", lift_seed, "RNG seed")->required();
  lift->add_option("--observable", lift_obs, "channel 'c0 c1 ...'")->required();
  lift->add_option("--out", lift_out, "output directory");

  // --- experiments ---------------------------------------------------------
  ConfigFlags clt, cov, mom, herm, hom, dec;
  clt.attach(app.add_subcommand("verify-clt", "Wiener-limit law at fixed times"),
             false);
  cov.attach(app.add_subcommand("verify-cov", "limit covariance grid"), false);
  mom.attach(app.add_subcommand("verify-moments", "rough moment exponents"),
             false);
  herm.attach(app.add_subcommand("verify-hermite",
                                 "Hermite-regime self-similarity"),
              false);
  hom.attach(app.add_subcommand("homogenize", "slow-flow law vs the limit RDE"),
             true);
  auto* dec_cmd = app.add_subcommand("decomp", "martingale decomposition residual");
  dec.attach(dec_cmd, false);
  dec_cmd->add_option("--chain-step", dec.config.chain_step, "chain grid step");
  dec_cmd->add_option("--chain-memory", dec.config.chain_memory,
                      "chain kernel memory");

  // --- run -----------------------------------------------------------------
  auto* runner = app.add_subcommand("run", "run an experiment config file");
  std::string config_file;
  runner->add_option("config", config_file, "key = value config file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed())
      return do_simulate(sim_kind, sim_h, sim_step, sim_count, sim_paths,
                         sim_seed, sim_rates, sim_values, sim_out);
    if (lift->parsed())
      return do_lift(lift_h, lift_eps, lift_step, lift_tmax, lift_paths,
                     lift_seed, lift_obs, lift_out);
    if (app.get_subcommand("verify-clt")->parsed())
      return fraclab::lab::run(clt.finish(ExperimentKind::kClt));
    if (app.get_subcommand("verify-cov")->parsed())
      return fraclab::lab::run(cov.finish(ExperimentKind::kCovariance));
    if (app.get_subcommand("verify-moments")->parsed())
      return fraclab::lab::run(mom.finish(ExperimentKind::kMomentFit));
    if (app.get_subcommand("verify-hermite")->parsed())
      return fraclab::lab::run(herm.finish(ExperimentKind::kHermiteRegime));
    if (app.get_subcommand("homogenize")->parsed())
      return fraclab::lab::run(hom.finish(
          hom.config.x0.size() > 1 ? ExperimentKind::kHomogenizeNd
                                   : ExperimentKind::kHomogenize1d));
    if (dec_cmd->parsed())
      return fraclab::lab::run(dec.finish(ExperimentKind::kDecompResidual));
    if (runner->parsed()) return fraclab::lab::run(config_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
