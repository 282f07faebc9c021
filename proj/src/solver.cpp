#include "fraclab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fraclab/errors.hpp"
#include "fraclab/quadrature.hpp"
#include "fraclab/stats.hpp"

namespace fraclab::solve {

namespace {

constexpr char kMagic[8] = {'F', 'R', 'A', 'C', 'S', 'O', 'L', '1'};
constexpr double kJacStep = 1e-6;

double sup_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

[[noreturn]] void throw_blowup(double t, std::span<const double> x,
                               const char* scheme) {
  std::ostringstream msg;
  msg << scheme << ": state norm above " << kBlowupThreshold << " at t = " << t
      << ", state = (";
  for (std::size_t k = 0; k < x.size(); ++k)
    msg << (k ? ", " : "") << x[k];
  msg << ")";
  throw Blowup(msg.str());
}

// jacobian of one field at x, row-major dim x dim; central differences when
// no closed form was supplied
void eval_jacobian(const VectorField& field, std::vector<double>& x,
                   std::vector<double>& jac, std::vector<double>& fp,
                   std::vector<double>& fm) {
  const std::size_t dim = x.size();
  if (field.jacobian) {
    field.jacobian(x, jac);
    return;
  }
  for (std::size_t b = 0; b < dim; ++b) {
    const double saved = x[b];
    x[b] = saved + kJacStep;
    field.f(x, fp);
    x[b] = saved - kJacStep;
    field.f(x, fm);
    x[b] = saved;
    for (std::size_t a = 0; a < dim; ++a)
      jac[a * dim + b] = (fp[a] - fm[a]) / (2.0 * kJacStep);
  }
}

// node subsample 0, stride, 2*stride, ..., count-1
std::vector<std::size_t> node_schedule(std::size_t count, std::size_t stride) {
  std::vector<std::size_t> nodes;
  nodes.reserve((count - 1) / stride + 2);
  for (std::size_t i = 0; i + 1 < count; i += stride) nodes.push_back(i);
  nodes.push_back(count - 1);
  return nodes;
}

struct CascadeResult {
  std::vector<double> states;  // full-grid rows for stride 1
  StepStats stats;
};

// Shared refinement cascade: run `step_run` on dyadically finer node
// schedules down to the grid itself, watching the sup gap between
// consecutive refinements.  The driver data carries no information below its
// own grid, so the grid is the refinement floor; the final gap is reported.
// Adjacent gaps fluctuate for rough drivers (they shrink like 2^{1-3*alpha}
// only on average), so a stall is declared on the whole cascade: the last gap
// still above tol and not materially below the largest gap seen.
CascadeResult refine_to_grid(
    std::size_t count, std::size_t dim, double tol,
    const std::function<std::vector<double>(const std::vector<std::size_t>&)>& step_run) {
  std::size_t k_max = 0;
  while (((count - 1) >> (k_max + 1)) >= 8) ++k_max;

  std::vector<double> prev_states;
  std::vector<std::size_t> prev_nodes;
  double max_gap = 0.0;
  double last_gap = 0.0;
  StepStats stats;
  for (std::size_t k = k_max + 1; k-- > 0;) {
    const std::size_t stride = std::size_t{1} << k;
    const auto nodes = node_schedule(count, stride);
    auto states = step_run(nodes);
    if (!prev_states.empty()) {
      double diff = 0.0;
      // every coarse node appears in the finer schedule
      for (std::size_t c = 0, f = 0; c < prev_nodes.size(); ++c) {
        while (nodes[f] != prev_nodes[c]) ++f;
        for (std::size_t a = 0; a < dim; ++a)
          diff = std::max(diff, std::abs(states[f * dim + a] -
                                         prev_states[c * dim + a]));
      }
      if (k > 0) max_gap = std::max(max_gap, diff);
      last_gap = diff;
      stats.error_estimate = diff;
      ++stats.refinements;
    }
    prev_states = std::move(states);
    prev_nodes = nodes;
  }
  if (stats.refinements >= 2 && last_gap > tol && last_gap > 0.5 * max_gap)
    throw NoConvergence("refinement stalled at gap " + std::to_string(last_gap));
  return {std::move(prev_states), stats};
}

double empirical_holder_exponent(const TimeGrid& grid,
                                 const std::vector<double>& driver,
                                 std::size_t d) {
  const std::size_t count = grid.count();
  std::vector<double> lx, ly;
  for (std::size_t g = 1; g <= (count - 1) / 4; g *= 2) {
    double sup = 0.0;
    for (std::size_t i = 0; i + g < count; ++i) {
      double n2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double v = driver[(i + g) * d + k] - driver[i * d + k];
        n2 += v * v;
      }
      sup = std::max(sup, n2);
    }
    if (sup < 1e-300) continue;
    lx.push_back(std::log(static_cast<double>(g) * grid.step()));
    ly.push_back(0.5 * std::log(sup));
  }
  if (lx.size() < 2) return 1.0;  // constant driver: maximally regular
  return stats::least_squares(lx, ly).slope;
}

double signed_integral(const std::function<double(double)>& f, double a,
                       double b) {
  if (a == b) return 0.0;
  if (a < b) return integrate(f, a, b, 1e-14, 1e-12).value;
  return -integrate(f, b, a, 1e-14, 1e-12).value;
}

}  // namespace

VectorField make_field_1d(std::function<double(double)> f,
                          std::function<double(double)> df) {
  VectorField field;
  field.f = [f = std::move(f)](std::span<const double> x, std::span<double> out) {
    out[0] = f(x[0]);
  };
  if (df)
    field.jacobian = [df = std::move(df)](std::span<const double> x,
                                          std::span<double> out) {
      out[0] = df(x[0]);
    };
  return field;
}

SolutionPath::SolutionPath(TimeGrid grid, std::size_t dim,
                           std::vector<double> states, std::string scheme,
                           StepStats stats)
    : grid_(grid),
      dim_(dim),
      states_(std::move(states)),
      scheme_(std::move(scheme)),
      stats_(stats) {
  if (dim_ == 0) throw std::invalid_argument("SolutionPath: dim must be positive");
  if (states_.size() != grid_.count() * dim_)
    throw DimensionMismatch("SolutionPath: states size mismatch");
}

std::vector<double> SolutionPath::final_state() const {
  return {states_.end() - static_cast<std::ptrdiff_t>(dim_), states_.end()};
}

void SolutionPath::save(const std::string& filename) const {
  nlohmann::json header;
  header["grid"] = {{"step", grid_.step()}, {"count", grid_.count()}};
  header["dim"] = dim_;
  header["scheme"] = scheme_;
  header["stats"] = {{"max_step", stats_.max_step},
                     {"error_estimate", stats_.error_estimate},
                     {"refinements", stats_.refinements}};
  const std::string hs = header.dump();

  std::ofstream out(filename, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + filename);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.write(reinterpret_cast<const char*>(states_.data()),
            static_cast<std::streamsize>(states_.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + filename);
}

SolutionPath SolutionPath::load(const std::string& filename) {
  std::ifstream in(filename, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + filename);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a solution container: " + filename);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  const auto header = nlohmann::json::parse(hs);

  TimeGrid grid(header.at("grid").at("step").get<double>(),
                header.at("grid").at("count").get<std::size_t>());
  const auto dim = header.at("dim").get<std::size_t>();
  StepStats stats;
  stats.max_step = header.at("stats").at("max_step").get<double>();
  stats.error_estimate = header.at("stats").at("error_estimate").get<double>();
  stats.refinements = header.at("stats").at("refinements").get<std::size_t>();
  std::vector<double> states(grid.count() * dim);
  in.read(reinterpret_cast<char*>(states.data()),
          static_cast<std::streamsize>(states.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated solution container: " + filename);
  return SolutionPath(grid, dim, std::move(states),
                      header.at("scheme").get<std::string>(), stats);
}

void SolutionPath::export_csv(const std::string& filename) const {
  std::ofstream out(filename);
  if (!out) throw std::runtime_error("cannot open for writing: " + filename);
  out.precision(17);
  out << "t";
  for (std::size_t k = 0; k < dim_; ++k) out << ",x" << (k + 1);
  out << "\n";
  for (std::size_t i = 0; i < grid_.count(); ++i) {
    out << grid_.time(i);
    for (std::size_t k = 0; k < dim_; ++k) out << "," << at(i, k);
    out << "\n";
  }
}

SolutionPath solve_multiscale(const MultiscaleSystem& system, double epsilon,
                              const StationaryEnsemble& ensemble,
                              std::size_t path_index, double t_max) {
  const std::size_t dim = system.dim;
  const std::size_t d = system.fields.size();
  if (dim == 0 || system.x0.size() != dim)
    throw DimensionMismatch("solve_multiscale: x0 does not match dim");
  if (d == 0 || system.observables.size() != d)
    throw DimensionMismatch("solve_multiscale: one observable per field");
  if (system.n_split > d)
    throw std::invalid_argument("solve_multiscale: n_split beyond last channel");
  if (path_index >= ensemble.n_paths())
    throw std::invalid_argument("solve_multiscale: path index out of range");
  if (!(epsilon > 0.0 && t_max > 0.0))
    throw std::invalid_argument("solve_multiscale: need epsilon, t_max > 0");

  // alpha_k(eps) from H*(rank G_k); non-fractional noise runs every channel
  // at the CLT scaling
  std::vector<double> alphas(d);
  for (std::size_t k = 0; k < d; ++k) {
    // rank 0 only happens for the zero observable, whose channel contributes
    // nothing at any scaling; centred nonzero observables have rank >= 1
    const int m = std::max(1, system.observables[k].rank);
    // at the Markovian point the correlation decays exponentially, so every
    // rank is short-range and the borderline/Hermite branches of H* are moot
    const bool fractional =
        ensemble.h() && !HurstParameter(*ensemble.h()).is_half();
    const double hs =
        fractional ? hermite::h_star(m, HurstParameter(*ensemble.h())) : 0.0;
    alphas[k] = hermite::scaling_alpha(epsilon, hs);
  }

  const TimeGrid& fast = ensemble.grid();
  const double slow_cell = epsilon * fast.step();
  const std::size_t n_cells =
      static_cast<std::size_t>(std::floor(t_max / slow_cell + 1e-9));
  if (n_cells < 1 || n_cells + 1 > fast.count())
    throw HorizonTooShort("solve_multiscale: fast path shorter than t_max/epsilon");

  // fast samples of every observable; linear interpolation in between
  const double* y = ensemble.path(path_index);
  std::vector<std::vector<double>> g(d);
  for (std::size_t k = 0; k < d; ++k) {
    const auto eval = hermite::synthesize(system.observables[k]);
    g[k].resize(n_cells + 1);
    for (std::size_t i = 0; i <= n_cells; ++i) g[k][i] = eval(y[i]);
  }

  const std::size_t n_sub = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(8.0 * fast.step() - 1e-12)));
  const double h_step = slow_cell / static_cast<double>(n_sub);
  const double d_theta = 1.0 / static_cast<double>(n_sub);

  std::vector<double> x = system.x0;
  std::vector<double> states((n_cells + 1) * dim);
  std::copy(x.begin(), x.end(), states.begin());
  std::vector<double> fk(dim), k1(dim), k2(dim), k3(dim), k4(dim), xt(dim);

  const auto rhs = [&](std::size_t cell, double theta,
                       const std::vector<double>& state, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      const double gk = (1.0 - theta) * g[k][cell] + theta * g[k][cell + 1];
      system.fields[k].f(state, fk);
      const double w = alphas[k] * gk;
      for (std::size_t a = 0; a < dim; ++a) out[a] += w * fk[a];
    }
  };

  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    for (std::size_t s = 0; s < n_sub; ++s) {
      const double theta = static_cast<double>(s) * d_theta;
      rhs(cell, theta, x, k1);
      for (std::size_t a = 0; a < dim; ++a) xt[a] = x[a] + 0.5 * h_step * k1[a];
      rhs(cell, theta + 0.5 * d_theta, xt, k2);
      for (std::size_t a = 0; a < dim; ++a) xt[a] = x[a] + 0.5 * h_step * k2[a];
      rhs(cell, theta + 0.5 * d_theta, xt, k3);
      for (std::size_t a = 0; a < dim; ++a) xt[a] = x[a] + h_step * k3[a];
      rhs(cell, theta + d_theta, xt, k4);
      for (std::size_t a = 0; a < dim; ++a)
        x[a] += h_step / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
    }
    if (sup_abs(x) > kBlowupThreshold)
      throw_blowup(slow_cell * static_cast<double>(cell + 1), x, "solve_multiscale");
    std::copy(x.begin(), x.end(), states.begin() + static_cast<std::ptrdiff_t>(
                                                       (cell + 1) * dim));
  }

  StepStats stats;
  stats.max_step = h_step;
  return SolutionPath(TimeGrid(slow_cell, n_cells + 1), dim, std::move(states),
                      "rk4-multiscale", stats);
}

SolutionPath solve_rde(const std::vector<VectorField>& fields,
                       const rough::LiftedPath& lift, std::vector<double> x0,
                       const std::function<void(std::span<const double>,
                                                std::span<double>)>& drift_b,
                       double tol) {
  const std::size_t d = lift.d();
  const std::size_t dim = x0.size();
  if (fields.size() != d)
    throw DimensionMismatch("solve_rde: one field per driver component");
  if (dim == 0) throw std::invalid_argument("solve_rde: empty initial state");
  const TimeGrid& grid = lift.grid();

  const auto run = [&](const std::vector<std::size_t>& nodes) {
    std::vector<double> states(nodes.size() * dim);
    std::vector<double> x = x0;
    std::copy(x.begin(), x.end(), states.begin());
    std::vector<std::vector<double>> fk(d, std::vector<double>(dim));
    std::vector<double> jac(dim * dim), fp(dim), fm(dim), bx(dim);
    for (std::size_t n = 0; n + 1 < nodes.size(); ++n) {
      const std::size_t s = nodes[n], t = nodes[n + 1];
      for (std::size_t k = 0; k < d; ++k) fields[k].f(x, fk[k]);
      std::vector<double> delta(dim, 0.0);
      for (std::size_t k = 0; k < d; ++k) {
        const double dx = lift.increment(s, t, k);
        for (std::size_t a = 0; a < dim; ++a) delta[a] += fk[k][a] * dx;
      }
      for (std::size_t j = 0; j < d; ++j) {
        eval_jacobian(fields[j], x, jac, fp, fm);
        for (std::size_t i = 0; i < d; ++i) {
          const double xx = lift.area(s, t, i, j);
          if (xx == 0.0) continue;
          for (std::size_t a = 0; a < dim; ++a) {
            double dfj_fi = 0.0;
            for (std::size_t b = 0; b < dim; ++b)
              dfj_fi += jac[a * dim + b] * fk[i][b];
            delta[a] += dfj_fi * xx;
          }
        }
      }
      if (drift_b) {
        drift_b(x, bx);
        const double dt = grid.time(t) - grid.time(s);
        for (std::size_t a = 0; a < dim; ++a) delta[a] += bx[a] * dt;
      }
      for (std::size_t a = 0; a < dim; ++a) x[a] += delta[a];
      if (sup_abs(x) > kBlowupThreshold)
        throw_blowup(grid.time(t), x, "solve_rde");
      std::copy(x.begin(), x.end(),
                states.begin() + static_cast<std::ptrdiff_t>((n + 1) * dim));
    }
    return states;
  };

  auto result = refine_to_grid(grid.count(), dim, tol, run);
  result.stats.max_step = grid.step();
  return SolutionPath(grid, dim, std::move(result.states), "davie-rde",
                      result.stats);
}

SolutionPath solve_young(const std::vector<VectorField>& fields,
                         const TimeGrid& grid, const std::vector<double>& driver,
                         std::size_t d, std::vector<double> x0, double tol) {
  const std::size_t dim = x0.size();
  if (fields.size() != d)
    throw DimensionMismatch("solve_young: one field per driver component");
  if (driver.size() != grid.count() * d)
    throw DimensionMismatch("solve_young: driver size is not count * d");
  if (dim == 0) throw std::invalid_argument("solve_young: empty initial state");

  const double exponent = empirical_holder_exponent(grid, driver, d);
  if (exponent <= 0.55)
    throw RegularityTooLow("solve_young: empirical Hoelder exponent " +
                           std::to_string(exponent) + " <= 0.55");

  const auto run = [&](const std::vector<std::size_t>& nodes) {
    std::vector<double> states(nodes.size() * dim);
    std::vector<double> x = x0;
    std::copy(x.begin(), x.end(), states.begin());
    std::vector<double> fk(dim);
    for (std::size_t n = 0; n + 1 < nodes.size(); ++n) {
      const std::size_t s = nodes[n], t = nodes[n + 1];
      std::vector<double> delta(dim, 0.0);
      for (std::size_t k = 0; k < d; ++k) {
        const double dx = driver[t * d + k] - driver[s * d + k];
        fields[k].f(x, fk);
        for (std::size_t a = 0; a < dim; ++a) delta[a] += fk[a] * dx;
      }
      for (std::size_t a = 0; a < dim; ++a) x[a] += delta[a];
      if (sup_abs(x) > kBlowupThreshold)
        throw_blowup(grid.time(t), x, "solve_young");
      std::copy(x.begin(), x.end(),
                states.begin() + static_cast<std::ptrdiff_t>((n + 1) * dim));
    }
    return states;
  };

  auto result = refine_to_grid(grid.count(), dim, tol, run);
  result.stats.max_step = grid.step();
  return SolutionPath(grid, dim, std::move(result.states), "young-euler",
                      result.stats);
}

SolutionPath oracle_1d(const std::function<double(double)>& f, double x0,
                       const TimeGrid& grid, const std::vector<double>& driver) {
  if (driver.size() != grid.count())
    throw DimensionMismatch("oracle_1d: driver size must match grid count");
  if (std::abs(driver[0]) > 1e-12)
    throw std::invalid_argument("oracle_1d: driver must start at 0");
  const double f0 = f(x0);
  if (std::abs(f0) < 1e-14)
    throw FieldVanishes("oracle_1d: field vanishes at the initial state");
  const double sign0 = f0 > 0.0 ? 1.0 : -1.0;

  const auto check_field = [&](double x) {
    const double v = f(x);
    return std::abs(v) >= 1e-14 && (v > 0.0) == (sign0 > 0.0);
  };
  const auto inv_f = [&](double x) { return 1.0 / f(x); };
  const auto f_integral = [&](double a, double b) {
    try {
      return signed_integral(inv_f, a, b);
    } catch (const QuadratureFailure&) {
      // 1/f failed to integrate: f must lose its sign inside (a, b)
      throw FieldVanishes("oracle_1d: field vanishes inside the explored interval");
    }
  };

  std::vector<double> states(grid.count());
  states[0] = x0;
  double x_prev = x0;
  double f_prev = 0.0;  // F(x_prev), F(x0) = 0
  for (std::size_t i = 1; i < grid.count(); ++i) {
    const double v = driver[i];
    if (v == f_prev) {
      states[i] = x_prev;
      continue;
    }
    // F is monotone with slope sign0/|f|: walk x in the direction that moves
    // F toward v, halving whenever the probe would cross a zero of f
    const double dir = (v > f_prev ? 1.0 : -1.0) * sign0;
    double a = x_prev, fa = f_prev;
    double step = std::max(1e-6, 1e-3 * std::abs(x_prev));
    double b = 0.0, fb = 0.0;
    for (;;) {
      b = a + dir * step;
      if (!check_field(b)) {
        step *= 0.5;
        if (step < 1e-13 * (1.0 + std::abs(a)))
          throw FieldVanishes("oracle_1d: field vanishes inside the explored interval");
        continue;
      }
      fb = fa + f_integral(a, b);
      if ((fa - v) * (fb - v) <= 0.0) break;  // bracketed
      a = b;
      fa = fb;
      step *= 2.0;
    }
    if (a > b) {
      std::swap(a, b);
      std::swap(fa, fb);
    }
    while (b - a > 1e-12 * std::max(1.0, std::abs(a))) {
      const double mid = 0.5 * (a + b);
      const double fmid = fa + f_integral(a, mid);
      if ((fa - v) * (fmid - v) <= 0.0) {
        b = mid;
      } else {
        a = mid;
        fa = fmid;
      }
    }
    x_prev = 0.5 * (a + b);
    f_prev = v;
    states[i] = x_prev;
  }
  StepStats stats;
  stats.max_step = grid.step();
  return SolutionPath(grid, 1, std::move(states), "oracle-1d", stats);
}

}  // namespace fraclab::solve
