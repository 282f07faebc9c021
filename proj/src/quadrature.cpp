#include "fraclab/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "fraclab/errors.hpp"

namespace fraclab {
namespace {

// Gauss(7)/Kronrod(15) node-weight pairs on [-1, 1] (symmetric halves).
constexpr double kKronrodNodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
constexpr double kKronrodWeights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
constexpr double kGaussWeights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

struct PanelEval {
  double kronrod;
  double gauss;
};

PanelEval eval_panel(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fk = 0.0, fg = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double x = kKronrodNodes[i] * h;
    const double v = (i == 7) ? f(c) : f(c - x) + f(c + x);
    fk += v * kKronrodWeights[i];
    if (i % 2 == 1) fg += v * kGaussWeights[i / 2];
  }
  return {fk * h, fg * h};
}

double adaptive(const std::function<double(double)>& f, double a, double b,
                double tol, int depth, int max_depth, double* err_acc) {
  const PanelEval e = eval_panel(f, a, b);
  const double err = std::abs(e.kronrod - e.gauss);
  if (err <= tol || depth >= max_depth) {
    if (depth >= max_depth && err > tol)
      throw QuadratureFailure("max refinement depth reached");
    *err_acc += err;
    return e.kronrod;
  }
  const double c = 0.5 * (a + b);
  return adaptive(f, a, c, 0.5 * tol, depth + 1, max_depth, err_acc) +
         adaptive(f, c, b, 0.5 * tol, depth + 1, max_depth, err_acc);
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double abs_tol, double rel_tol,
                           int max_depth) {
  if (a == b) return {0.0, 0.0};
  const PanelEval whole = eval_panel(f, a, b);
  const double tol =
      std::max(abs_tol, rel_tol * std::abs(whole.kronrod));
  double err = 0.0;
  const double v = adaptive(f, a, b, tol, 0, max_depth, &err);
  return {v, err};
}

QuadRule gauss_legendre(int n) {
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton from the Chebyshev-angle initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

QuadRule gauss_hermite_probabilists(int n) {
  // Golub-Welsch on the Jacobi matrix of the probabilists' recurrence
  // x H_k = H_{k+1} + k H_{k-1}: zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()(i);
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;  // total mass of N(0,1) is 1
  }
  return rule;
}

}  // namespace fraclab
