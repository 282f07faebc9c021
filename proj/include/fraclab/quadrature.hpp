#pragma once

#include <functional>
#include <vector>

namespace fraclab {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

// Adaptive Gauss(7)/Kronrod(15) integration on [a, b].  Throws
// QuadratureFailure when the requested tolerance cannot be met.
QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double abs_tol = 1e-12,
                           double rel_tol = 1e-10, int max_depth = 48);

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [-1, 1].
QuadRule gauss_legendre(int n);

// Gauss-Hermite rule for the standard normal weight: sum w_i f(x_i)
// approximates E[f(Z)], Z ~ N(0,1).  Exact for polynomials of degree 2n-1.
QuadRule gauss_hermite_probabilists(int n);

}  // namespace fraclab
