#pragma once

#include <vector>

namespace sperturb {

/// Gauss-Legendre rule mapped to the reference element [0,1].
/// Weights are positive and sum to 1; the rule is exact for polynomials of
/// degree <= 2*order - 1.
struct QuadratureRule {
  int order = 0;                 ///< number of Gauss points
  std::vector<double> points;    ///< nodes in (0,1)
  std::vector<double> weights;   ///< positive, sum to 1
};

/// Builds the Gauss-Legendre rule with n points on [0,1].
/// Nodes/weights are computed by Newton iteration on the Legendre polynomial
/// to ~1 ulp. Throws DomainError unless 1 <= n <= 64.
QuadratureRule gauss_rule(int n);

/// Integrates fn over [a,b] with a single application of the rule.
template <typename Fn>
double integrate_panel(const QuadratureRule& q, double a, double b, Fn&& fn) {
  double len = b - a;
  double total = 0.0;
  for (int i = 0; i < q.order; ++i) {
    total += q.weights[i] * fn(a + len * q.points[i]);
  }
  return len * total;
}

}  // namespace sperturb
