#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sperturb {

/// Sobolev/smoothness class of a registry coefficient. Drives which sweeps a
/// coefficient participates in (H1 data for the first-order robust rates, C2
/// data for the L2 superconvergence study).
enum class RegularityTag { H1, H2, C2, Analytic };

const char* regularity_name(RegularityTag tag);

/// A coefficient function from the closed-form registry.
/// Coefficients are closed forms, not parsed expressions, so derivatives are
/// exact and test data is deterministic.
struct CoefficientFn {
  std::string registry_id;
  std::function<double(double)> eval;
  std::function<double(double)> eval_d1;  ///< may be empty (e.g. |x| at 0)
  std::function<double(double)> eval_d2;  ///< may be empty
  RegularityTag regularity_tag = RegularityTag::Analytic;
  /// Exact infimum over [-1,1] when known analytically; otherwise the
  /// 10001-point grid infimum is used.
  std::optional<double> exact_inf;
  /// True when the function is constant on [-1,1].
  bool is_constant = false;
  /// Polynomial coefficients (a0 + a1 x + ...) when the function is a
  /// polynomial of degree <= 4; empty otherwise.
  std::vector<double> poly_coeffs;
};

/// A fully-specified BVP instance:
///   -eps^2 u'' + b(x) u = f(x) on (-1,1),  u(+-1) = 0,
/// with 0 < b_lower <= b(x) <= b_upper.
struct Problem {
  double epsilon = 1.0;  ///< in (0,1]
  CoefficientFn b;
  CoefficientFn f;
  double b_lower = 0.0;     ///< inf of b (exact when the registry knows it)
  double b_upper = 0.0;     ///< sup of b on the sampling grid
  double beta_star = 0.0;   ///< 2 / sqrt(b_lower): layer decay scale
  double theta = 0.0;       ///< 2 * beta_star: transition-point factor
  int k = 2;                ///< regularity order in {1,2} from data smoothness
};

/// Looks up a coefficient by registry id. Throws UnknownRegistryId.
CoefficientFn registry_get(const std::string& id);

/// Lists all registered coefficients as (id, regularity) pairs.
/// Stable ordering across calls.
std::vector<std::pair<std::string, RegularityTag>> registry_list();

/// Builds a Problem from epsilon and registry ids.
/// b_lower is the exact infimum when the registry provides one, else the
/// infimum over a 10001-point equispaced grid.
/// Throws EpsilonOutOfRange, UnknownRegistryId, NonPositiveReaction.
Problem make_problem(double epsilon, const std::string& b_id,
                     const std::string& f_id);

}  // namespace sperturb
