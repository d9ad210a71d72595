#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sperturb/fem.hpp"
#include "sperturb/mesh.hpp"
#include "sperturb/problem.hpp"

namespace sperturb {

/// A function together with its (a.e.) first derivative: x -> (v, v').
using FnVD = std::function<std::pair<double, double>(double)>;

/// Reference solution of the BVP, either a closed form (constant b) or a
/// fine-grid Galerkin oracle.
struct ReferenceSolution {
  enum class Kind { ClosedFormConstB, FineGridOracle };
  Kind kind = Kind::ClosedFormConstB;
  FnVD eval;                               ///< x -> (u, u')
  std::function<double(double)> eval_d2;   ///< a.e. second derivative; may be
                                           ///< empty for oracle references
  std::string provenance;
  int oracle_N = 0;                        ///< FineGridOracle only
};

/// Boundary-layer decomposition u = u0 + uBL_minus + uBL_plus + uR for
/// constant reaction coefficient. The layer parts additionally expose their
/// second derivative and its logarithm (the latter feeds the weighted norm
/// without overflow).
struct Decomposition {
  FnVD u0;
  FnVD uBL_minus;
  FnVD uBL_plus;
  std::function<double(double)> uBL_minus_d2;
  std::function<double(double)> uBL_plus_d2;
  std::function<double(double)> uBL_minus_log_abs_d2;
  std::function<double(double)> uBL_plus_log_abs_d2;
  FnVD uR;  ///< reference minus the other three parts
};

/// Which endpoint a weight/layer is attached to: Minus = x = -1, Plus = x = +1.
enum class Side { Minus, Plus };

/// Exponential weight w(x) = exp((1 -/+ x) / (eps * beta_star)).
/// For side Plus the exponent is (1 - x); for Minus it is (1 + x).
/// eval overflows double for small eps by design; log_eval never does.
struct WeightFn {
  Side side = Side::Plus;
  double epsilon = 1.0;
  double beta_star = 2.0;
  double log_eval(double x) const {
    double t = (side == Side::Plus) ? (1.0 - x) : (1.0 + x);
    return t / (epsilon * beta_star);
  }
  double eval(double x) const { return std::exp(log_eval(x)); }
};

/// One sweep measurement.
struct ConvergenceRow {
  std::string mesh_kind;
  double epsilon = 0.0;
  int N = 0;
  double err_energy = 0.0;
  double err_L2 = 0.0;
  double err_H1semi = 0.0;
  double err_Linf = 0.0;
  bool out_of_regime = false;  ///< N > 1/epsilon
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
};

/// Least-squares rate fit of worst-case-over-eps errors against N.
struct RateFit {
  std::string mesh_kind;
  std::string field;  ///< "energy" or "L2"
  std::vector<int> Ns;
  std::vector<double> worst_err;       ///< per fitted N
  double slope_vs_logN = 0.0;
  double r2_logN = 0.0;
  double slope_vs_logNlnN = 0.0;       ///< Shishkin-style abscissa log(N/ln N)
  double r2_logNlnN = 0.0;
  double c_ratio = 0.0;                ///< max/min over N of err * N / ln N
};

/// Fits under both robustness statistics: `full` takes the per-N worst case
/// over the entire eps grid; `regime` restricts to cells with N <= 1/eps
/// (a fit is omitted when fewer than 3 N values remain eligible).
struct FitReport {
  std::vector<RateFit> full;
  std::vector<RateFit> regime;
};

/// Exact solution for constant b. Supports f = polynomial of degree <= 4
/// (including "one") and f = "absx" (even, piecewise-explicit solution).
/// Throws UnsupportedData for non-constant b or unsupported f.
ReferenceSolution closed_form_const(const Problem& problem);

/// Galerkin reference on a Shishkin mesh with oracle_N elements.
/// Requires oracle_N divisible by 4 and >= 4096 (BadN otherwise).
ReferenceSolution fine_grid_oracle(const Problem& problem, int oracle_N);

/// Boundary-layer decomposition for constant b (UnsupportedData otherwise).
Decomposition decompose_const(const Problem& problem,
                              const ReferenceSolution& ref);

/// Composite-Gauss panel sets. Layer-aware: panels subdivide geometrically
/// toward each center in `centers` (start width eps*beta_star/8, doubling).
std::vector<double> panels_for_mesh(const Mesh& mesh, const Problem& problem,
                                    const std::vector<double>& centers);
std::vector<double> layer_panels(const Problem& problem,
                                 const std::vector<double>& centers);

/// Energy norm sqrt(int eps^2 e'^2 + b e^2) over the panel decomposition,
/// 10-point Gauss per panel.
double norm_energy(const Problem& problem, const FnVD& e,
                   const std::vector<double>& panels);

/// Weighted L2 norm sqrt(int g^2 w^2) with w the side's exponential weight.
/// Takes log|g| (not g): the weight alone overflows double for small eps while
/// the product g*w stays bounded, so the integrand is formed as
/// exp(2*(log|g| + log w)) per quadrature point (-inf maps to 0).
/// Throws NonFinite if the integrand evaluates to NaN or +inf.
double norm_weighted_L2(const Problem& problem,
                        const std::function<double(double)>& log_abs_g,
                        Side side);

/// Measures energy / L2 / H1-seminorm / Linf errors of (ref - u_h) on panels
/// aligned with u_h's mesh, with layer refinement toward +-1.
ConvergenceRow measure_errors(const Problem& problem,
                              const ReferenceSolution& ref,
                              const FeSolution& u_h);

/// Rate fits per (mesh kind, error field in {energy, L2}).
/// Requires >= 3 distinct N per mesh kind (InsufficientData otherwise); when
/// >= 5 N values are present the smallest is dropped before fitting
/// (preasymptotic guard).
FitReport fit_rates(const ConvergenceTable& table);

/// Least-squares line fit y ~ a*x + c; returns (slope a, R^2).
std::pair<double, double> lsq_slope(const std::vector<double>& x,
                                    const std::vector<double>& y);

}  // namespace sperturb
