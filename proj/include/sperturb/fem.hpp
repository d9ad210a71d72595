#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sperturb/mesh.hpp"
#include "sperturb/problem.hpp"
#include "sperturb/quadrature.hpp"

namespace sperturb {

/// Continuous piecewise-linear function given by nodal values on a mesh.
/// With bc_respected, coeffs[0] = coeffs[N] = 0 (homogeneous Dirichlet).
struct FeSolution {
  Mesh mesh;
  std::vector<double> coeffs;  ///< size N+1
  bool bc_respected = true;
};

/// Symmetric tridiagonal system over the interior nodes 1..N-1.
/// lower[i] couples unknown i to i-1 (lower[0] unused = 0); upper mirrors.
struct TridiagonalSystem {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;
  std::vector<double> load;
};

/// Assembles the P1 Galerkin system: diffusion eps^2 * int(u' v') integrated
/// exactly (piecewise-constant derivatives), reaction int(b u v) and load
/// int(f v) by per-element Gauss quadrature. Requires quad.order >= 2
/// (DomainError otherwise).
TridiagonalSystem assemble(const Problem& problem, const Mesh& mesh,
                           const QuadratureRule& quad);

/// Solves the assembled system by the Thomas recursion (valid: the system is
/// symmetric positive definite). Verifies the residual infinity-norm is
/// <= 1e-10 * (max|load| + 1). Throws SingularSystem when a pivot underflows
/// (|pivot| < 1e-300), which signals broken assembly.
FeSolution solve(const Problem& problem, const Mesh& mesh,
                 const QuadratureRule& quad);

/// Evaluates a piecewise-linear function: value and element slope at x.
/// At interior nodes the slope of the RIGHT element is returned; at x = +1
/// (no right element) the last element's slope. Throws DomainError for x
/// outside [-1,1].
std::pair<double, double> eval_fe(const FeSolution& u, double x);

/// Nodal interpolant of an arbitrary function on the mesh of `like`.
FeSolution interpolate_on_mesh(const Mesh& mesh,
                               const std::function<double(double)>& fn,
                               bool bc_respected);

/// The variational energy functional R(v) = 1/2 B(v,v) - F(v) with
/// B(v,v) = int(eps^2 v'^2 + b v^2) and F(v) = int(f v).
/// FE overload: composite Gauss (same order as assembly quadrature) on the
/// function's own mesh elements, so the Galerkin solution is the exact
/// minimizer of this discrete functional over its FE space.
double ritz_energy(const Problem& problem, const FeSolution& v,
                   const QuadratureRule& quad);

/// General overload: v maps x to (value, derivative); integrates on quad_n
/// uniform panels with a 10-point Gauss rule per panel. quad_n >= 1
/// (DomainError otherwise).
double ritz_energy(const Problem& problem,
                   const std::function<std::pair<double, double>(double)>& v,
                   int quad_n);

/// Writes "x,u" CSV rows (17 significant digits) for the solution's nodes.
void solution_dump_csv(const FeSolution& u, const std::string& path);

/// Reads a "x,u" CSV produced by solution_dump_csv (or compatible).
/// Returns (nodes, values). Throws ParseError / IoError.
std::pair<std::vector<double>, std::vector<double>> solution_read_csv(
    const std::string& path);

}  // namespace sperturb
