#include "sperturb/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sperturb/error.hpp"

namespace sperturb {

TridiagonalSystem assemble(const Problem& problem, const Mesh& mesh,
                           const QuadratureRule& quad) {
  if (quad.order < 2) {
    fail(ErrorCode::DomainError, "assembly quadrature order must be >= 2");
  }
  const int N = mesh.N;
  const int n = N - 1;  // interior unknowns
  TridiagonalSystem sys;
  sys.lower.assign(n, 0.0);
  sys.diag.assign(n, 0.0);
  sys.upper.assign(n, 0.0);
  sys.load.assign(n, 0.0);

  const double eps2 = problem.epsilon * problem.epsilon;
  for (int k = 0; k < N; ++k) {
    const double a = mesh.nodes[k];
    const double hk = mesh.h[k];
    double m00 = 0.0, m01 = 0.0, m11 = 0.0, f0 = 0.0, f1 = 0.0;
    for (int q = 0; q < quad.order; ++q) {
      const double t = quad.points[q];          // reference coordinate
      const double w = quad.weights[q] * hk;    // physical weight
      const double x = a + hk * t;
      const double bv = problem.b.eval(x);
      const double fv = problem.f.eval(x);
      const double p0 = 1.0 - t;  // basis of left node
      const double p1 = t;        // basis of right node
      m00 += w * bv * p0 * p0;
      m01 += w * bv * p0 * p1;
      m11 += w * bv * p1 * p1;
      f0 += w * fv * p0;
      f1 += w * fv * p1;
    }
    const double kdiff = eps2 / hk;
    const int i0 = k - 1;  // interior index of node k
    const int i1 = k;      // interior index of node k+1
    if (i0 >= 0) {
      sys.diag[i0] += kdiff + m00;
      sys.load[i0] += f0;
    }
    if (i1 < n) {
      sys.diag[i1] += kdiff + m11;
      sys.load[i1] += f1;
    }
    if (i0 >= 0 && i1 < n) {
      sys.upper[i0] += -kdiff + m01;
      sys.lower[i1] += -kdiff + m01;
    }
  }
  return sys;
}

FeSolution solve(const Problem& problem, const Mesh& mesh,
                 const QuadratureRule& quad) {
  TridiagonalSystem sys = assemble(problem, mesh, quad);
  const int n = static_cast<int>(sys.diag.size());

  // Thomas forward elimination / back substitution.
  std::vector<double> c(n, 0.0), d(n, 0.0);
  double pivot = sys.diag[0];
  if (std::abs(pivot) < 1e-300) {
    fail(ErrorCode::SingularSystem, "zero pivot at row 0");
  }
  c[0] = (n > 1) ? sys.upper[0] / pivot : 0.0;
  d[0] = sys.load[0] / pivot;
  for (int i = 1; i < n; ++i) {
    pivot = sys.diag[i] - sys.lower[i] * c[i - 1];
    if (std::abs(pivot) < 1e-300) {
      fail(ErrorCode::SingularSystem, "zero pivot at row " + std::to_string(i));
    }
    if (i < n - 1) c[i] = sys.upper[i] / pivot;
    d[i] = (sys.load[i] - sys.lower[i] * d[i - 1]) / pivot;
  }
  std::vector<double> u(n, 0.0);
  if (n > 0) {
    u[n - 1] = d[n - 1];
    for (int i = n - 2; i >= 0; --i) u[i] = d[i] - c[i] * u[i + 1];
  }

  // Residual check against the assembled system.
  double load_inf = 0.0;
  for (double v : sys.load) load_inf = std::max(load_inf, std::abs(v));
  double res_inf = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = sys.diag[i] * u[i] - sys.load[i];
    if (i > 0) r += sys.lower[i] * u[i - 1];
    if (i < n - 1) r += sys.upper[i] * u[i + 1];
    res_inf = std::max(res_inf, std::abs(r));
  }
  if (!(res_inf <= 1e-10 * (load_inf + 1.0))) {
    fail(ErrorCode::SingularSystem,
         "linear-system residual too large: " + std::to_string(res_inf));
  }

  FeSolution sol;
  sol.mesh = mesh;
  sol.coeffs.assign(mesh.N + 1, 0.0);
  for (int i = 0; i < n; ++i) sol.coeffs[i + 1] = u[i];
  sol.bc_respected = true;
  return sol;
}

std::pair<double, double> eval_fe(const FeSolution& u, double x) {
  const auto& xs = u.mesh.nodes;
  const int N = u.mesh.N;
  if (!(x >= xs.front() && x <= xs.back())) {
    fail(ErrorCode::DomainError,
         "eval_fe: x = " + std::to_string(x) + " outside [-1,1]");
  }
  // Element index with right-element tie-break at interior nodes:
  // k = index of the last node <= x, clamped so x = +1 uses the last element.
  int k = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) -
                           xs.begin()) - 1;
  if (k < 0) k = 0;
  if (k >= N) k = N - 1;
  const double slope = (u.coeffs[k + 1] - u.coeffs[k]) / u.mesh.h[k];
  const double value = u.coeffs[k] + slope * (x - xs[k]);
  return {value, slope};
}

FeSolution interpolate_on_mesh(const Mesh& mesh,
                               const std::function<double(double)>& fn,
                               bool bc_respected) {
  FeSolution s;
  s.mesh = mesh;
  s.coeffs.resize(mesh.N + 1);
  for (int i = 0; i <= mesh.N; ++i) s.coeffs[i] = fn(mesh.nodes[i]);
  if (bc_respected) {
    s.coeffs[0] = 0.0;
    s.coeffs[mesh.N] = 0.0;
  }
  s.bc_respected = bc_respected;
  return s;
}

namespace {

double ritz_on_panels(const Problem& problem,
                      const std::function<std::pair<double, double>(double)>& v,
                      const std::vector<double>& breaks,
                      const QuadratureRule& quad) {
  const double eps2 = problem.epsilon * problem.epsilon;
  double total = 0.0;
  for (size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double len = breaks[k + 1] - a;
    for (int q = 0; q < quad.order; ++q) {
      const double x = a + len * quad.points[q];
      const double w = quad.weights[q] * len;
      auto [val, dval] = v(x);
      const double bv = problem.b.eval(x);
      const double fv = problem.f.eval(x);
      total += w * (0.5 * (eps2 * dval * dval + bv * val * val) - fv * val);
    }
  }
  return total;
}

}  // namespace

double ritz_energy(const Problem& problem, const FeSolution& v,
                   const QuadratureRule& quad) {
  auto fn = [&v](double x) { return eval_fe(v, x); };
  return ritz_on_panels(problem, fn, v.mesh.nodes, quad);
}

double ritz_energy(const Problem& problem,
                   const std::function<std::pair<double, double>(double)>& v,
                   int quad_n) {
  if (quad_n < 1) fail(ErrorCode::DomainError, "ritz_energy needs quad_n >= 1");
  std::vector<double> breaks(quad_n + 1);
  for (int i = 0; i <= quad_n; ++i) breaks[i] = -1.0 + 2.0 * i / quad_n;
  return ritz_on_panels(problem, v, breaks, gauss_rule(10));
}

void solution_dump_csv(const FeSolution& u, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out << "x,u\n";
  char buf[64];
  for (int i = 0; i <= u.mesh.N; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", u.mesh.nodes[i]);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", u.coeffs[i]);
    out << buf << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failure on '" + path + "'");
}

std::pair<std::vector<double>, std::vector<double>> solution_read_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, "empty file " + path);
  std::vector<double> xs, vs;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string fx, fu;
    if (!std::getline(ss, fx, ',') || !std::getline(ss, fu)) {
      fail(ErrorCode::ParseError,
           path + ":" + std::to_string(lineno) + ": expected 'x,u'");
    }
    try {
      xs.push_back(std::stod(fx));
      vs.push_back(std::stod(fu));
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError,
           path + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  if (xs.size() < 2) fail(ErrorCode::ParseError, path + ": fewer than 2 rows");
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    if (!(xs[i] < xs[i + 1])) {
      fail(ErrorCode::ParseError, path + ": x column not strictly increasing");
    }
  }
  return {xs, vs};
}

}  // namespace sperturb
