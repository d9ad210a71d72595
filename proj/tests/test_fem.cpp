#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <functional>

#include "sperturb/error.hpp"
#include "sperturb/fem.hpp"
#include "sperturb/mesh.hpp"
#include "sperturb/problem.hpp"
#include "sperturb/quadrature.hpp"

using namespace sperturb;

namespace {

FeSolution hat_at_center() {
  // Single hat centered at x = 0 on a uniform N=4 mesh (h = 1/2).
  Problem p = make_problem(1.0, "one", "one");
  FeSolution u;
  u.mesh = build_mesh(MeshKind::uniform(), 4, p);
  u.coeffs = {0.0, 0.0, 1.0, 0.0, 0.0};
  u.bc_respected = true;
  return u;
}

}  // namespace

TEST_CASE("assembled system on uniform N=4, eps=1, b=f=1 matches hand values") {
  Problem p = make_problem(1.0, "one", "one");
  Mesh m = build_mesh(MeshKind::uniform(), 4, p);
  TridiagonalSystem sys = assemble(p, m, gauss_rule(5));
  REQUIRE(sys.diag.size() == 3);  // interior nodes 1..N-1
  // per element: diffusion eps^2/h = 2, reaction mass h/3 diag, h/6 offdiag
  for (double d : sys.diag) CHECK(d == doctest::Approx(4.0 + 1.0 / 3.0).epsilon(1e-14));
  for (size_t i = 1; i < sys.lower.size(); ++i)
    CHECK(sys.lower[i] == doctest::Approx(-2.0 + 1.0 / 12.0).epsilon(1e-14));
  for (size_t i = 0; i + 1 < sys.upper.size(); ++i)
    CHECK(sys.upper[i] == doctest::Approx(-2.0 + 1.0 / 12.0).epsilon(1e-14));
  for (double l : sys.load) CHECK(l == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(sys.lower[0] == 0.0);
}

TEST_CASE("assemble requires a reaction-exact quadrature order") {
  Problem p = make_problem(1.0, "one", "one");
  Mesh m = build_mesh(MeshKind::uniform(), 4, p);
  CHECK_THROWS_AS(assemble(p, m, gauss_rule(1)), Error);
  CHECK_NOTHROW(assemble(p, m, gauss_rule(2)));
}

TEST_CASE("solve on eps=1 reproduces the smooth closed form at the midpoint") {
  Problem p = make_problem(1.0, "one", "one");
  Mesh m = build_mesh(MeshKind::uniform(), 64, p);
  FeSolution u = solve(p, m, gauss_rule(5));
  CHECK(u.bc_respected);
  CHECK(u.coeffs.front() == 0.0);
  CHECK(u.coeffs.back() == 0.0);
  // u(x) = 1 - cosh(x)/cosh(1); nodal FE values are O(h^2) accurate.
  double exact0 = 1.0 - 1.0 / std::cosh(1.0);
  CHECK(std::abs(u.coeffs[32] - exact0) <= 1e-3);
  // even symmetry of data -> symmetric coefficients
  for (int j = 0; j <= 64; ++j)
    CHECK(u.coeffs[j] == doctest::Approx(u.coeffs[64 - j]).epsilon(1e-12));
}

TEST_CASE("layer-mesh solve stays symmetric and bounded for small eps") {
  Problem p = make_problem(1e-6, "one", "one");
  Mesh m = build_mesh(MeshKind::shishkin(), 32, p);
  FeSolution u = solve(p, m, gauss_rule(5));
  double apriori = 1.0 * std::sqrt(2.0);  // coarse: ||f|| / sqrt(b_lower) scale
  for (int j = 0; j <= 32; ++j) {
    CHECK(std::abs(u.coeffs[j]) <= apriori);
    CHECK(u.coeffs[j] == doctest::Approx(u.coeffs[32 - j]).epsilon(1e-10));
  }
  // interior plateau approaches f/b = 1
  CHECK(u.coeffs[16] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("eval_fe evaluates hats with the right-element slope convention") {
  FeSolution u = hat_at_center();
  auto [v1, s1] = eval_fe(u, -0.25);
  CHECK(v1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s1 == doctest::Approx(2.0).epsilon(1e-15));
  auto [v2, s2] = eval_fe(u, 0.25);
  CHECK(v2 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s2 == doctest::Approx(-2.0).epsilon(1e-15));
  // at the peak node the RIGHT element's slope is reported
  auto [v3, s3] = eval_fe(u, 0.0);
  CHECK(v3 == 1.0);
  CHECK(s3 == doctest::Approx(-2.0).epsilon(1e-15));
  // at x=+1 there is no right element: last element's slope
  auto [v4, s4] = eval_fe(u, 1.0);
  CHECK(v4 == 0.0);
  CHECK(s4 == 0.0);
  // nodes evaluate exactly
  auto [v5, s5] = eval_fe(u, -1.0);
  CHECK(v5 == 0.0);
  CHECK(s5 == 0.0);
  CHECK_THROWS_AS(eval_fe(u, 1.0000001), Error);
  CHECK_THROWS_AS(eval_fe(u, -1.5), Error);
}

TEST_CASE("interpolate_on_mesh reproduces nodal values") {
  Problem p = make_problem(1e-2, "one", "one");
  Mesh m = build_mesh(MeshKind::shishkin(), 16, p);
  auto fn = [](double x) { return std::sin(x) + x * x; };
  FeSolution ih = interpolate_on_mesh(m, fn, /*bc_respected=*/false);
  CHECK_FALSE(ih.bc_respected);
  for (int j = 0; j <= 16; ++j)
    CHECK(ih.coeffs[j] == doctest::Approx(fn(m.nodes[j])).epsilon(1e-15));
  // midpoints are linear interpolants
  double mid = 0.5 * (m.nodes[8] + m.nodes[9]);
  auto [v, s] = eval_fe(ih, mid);
  (void)s;
  CHECK(v == doctest::Approx(0.5 * (fn(m.nodes[8]) + fn(m.nodes[9]))).epsilon(1e-14));
}

TEST_CASE("Galerkin orthogonality against interior hats") {
  // With b = f = 1 all assembly integrals are exact, so the discrete residual
  // B(u-u_h, phi_j) must vanish for every interior hat phi_j.
  Problem p = make_problem(1e-2, "one", "one");
  Mesh m = build_mesh(MeshKind::shishkin(), 16, p);
  FeSolution uh = solve(p, m, gauss_rule(5));
  // exact solution u(x) = 1 - cosh(x/eps)/cosh(1/eps), stable evaluation:
  double mu = std::sqrt(1.0) / p.epsilon;
  auto uex = [&](double x) {
    double r = (std::exp(-mu * (1.0 - x)) + std::exp(-mu * (1.0 + x))) /
               (1.0 + std::exp(-2.0 * mu));
    return 1.0 - r;
  };
  auto uex_d1 = [&](double x) {
    double r = (mu * std::exp(-mu * (1.0 - x)) - mu * std::exp(-mu * (1.0 + x))) /
               (1.0 + std::exp(-2.0 * mu));
    return -r;
  };
  QuadratureRule q = gauss_rule(20);
  for (int j = 1; j < m.N; ++j) {
    double resid = 0.0;
    for (int e = j - 1; e <= j; ++e) {  // support of hat j
      double a = m.nodes[e], bnd = m.nodes[e + 1], h = m.h[e];
      double slope = (e == j - 1) ? 1.0 / h : -1.0 / h;
      for (int g = 0; g < q.order; ++g) {
        double x = a + (bnd - a) * q.points[g];
        double w = (bnd - a) * q.weights[g];
        double hat = (e == j - 1) ? (x - a) / h : (bnd - x) / h;
        auto [uhv, uhs] = eval_fe(uh, x);
        // at quadrature points x is strictly inside the element, so uhs is
        // this element's slope
        double du = uex_d1(x) - uhs;
        double dv = uex(x) - uhv;
        resid += w * (p.epsilon * p.epsilon * du * slope + dv * hat);
      }
    }
    CHECK(std::abs(resid) <= 5e-9);
  }
}

TEST_CASE("ritz energy: scaling identity and minimality at the Galerkin solution") {
  Problem p = make_problem(1e-2, "one", "one");
  Mesh m = build_mesh(MeshKind::shishkin(), 32, p);
  QuadratureRule q = gauss_rule(5);
  FeSolution uh = solve(p, m, q);

  FeSolution zero = uh;
  for (double& c : zero.coeffs) c = 0.0;
  CHECK(ritz_energy(p, zero, q) == 0.0);

  const double r1 = ritz_energy(p, uh, q);
  CHECK(r1 < 0.0);  // R(u_h) = -1/2 B(u_h,u_h)

  // R(c u_h) = (c^2/2 - c) B = (2c - c^2) R(u_h): check c = 2 gives 0.
  FeSolution twice = uh;
  for (double& c : twice.coeffs) c *= 2.0;
  CHECK(std::abs(ritz_energy(p, twice, q)) <= 1e-12 * std::abs(r1));
  FeSolution half = uh;
  for (double& c : half.coeffs) c *= 0.5;
  CHECK(ritz_energy(p, half, q) ==
        doctest::Approx(0.75 * r1).epsilon(1e-12));

  // any nodal perturbation increases the discrete functional
  for (int j : {1, m.N / 4, m.N / 2, m.N - 1}) {
    for (double d : {1e-3, -1e-3, 0.1}) {
      FeSolution vpert = uh;
      vpert.coeffs[j] += d;
      CHECK(ritz_energy(p, vpert, q) > r1);
    }
  }

  // the general (value,derivative) overload agrees with the FE overload when
  // the uniform panels align with the mesh elements (4096 = 32 * 128)
  Problem pu = make_problem(0.5, "one", "poly2");
  Mesh mu = build_mesh(MeshKind::uniform(), 32, pu);
  FeSolution uu = solve(pu, mu, q);
  auto vfn = [&](double x) { return eval_fe(uu, x); };
  double rfe = ritz_energy(pu, uu, q);
  double rgen = ritz_energy(pu, vfn, 4096);
  CHECK(rgen == doctest::Approx(rfe).epsilon(1e-10));
  CHECK_THROWS_AS(ritz_energy(pu, vfn, 0), Error);
}

TEST_CASE("solution CSV round-trips") {
  Problem p = make_problem(1e-3, "one", "poly2");
  Mesh m = build_mesh(MeshKind::bakhvalov_shishkin(), 16, p);
  FeSolution u = solve(p, m, gauss_rule(5));
  const std::string path = "test_fem_roundtrip.csv";
  solution_dump_csv(u, path);
  auto [xs, vs] = solution_read_csv(path);
  REQUIRE(xs.size() == u.coeffs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    CHECK(xs[i] == u.mesh.nodes[i]);  // %.17g round-trips doubles exactly
    CHECK(vs[i] == u.coeffs[i]);
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(solution_read_csv("does_not_exist.csv"), Error);
  {
    FILE* fp = std::fopen("test_fem_bad.csv", "w");
    std::fputs("x,u\n0.0,not_a_number\n", fp);
    std::fclose(fp);
  }
  try {
    solution_read_csv("test_fem_bad.csv");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
  std::remove("test_fem_bad.csv");
}
