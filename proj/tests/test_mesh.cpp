#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "sperturb/error.hpp"
#include "sperturb/mesh.hpp"
#include "sperturb/problem.hpp"

using namespace sperturb;

namespace {

Problem unit_problem(double eps) { return make_problem(eps, "one", "one"); }

void check_invariants(const Mesh& m) {
  REQUIRE(m.nodes.size() == static_cast<size_t>(m.N + 1));
  REQUIRE(m.h.size() == static_cast<size_t>(m.N));
  CHECK(m.nodes.front() == -1.0);
  CHECK(m.nodes.back() == 1.0);
  CHECK(m.nodes[m.N / 2] == 0.0);  // exact midpoint node
  double sum = 0.0;
  for (int i = 0; i < m.N; ++i) {
    CHECK(m.h[i] > 0.0);
    CHECK(m.nodes[i + 1] > m.nodes[i]);
    // stored analytic lengths agree with node differences
    CHECK(std::abs(m.h[i] - (m.nodes[i + 1] - m.nodes[i])) <=
          1e-14 * (1.0 + std::abs(m.nodes[i + 1])));
    sum += m.h[i];
  }
  CHECK(sum == doctest::Approx(2.0).epsilon(1e-12));
  // bit-exact mirror symmetry
  for (int i = 0; i <= m.N; ++i) CHECK(m.nodes[i] + m.nodes[m.N - i] == 0.0);
  for (int i = 0; i < m.N; ++i) CHECK(m.h[i] == m.h[m.N - 1 - i]);
}

}  // namespace

TEST_CASE("uniform mesh on N=4 is the expected partition") {
  Mesh m = build_mesh(MeshKind::uniform(), 4, unit_problem(1.0));
  check_invariants(m);
  CHECK(m.lambda == 0.0);
  CHECK_FALSE(m.degenerate);
  const double want[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int i = 0; i <= 4; ++i) CHECK(m.nodes[i] == want[i]);
  for (int i = 0; i < 4; ++i) CHECK(m.h[i] == 0.5);
}

TEST_CASE("element counts outside 4Z are rejected") {
  Problem p = unit_problem(1e-2);
  for (int n : {0, 2, 3, 6, 10, -4}) {
    try {
      build_mesh(MeshKind::shishkin(), n, p);
      FAIL("expected throw for N=", n);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadN);
    }
  }
  CHECK_NOTHROW(build_mesh(MeshKind::shishkin(), 4, p));
}

TEST_CASE("shishkin transition point and layer spacing match closed forms") {
  // theta = 4 for b = 1, so lambda = 4 * 1e-3 * ln(64).
  Problem p = unit_problem(1e-3);
  Mesh m = build_mesh(MeshKind::shishkin(), 64, p);
  check_invariants(m);
  CHECK_FALSE(m.degenerate);
  const double lambda = 4.0 * 1e-3 * std::log(64.0);
  CHECK(m.lambda == doctest::Approx(lambda).epsilon(1e-15));
  CHECK(m.nodes[16] == doctest::Approx(-1.0 + lambda).epsilon(1e-15));
  CHECK(m.nodes[48] == doctest::Approx(1.0 - lambda).epsilon(1e-15));
  // 16 equal layer cells of width lambda/16 on each side; frozen anchor value.
  CHECK(m.h[0] == doctest::Approx(0.001039720770839918).epsilon(1e-15));
  for (int i = 0; i < 16; ++i)
    CHECK(m.h[i] == doctest::Approx(lambda / 16.0).epsilon(1e-14));
  // interior cells are uniform of width (1 - lambda) / 16 ... times two halves
  for (int i = 16; i < 48; ++i)
    CHECK(m.h[i] == doctest::Approx((1.0 - lambda) / 16.0).epsilon(1e-13));
}

TEST_CASE("exponentially graded mesh matches its generating function") {
  Problem p = unit_problem(1e-2);
  Mesh m = build_mesh(MeshKind::exp(), 8, p);
  check_invariants(m);
  // x_1 = -1 + theta*eps*phi(1/4), phi(t) = -ln(1 - 2t(1 - 2/N)).
  const double phi14 = -std::log(1.0 - 2.0 * 0.25 * (1.0 - 2.0 / 8.0));
  CHECK(m.nodes[1] == doctest::Approx(-1.0 + 4.0 * 1e-2 * phi14).epsilon(1e-15));
  CHECK(m.nodes[1] == doctest::Approx(-0.98119985483017058).epsilon(1e-14));

  // Stored h agrees with theta*eps*(phi(2i/N) - phi(2(i-1)/N)) in the layer.
  Mesh fine = build_mesh(MeshKind::exp(), 64, unit_problem(1e-4));
  for (int i = 1; i <= fine.N / 4; ++i) {
    auto [phi_i, psi_i] =
        mesh_char(fine.kind, fine.N, 2.0 * i / fine.N);
    auto [phi_im1, psi_im1] =
        mesh_char(fine.kind, fine.N, 2.0 * (i - 1) / fine.N);
    (void)psi_i;
    (void)psi_im1;
    double want = fine.theta * fine.epsilon * (phi_i - phi_im1);
    CHECK(fine.h[i - 1] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("generating functions: endpoint values, monotonicity, psi = exp(-phi)") {
  const int N = 16;
  auto [phi_s, psi_s] = mesh_char(MeshKind::shishkin(), N, 0.5);
  CHECK(phi_s == doctest::Approx(std::log(16.0)).epsilon(1e-15));
  CHECK(psi_s == doctest::Approx(1.0 / 16.0).epsilon(1e-15));

  auto [phi_e, psi_e] = mesh_char(MeshKind::exp(), N, 0.5);
  CHECK(phi_e == doctest::Approx(std::log(8.0)).epsilon(1e-15));
  CHECK(psi_e == doctest::Approx(1.0 / 8.0).epsilon(1e-15));

  auto [phi_b, psi_b] = mesh_char(MeshKind::bakhvalov_shishkin(), N, 0.5);
  CHECK(phi_b == doctest::Approx(std::log(16.0)).epsilon(1e-15));
  CHECK(psi_b == doctest::Approx(1.0 / 16.0).epsilon(1e-15));

  for (MeshKind k : {MeshKind::shishkin(), MeshKind::exp(),
                     MeshKind::bakhvalov_shishkin()}) {
    auto [phi0, psi0] = mesh_char(k, N, 0.0);
    CHECK(phi0 == 0.0);
    CHECK(psi0 == 1.0);
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      double t = 0.5 * i / 1000.0;
      auto [phi, psi] = mesh_char(k, N, t);
      CHECK(phi > prev);
      CHECK(psi == doctest::Approx(std::exp(-phi)).epsilon(1e-13));
      prev = phi;
    }
  }
}

TEST_CASE("mesh_char rejects uniform kind and t outside [0,1/2]") {
  CHECK_THROWS_AS(mesh_char(MeshKind::uniform(), 16, 0.25), Error);
  CHECK_THROWS_AS(mesh_char(MeshKind::shishkin(), 16, -0.01), Error);
  CHECK_THROWS_AS(mesh_char(MeshKind::shishkin(), 16, 0.51), Error);
  try {
    mesh_char(MeshKind::uniform(), 16, 0.25);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainError);
  }
}

TEST_CASE("wide layers degenerate to three uniform patches") {
  // theta*eps*ln(N) = 4 * 0.5 * ln 16 >> 1/4.
  Problem p = unit_problem(0.5);
  for (MeshKind k : {MeshKind::shishkin(), MeshKind::exp(),
                     MeshKind::bakhvalov_shishkin()}) {
    Mesh m = build_mesh(k, 16, p);
    check_invariants(m);
    CHECK(m.degenerate);
    CHECK(m.lambda == 0.25);
    for (int i = 0; i < 4; ++i)
      CHECK(m.h[i] == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
    for (int i = 4; i < 12; ++i)
      CHECK(m.h[i] == doctest::Approx(3.0 / 16.0).epsilon(1e-15));
  }
}

TEST_CASE("symmetry and invariants hold across kinds, eps and N") {
  for (double eps : {1e-1, 1e-2, 1e-4, 1e-8}) {
    Problem p = unit_problem(eps);
    for (int n : {4, 8, 32, 128}) {
      for (MeshKind k : {MeshKind::shishkin(), MeshKind::exp(),
                         MeshKind::bakhvalov_shishkin(), MeshKind::uniform()}) {
        Mesh m = build_mesh(k, n, p);
        check_invariants(m);
      }
    }
  }
}

TEST_CASE("bakhvalov-shishkin layer cells are graded, last layer cell near h=lambda scale") {
  Problem p = unit_problem(1e-4);
  Mesh m = build_mesh(MeshKind::bakhvalov_shishkin(), 64, p);
  check_invariants(m);
  CHECK_FALSE(m.degenerate);
  // grading: cell widths increase towards the transition point
  for (int i = 1; i < m.N / 4; ++i) CHECK(m.h[i] > m.h[i - 1]);
  // first cell ~ theta*eps*phi'(0)*(2/N) with phi'(0) = 2(1-1/N)
  double h0_expect = m.theta * m.epsilon * (4.0 / 64.0) * (1.0 - 1.0 / 64.0);
  CHECK(m.h[0] == doctest::Approx(h0_expect).epsilon(0.05));
}

TEST_CASE("mesh kind parsing") {
  CHECK(mesh_kind_from_string("shishkin").tag == MeshTag::Shishkin);
  CHECK(mesh_kind_from_string("exp").tag == MeshTag::Exp);
  CHECK(mesh_kind_from_string("bs").tag == MeshTag::BakhvalovShishkin);
  CHECK(mesh_kind_from_string("uniform").tag == MeshTag::Uniform);
  CHECK_THROWS_AS(mesh_kind_from_string("nosuch"), Error);
  CHECK(std::string(mesh_kind_name(MeshTag::Exp)) == "exp");
}

TEST_CASE("mesh_dump_csv writes one row per node") {
  Problem p = unit_problem(1e-2);
  Mesh m = build_mesh(MeshKind::shishkin(), 8, p);
  const std::string path = "test_mesh_dump.csv";
  mesh_dump_csv(m, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "i,x_i,h_i");
  int rows = 0;
  std::string first_row;
  while (std::getline(in, line)) {
    if (rows == 0) first_row = line;
    ++rows;
  }
  CHECK(rows == 9);
  CHECK(first_row.substr(0, 5) == "0,-1,");
  std::remove(path.c_str());
}
