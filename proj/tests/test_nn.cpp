#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "sperturb/error.hpp"
#include "sperturb/fem.hpp"
#include "sperturb/mesh.hpp"
#include "sperturb/nn.hpp"
#include "sperturb/problem.hpp"
#include "sperturb/quadrature.hpp"

using namespace sperturb;

namespace {

NeuralNet affine_net(double a, double c) {
  NeuralNet n;
  n.input_dim = 1;
  n.output_dim = 1;
  Layer l;
  l.rows = 1;
  l.cols = 1;
  l.A = {a};
  l.c = {c};
  l.act = {Act::Identity};
  n.layers.push_back(l);
  return n;
}

double sup_err_on_01(const NeuralNet& net,
                     const std::function<double(double)>& f, int samples) {
  double worst = 0.0;
  for (int i = 0; i <= samples; ++i) {
    double x = static_cast<double>(i) / samples;
    worst = std::max(worst, std::abs(realize1(net, x) - f(x)));
  }
  return worst;
}

}  // namespace

TEST_CASE("single affine layer realizes a*x + c") {
  NeuralNet n = affine_net(2.0, 3.0);
  CHECK(realize1(n, 1.0) == 5.0);
  CHECK(realize1(n, -0.5) == 2.0);
  CHECK(n.depth() == 1);
  CHECK(n.size() == 2);
  CHECK(realize_d1(n, 0.3) == 2.0);
  CHECK_NOTHROW(validate(n));
}

TEST_CASE("validate rejects broken dimension chains and non-identity output") {
  NeuralNet n = affine_net(1.0, 0.0);
  n.layers[0].act = {Act::Relu};  // output layer must be identity
  CHECK_THROWS_AS(validate(n), Error);

  NeuralNet m = affine_net(1.0, 0.0);
  m.input_dim = 2;  // layer cols = 1 mismatch
  try {
    validate(m);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }

  CHECK_THROWS_AS(realize(affine_net(1.0, 0.0), {1.0, 2.0}), Error);
}

TEST_CASE("heterogeneous activation tags mix relu and tanh in one layer") {
  NeuralNet n;
  n.input_dim = 1;
  n.output_dim = 1;
  Layer h;
  h.rows = 2;
  h.cols = 1;
  h.A = {1.0, 1.0};
  h.c = {0.0, 0.0};
  h.act = {Act::Relu, Act::Tanh};
  Layer o;
  o.rows = 1;
  o.cols = 2;
  o.A = {1.0, 1.0};
  o.c = {0.0};
  o.act = {Act::Identity};
  n.layers = {h, o};
  validate(n);
  for (double x : {-0.7, -0.1, 0.4, 0.9}) {
    double want = std::max(0.0, x) + std::tanh(x);
    CHECK(realize1(n, x) == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("cpwl_to_relu represents a hat exactly with depth 2") {
  NeuralNet n = cpwl_to_relu({-1.0, 0.0, 1.0}, {0.0, 1.0, 0.0});
  CHECK(n.depth() == 2);
  CHECK(n.width() == 2);  // one hidden unit per element
  for (int i = 0; i <= 100; ++i) {
    double x = -1.0 + 2.0 * i / 100.0;
    double want = 1.0 - std::abs(x);
    CHECK(std::abs(realize1(n, x) - want) <= 1e-15);
  }
  // derivative convention at the kink: ReLU'(0) = 0, so the unit that opens
  // at x = 0 contributes nothing there and the left slope is reported
  CHECK(realize_d1(n, -0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(realize_d1(n, 0.5) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(realize_d1(n, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cpwl_to_relu rejects bad partitions") {
  CHECK_THROWS_AS(cpwl_to_relu({0.0, 0.0, 1.0}, {0.0, 1.0, 0.0}), Error);
  CHECK_THROWS_AS(cpwl_to_relu({0.0, 1.0}, {0.0, 1.0, 0.0}), Error);
  try {
    cpwl_to_relu({1.0, 0.0}, {0.0, 1.0});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadPartition);
  }
}

TEST_CASE("cpwl_to_relu is nodal-exact on a boundary-layer FE solution") {
  // slopes ~ 1/h ~ 1e6: the compensated forward pass must not lose the
  // telescoping cancellation
  Problem p = make_problem(1e-8, "one", "one");
  Mesh m = build_mesh(MeshKind::shishkin(), 64, p);
  FeSolution u = solve(p, m, gauss_rule(5));
  NeuralNet n = cpwl_to_relu(u);
  CHECK(n.depth() == 2);
  CHECK(n.size() <= 3LL * 64);
  double uinf = 0.0;
  for (double c : u.coeffs) uinf = std::max(uinf, std::abs(c));
  for (int j = 0; j <= m.N; ++j) {
    CHECK(std::abs(realize1(n, m.nodes[j]) - u.coeffs[j]) <=
          1e-13 * (1.0 + uinf));
  }
  // midpoints interpolate linearly; placing a sample point is only accurate
  // to ~ulp, so a slope-M element carries an irreducible M*ulp value fuzz
  for (int j = 0; j < m.N; ++j) {
    double a = m.nodes[j], b = m.nodes[j + 1];
    double mid = 0.5 * (a + b);
    double want = 0.5 * (u.coeffs[j] + u.coeffs[j + 1]);
    double slope = (u.coeffs[j + 1] - u.coeffs[j]) / (b - a);
    double tol = 1e-12 * (1.0 + uinf) + std::abs(slope) * 8e-16;
    CHECK(std::abs(realize1(n, mid) - want) <= tol);
  }
  // derivative matches the element slope away from kinks
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int trial = 0; trial < 200; ++trial) {
    int j = static_cast<int>(rng() % m.N);
    double x = m.nodes[j] + unif(rng) * m.h[j];
    // the net's kinks sit at the node coordinates, so the realized slope is
    // the nodal difference quotient over the floating-point node difference
    double slope = (u.coeffs[j + 1] - u.coeffs[j]) / (m.nodes[j + 1] - m.nodes[j]);
    CHECK(realize_d1(n, x) == doctest::Approx(slope).epsilon(1e-9));
  }
}

TEST_CASE("tanh layer template: depth 2, size 4, sup errors below exp(-1)") {
  NeuralNet n = tanh_layer_net(Side::Minus, 1e-3, 1.0);
  CHECK(n.depth() == 2);
  CHECK(n.size() == 4);
  CHECK(n.width() == 1);

  // value error at the attached endpoint is exactly 1/3 by construction
  double target_at_end = 1.0;  // exp(0)
  CHECK(std::abs(realize1(n, -1.0) - target_at_end) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // sup value/derivative errors over the domain stay below exp(-1)
  double mu = std::sqrt(1.0) / 1e-3;
  double worst_v = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    double x = -1.0 + 2.0 * i / 20000.0;
    double want = std::exp(-mu * (1.0 + x));
    worst_v = std::max(worst_v, std::abs(realize1(n, x) - want));
  }
  CHECK(worst_v <= std::exp(-1.0));
  CHECK(worst_v == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

  // mirrored side agrees by reflection
  NeuralNet np = tanh_layer_net(Side::Plus, 1e-3, 1.0);
  for (double x : {-0.9, 0.0, 0.77}) {
    CHECK(realize1(np, x) == doctest::Approx(realize1(n, -x)).epsilon(1e-14));
  }

  CHECK_THROWS_AS(tanh_layer_net(Side::Minus, 0.0, 1.0), Error);
  CHECK_THROWS_AS(tanh_layer_net(Side::Minus, 1e-3, -1.0), Error);
}

TEST_CASE("square gadget: error bound 4^-(m+1), exact ends, monotone in m") {
  auto sq = [](double x) { return x * x; };
  double prev = 1.0;
  for (int m = 1; m <= 8; ++m) {
    NeuralNet n = relu_square_gadget(m);
    CHECK(n.depth() == m + 1);
    CHECK(n.size() == 8LL * m - 1);
    CHECK(std::abs(realize1(n, 0.0)) <= 1e-300);
    CHECK(realize1(n, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    double worst = sup_err_on_01(n, sq, 4096);
    CHECK(worst <= std::pow(2.0, -2.0 * m - 2.0) * (1.0 + 1e-12));
    CHECK(worst > std::pow(2.0, -2.0 * m - 2.0) * 0.9);  // bound is sharp
    if (m > 1) {
      CHECK(prev / worst > 3.5);
      CHECK(prev / worst < 4.5);
    }
    prev = worst;
  }
  CHECK_THROWS_AS(relu_square_gadget(0), Error);
}

TEST_CASE("product gadget multiplies on [-B,B]^2 within its bound") {
  for (int m : {2, 6, 8}) {
    for (double B : {1.0, 3.0}) {
      NeuralNet n = relu_product_gadget(m, B);
      CHECK(n.depth() == m + 2);
      CHECK(n.size() == 24LL * m + 14);
      CHECK(n.input_dim == 2);
      double bound = 6.0 * B * B * std::pow(2.0, -2.0 * m - 2.0);
      double worst = 0.0;
      for (int i = -8; i <= 8; ++i) {
        for (int j = -8; j <= 8; ++j) {
          double x = B * i / 8.0, y = B * j / 8.0;
          double got = realize(n, {x, y})[0];
          worst = std::max(worst, std::abs(got - x * y));
          // zero inputs multiply to ~0 and symmetry holds
          if (i == 0) CHECK(std::abs(got) <= bound);
          double sym = realize(n, {y, x})[0];
          CHECK(got == doctest::Approx(sym).epsilon(1e-12));
        }
      }
      CHECK(worst <= bound * (1.0 + 1e-12));
    }
  }
  NeuralNet n8 = relu_product_gadget(8, 1.0);
  CHECK(realize(n8, {0.5, 0.5})[0] == doctest::Approx(0.25).epsilon(4e-3));
  CHECK(std::abs(realize(n8, {0.5, 0.5})[0] - 0.25) <= 6.0 * std::pow(2.0, -18.0));
  CHECK_THROWS_AS(relu_product_gadget(0, 1.0), Error);
  CHECK_THROWS_AS(relu_product_gadget(3, 0.0), Error);
}

TEST_CASE("relu_exp_net approximates the layer exponential, improving with p") {
  const double eps = 0.1;
  const double mu = std::sqrt(1.0) / eps;
  auto sup_err = [&](const NeuralNet& n) {
    double worst = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      double x = -1.0 + 2.0 * i / 4000.0;
      double want = std::exp(-mu * (1.0 + x));
      worst = std::max(worst, std::abs(realize1(n, x) - want));
    }
    return worst;
  };
  double e4 = sup_err(relu_exp_net(4, eps, Side::Minus, 1.0));
  double e8 = sup_err(relu_exp_net(8, eps, Side::Minus, 1.0));
  double e12 = sup_err(relu_exp_net(12, eps, Side::Minus, 1.0));
  CHECK(e4 < 0.5);
  CHECK(e8 < e4);
  CHECK(e12 < e8);
  CHECK(e12 <= 1e-3);

  // output stays inside the clamp range [0,1]
  NeuralNet n12 = relu_exp_net(12, eps, Side::Minus, 1.0);
  for (int i = 0; i <= 400; ++i) {
    double x = -1.0 + 2.0 * i / 400.0;
    double v = realize1(n12, x);
    CHECK(v >= -1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }

  // mirrored side
  NeuralNet np = relu_exp_net(8, eps, Side::Plus, 1.0);
  NeuralNet nm = relu_exp_net(8, eps, Side::Minus, 1.0);
  for (double x : {-0.8, 0.0, 0.65}) {
    CHECK(realize1(np, x) == doctest::Approx(realize1(nm, -x)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(relu_exp_net(0, eps, Side::Minus, 1.0), Error);
  CHECK_THROWS_AS(relu_exp_net(25, eps, Side::Minus, 1.0), Error);
  try {
    relu_exp_net(0, eps, Side::Minus, 1.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::POutOfRange);
  }
  CHECK_THROWS_AS(relu_exp_net(4, 1.5, Side::Minus, 1.0), Error);
}

TEST_CASE("parallelize combines nets of equal and different depths") {
  // identity: one net, weight 1
  NeuralNet hat = cpwl_to_relu({-1.0, 0.0, 1.0}, {0.0, 1.0, 0.0});
  NeuralNet same = parallelize({hat}, {1.0});
  for (double x : {-0.9, -0.3, 0.0, 0.4, 1.0}) {
    CHECK(realize1(same, x) == doctest::Approx(realize1(hat, x)).epsilon(1e-14));
  }

  // exact cancellation of identical summands
  NeuralNet zero = parallelize({hat, hat}, {1.0, -1.0});
  for (int i = 0; i <= 200; ++i) {
    double x = -1.0 + 2.0 * i / 200.0;
    CHECK(std::abs(realize1(zero, x)) <= 1e-12);
  }

  // mixed depths: square gadget (depth 4) + hat (depth 2) + affine (depth 1)
  NeuralNet sq3 = relu_square_gadget(3);
  NeuralNet aff = affine_net(0.5, -0.25);
  NeuralNet combo = parallelize({sq3, hat, aff}, {2.0, -1.0, 3.0});
  CHECK(combo.depth() == 4);
  for (int i = 0; i <= 400; ++i) {
    double x = static_cast<double>(i) / 400.0;  // [0,1]: gadget domain
    double want = 2.0 * realize1(sq3, x) - realize1(hat, x) + 3.0 * (0.5 * x - 0.25);
    CHECK(realize1(combo, x) == doctest::Approx(want).epsilon(1e-10));
  }

  // FE net + tanh template, as used for decomposition surrogates
  Problem p = make_problem(1e-2, "one", "one");
  Mesh m = build_mesh(MeshKind::shishkin(), 16, p);
  FeSolution u = solve(p, m, gauss_rule(5));
  NeuralNet fe = cpwl_to_relu(u);
  NeuralNet th = tanh_layer_net(Side::Minus, 1e-2, 1.0);
  NeuralNet mix = parallelize({fe, th}, {1.0, -0.5});
  for (double x : {-0.99, -0.5, 0.1, 0.98}) {
    double want = realize1(fe, x) - 0.5 * realize1(th, x);
    CHECK(realize1(mix, x) == doctest::Approx(want).epsilon(1e-10));
  }

  CHECK_THROWS_AS(parallelize({hat, hat}, {1.0}), Error);
  CHECK_THROWS_AS(parallelize({}, {}), Error);
}

TEST_CASE("export/import round-trips bit-exactly") {
  Problem p = make_problem(1e-8, "one", "poly2");
  Mesh m = build_mesh(MeshKind::bakhvalov_shishkin(), 32, p);
  NeuralNet orig = cpwl_to_relu(solve(p, m, gauss_rule(5)));
  const std::string path = "test_nn_roundtrip.nn";
  nn_export(orig, path);
  NeuralNet back = nn_import(path);
  REQUIRE(back.depth() == orig.depth());
  CHECK(back.input_dim == orig.input_dim);
  CHECK(back.output_dim == orig.output_dim);
  for (int l = 0; l < orig.depth(); ++l) {
    const Layer& a = orig.layers[l];
    const Layer& b = back.layers[l];
    REQUIRE(a.rows == b.rows);
    REQUIRE(a.cols == b.cols);
    for (size_t i = 0; i < a.A.size(); ++i) CHECK(a.A[i] == b.A[i]);
    for (size_t i = 0; i < a.c.size(); ++i) CHECK(a.c[i] == b.c[i]);
    for (size_t i = 0; i < a.act.size(); ++i) CHECK(a.act[i] == b.act[i]);
  }
  std::remove(path.c_str());

  // deep heterogeneous net round-trips too
  NeuralNet deep = relu_exp_net(6, 1e-2, Side::Plus, 1.0);
  nn_export(deep, path);
  NeuralNet deep2 = nn_import(path);
  CHECK(deep2.depth() == deep.depth());
  CHECK(deep2.size() == deep.size());
  for (double x : {-1.0, -0.997, -0.5, 0.3}) {
    CHECK(realize1(deep2, x) == realize1(deep, x));
  }
  std::remove(path.c_str());
}

TEST_CASE("nn_import rejects malformed files") {
  const std::string path = "test_nn_bad.nn";
  {
    FILE* fp = std::fopen(path.c_str(), "w");
    std::fputs("NNv9 1 1 1\n", fp);
    std::fclose(fp);
  }
  try {
    nn_import(path);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
  {
    FILE* fp = std::fopen(path.c_str(), "w");
    // dimension chain broken: layer says 2 cols on a 1-input net
    std::fputs("NNv1 1 1 1\nlayer 1 2 identity\n1 2\n0\n", fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(nn_import(path), Error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(nn_import("no_such_file.nn"), Error);
}

TEST_CASE("size counts nonzero entries only") {
  NeuralNet n;
  n.input_dim = 1;
  n.output_dim = 1;
  Layer h;
  h.rows = 2;
  h.cols = 1;
  h.A = {1.0, 0.0};  // one structural zero
  h.c = {0.0, 2.0};
  h.act = {Act::Relu, Act::Relu};
  Layer o;
  o.rows = 1;
  o.cols = 2;
  o.A = {3.0, 4.0};
  o.c = {0.0};
  o.act = {Act::Identity};
  n.layers = {h, o};
  // nonzeros: one weight + one bias in the hidden layer, two output weights
  CHECK(n.size() == 4);
  CHECK(n.width() == 2);
}
