#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sperturb/error.hpp"
#include "sperturb/quadrature.hpp"

using namespace sperturb;

TEST_CASE("weights are positive and sum to one") {
  for (int n : {1, 2, 3, 5, 10, 20, 40, 64}) {
    QuadratureRule q = gauss_rule(n);
    REQUIRE(q.order == n);
    REQUIRE(q.points.size() == static_cast<size_t>(n));
    REQUIRE(q.weights.size() == static_cast<size_t>(n));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(q.weights[i] > 0.0);
      CHECK(q.points[i] > 0.0);
      CHECK(q.points[i] < 1.0);
      sum += q.weights[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("nodes are symmetric about 1/2") {
  for (int n : {2, 3, 7, 16}) {
    QuadratureRule q = gauss_rule(n);
    for (int i = 0; i < n; ++i)
      CHECK(q.points[i] + q.points[n - 1 - i] ==
            doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("rule with n points integrates monomials up to degree 2n-1") {
  for (int n : {1, 2, 3, 5, 8}) {
    QuadratureRule q = gauss_rule(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double got = 0.0;
      for (int i = 0; i < n; ++i)
        got += q.weights[i] * std::pow(q.points[i], d);
      CHECK(got == doctest::Approx(1.0 / (d + 1)).epsilon(1e-13));
    }
    // One degree beyond is not exact (sanity that the bound is sharp).
    double beyond = 0.0;
    for (int i = 0; i < n; ++i)
      beyond += q.weights[i] * std::pow(q.points[i], 2 * n);
    CHECK(std::abs(beyond - 1.0 / (2 * n + 1)) > 1e-12);
  }
}

TEST_CASE("integrate_panel maps the rule to an arbitrary interval") {
  QuadratureRule q = gauss_rule(5);
  // int_2^5 x^3 dx = (625-16)/4
  const double got = integrate_panel(q, 2.0, 5.0, [](double x) {
    return x * x * x;
  });
  CHECK(got == doctest::Approx((625.0 - 16.0) / 4.0).epsilon(1e-14));
}

TEST_CASE("order outside [1,64] is rejected") {
  CHECK_THROWS_AS(gauss_rule(0), Error);
  CHECK_THROWS_AS(gauss_rule(-3), Error);
  CHECK_THROWS_AS(gauss_rule(65), Error);
  try {
    gauss_rule(65);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainError);
  }
}
