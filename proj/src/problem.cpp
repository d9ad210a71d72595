#include "sperturb/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sperturb/error.hpp"

namespace sperturb {

const char* regularity_name(RegularityTag tag) {
  switch (tag) {
    case RegularityTag::H1: return "H1";
    case RegularityTag::H2: return "H2";
    case RegularityTag::C2: return "C2";
    case RegularityTag::Analytic: return "analytic";
  }
  return "?";
}

namespace {

std::vector<CoefficientFn> build_registry() {
  std::vector<CoefficientFn> reg;

  {
    CoefficientFn c;
    c.registry_id = "one";
    c.eval = [](double) { return 1.0; };
    c.eval_d1 = [](double) { return 0.0; };
    c.eval_d2 = [](double) { return 0.0; };
    c.regularity_tag = RegularityTag::Analytic;
    c.exact_inf = 1.0;
    c.is_constant = true;
    c.poly_coeffs = {1.0};
    reg.push_back(std::move(c));
  }
  {
    CoefficientFn c;
    c.registry_id = "poly2";
    c.eval = [](double x) { return 1.0 + x * x; };
    c.eval_d1 = [](double x) { return 2.0 * x; };
    c.eval_d2 = [](double) { return 2.0; };
    c.regularity_tag = RegularityTag::C2;
    c.exact_inf = 1.0;
    c.poly_coeffs = {1.0, 0.0, 1.0};
    reg.push_back(std::move(c));
  }
  {
    CoefficientFn c;
    c.registry_id = "absx";
    c.eval = [](double x) { return std::abs(x); };
    // first derivative not everywhere defined -> omitted
    c.regularity_tag = RegularityTag::H1;
    c.exact_inf = 0.0;
    reg.push_back(std::move(c));
  }
  {
    CoefficientFn c;
    c.registry_id = "2+sin";
    c.eval = [](double x) { return 2.0 + std::sin(M_PI * x); };
    c.eval_d1 = [](double x) { return M_PI * std::cos(M_PI * x); };
    c.eval_d2 = [](double x) { return -M_PI * M_PI * std::sin(M_PI * x); };
    c.regularity_tag = RegularityTag::Analytic;
    // min of 2 + sin(pi x) on [-1,1] is attained at x = -1/2.
    c.exact_inf = 1.0;
    reg.push_back(std::move(c));
  }
  {
    CoefficientFn c;
    c.registry_id = "b_h1";
    c.eval = [](double x) { return 2.0 + std::abs(x); };
    c.regularity_tag = RegularityTag::H1;
    c.exact_inf = 2.0;
    reg.push_back(std::move(c));
  }
  return reg;
}

const std::vector<CoefficientFn>& registry() {
  static const std::vector<CoefficientFn> reg = build_registry();
  return reg;
}

}  // namespace

CoefficientFn registry_get(const std::string& id) {
  for (const auto& c : registry()) {
    if (c.registry_id == id) return c;
  }
  fail(ErrorCode::UnknownRegistryId, "no coefficient registered as '" + id + "'");
}

std::vector<std::pair<std::string, RegularityTag>> registry_list() {
  std::vector<std::pair<std::string, RegularityTag>> out;
  for (const auto& c : registry()) out.emplace_back(c.registry_id, c.regularity_tag);
  return out;
}

Problem make_problem(double epsilon, const std::string& b_id,
                     const std::string& f_id) {
  if (!(epsilon > 0.0) || epsilon > 1.0 || !std::isfinite(epsilon)) {
    fail(ErrorCode::EpsilonOutOfRange,
         "epsilon must lie in (0,1], got " + std::to_string(epsilon));
  }
  Problem p;
  p.epsilon = epsilon;
  p.b = registry_get(b_id);
  p.f = registry_get(f_id);

  // Grid infimum/supremum of b over 10001 equispaced points.
  constexpr int kGridPoints = 10001;
  double grid_inf = std::numeric_limits<double>::infinity();
  double grid_sup = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGridPoints; ++i) {
    double x = -1.0 + 2.0 * i / (kGridPoints - 1);
    double v = p.b.eval(x);
    grid_inf = std::min(grid_inf, v);
    grid_sup = std::max(grid_sup, v);
  }
  p.b_lower = p.b.exact_inf.value_or(grid_inf);
  p.b_upper = grid_sup;
  if (!(p.b_lower > 0.0)) {
    fail(ErrorCode::NonPositiveReaction,
         "reaction coefficient '" + b_id + "' has non-positive infimum");
  }
  p.beta_star = 2.0 / std::sqrt(p.b_lower);
  p.theta = 2.0 * p.beta_star;
  // Remainder order: 2 for C2-or-better data, 1 when either b or f is only H1.
  auto order_of = [](RegularityTag t) {
    return (t == RegularityTag::H1) ? 1 : 2;
  };
  p.k = std::min(order_of(p.b.regularity_tag), order_of(p.f.regularity_tag));
  return p;
}

}  // namespace sperturb
