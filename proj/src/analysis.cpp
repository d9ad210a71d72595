#include "sperturb/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <set>

#include "sperturb/error.hpp"

namespace sperturb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Evaluates polynomial sum c[i] x^i and derivatives by Horner.
double poly_eval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (size_t i = c.size(); i-- > 0;) v = v * x + c[i];
  return v;
}

std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (size_t i = 1; i < c.size(); ++i) d.push_back(c[i] * static_cast<double>(i));
  return d;
}

}  // namespace

ReferenceSolution closed_form_const(const Problem& problem) {
  if (!problem.b.is_constant) {
    fail(ErrorCode::UnsupportedData,
         "closed_form_const requires a constant reaction coefficient, got '" +
             problem.b.registry_id + "'");
  }
  const double b = problem.b.eval(0.0);
  const double eps = problem.epsilon;
  const double mu = std::sqrt(b) / eps;

  if (problem.f.registry_id == "absx") {
    // Even solution: on (0,1), u = x/b + P exp(-mu x) + Q exp(-mu (1-x)),
    // with u(1) = 0 and u'(0+) = 0 (so the even reflection is C^1).
    const double E = std::exp(-mu);
    const double Q = -(1.0 / b) * (1.0 + E / mu) / (1.0 + E * E);
    const double P = 1.0 / (b * mu) + Q * E;
    ReferenceSolution ref;
    ref.kind = ReferenceSolution::Kind::ClosedFormConstB;
    ref.provenance = "closed form, constant b, f=|x|";
    ref.eval = [=](double x) -> std::pair<double, double> {
      const double ax = std::abs(x);
      const double e0 = std::exp(-mu * ax);
      const double e1 = std::exp(-mu * (1.0 - ax));
      const double u = ax / b + P * e0 + Q * e1;
      const double du = sgn0(x) * (1.0 / b - mu * P * e0 + mu * Q * e1);
      return {u, du};
    };
    ref.eval_d2 = [=](double x) {
      const double ax = std::abs(x);
      return mu * mu * (P * std::exp(-mu * ax) + Q * std::exp(-mu * (1.0 - ax)));
    };
    return ref;
  }

  if (problem.f.poly_coeffs.empty() || problem.f.poly_coeffs.size() > 5) {
    fail(ErrorCode::UnsupportedData,
         "closed_form_const supports polynomial f of degree <= 4 or f=|x|, "
         "got '" + problem.f.registry_id + "'");
  }

  // Particular polynomial: -eps^2 p'' + b p = f, solved top-down:
  // p_i = (a_i + eps^2 (i+1)(i+2) p_{i+2}) / b.
  const std::vector<double>& a = problem.f.poly_coeffs;
  std::vector<double> p(a.size(), 0.0);
  for (size_t ii = a.size(); ii-- > 0;) {
    double corr = 0.0;
    if (ii + 2 < p.size()) {
      corr = eps * eps * static_cast<double>((ii + 1) * (ii + 2)) * p[ii + 2];
    }
    p[ii] = (a[ii] + corr) / b;
  }
  const std::vector<double> dp = poly_derivative(p);
  const std::vector<double> ddp = poly_derivative(dp);

  // Homogeneous part fitted to u(+-1) = 0 using the numerically stable
  // ratios cosh(mu x)/cosh(mu) and sinh(mu x)/sinh(mu... at the endpoints
  // the ratios are exactly +-1, so the boundary conditions hold by algebra.
  const double A = -0.5 * (poly_eval(p, 1.0) + poly_eval(p, -1.0));
  const double B = -0.5 * (poly_eval(p, 1.0) - poly_eval(p, -1.0));
  const double em2 = std::exp(-2.0 * mu);

  auto ratios = [=](double x) {
    const double ep = std::exp(mu * (x - 1.0));   // decays from +1
    const double em = std::exp(-mu * (x + 1.0));  // decays from -1
    const double cr = (ep + em) / (1.0 + em2);    // cosh(mu x)/cosh(mu)
    const double sr = (ep - em) / (1.0 - em2);    // sinh(mu x)/sinh(mu)
    const double dcr = mu * (ep - em) / (1.0 + em2);
    const double dsr = mu * (ep + em) / (1.0 - em2);
    return std::array<double, 4>{cr, sr, dcr, dsr};
  };

  ReferenceSolution ref;
  ref.kind = ReferenceSolution::Kind::ClosedFormConstB;
  ref.provenance = "closed form, constant b, polynomial f";
  ref.eval = [=](double x) -> std::pair<double, double> {
    auto r = ratios(x);
    const double u = poly_eval(p, x) + A * r[0] + B * r[1];
    const double du = poly_eval(dp, x) + A * r[2] + B * r[3];
    return {u, du};
  };
  ref.eval_d2 = [=](double x) {
    auto r = ratios(x);
    return poly_eval(ddp, x) + mu * mu * (A * r[0] + B * r[1]);
  };
  return ref;
}

ReferenceSolution fine_grid_oracle(const Problem& problem, int oracle_N) {
  if (oracle_N < 4096 || oracle_N % 4 != 0) {
    fail(ErrorCode::BadN,
         "oracle_N must be >= 4096 and divisible by 4, got " +
             std::to_string(oracle_N));
  }
  Mesh mesh = build_mesh(MeshKind::shishkin(), oracle_N, problem);
  FeSolution sol = solve(problem, mesh, gauss_rule(5));
  ReferenceSolution ref;
  ref.kind = ReferenceSolution::Kind::FineGridOracle;
  ref.oracle_N = oracle_N;
  ref.provenance =
      "Galerkin oracle on Shishkin mesh, N=" + std::to_string(oracle_N);
  auto shared = std::make_shared<FeSolution>(std::move(sol));
  ref.eval = [shared](double x) { return eval_fe(*shared, x); };
  return ref;
}

Decomposition decompose_const(const Problem& problem,
                              const ReferenceSolution& ref) {
  if (!problem.b.is_constant) {
    fail(ErrorCode::UnsupportedData,
         "decompose_const requires a constant reaction coefficient");
  }
  const double b = problem.b.eval(0.0);
  const double eps = problem.epsilon;
  const double mu = std::sqrt(b) / eps;
  const double em4 = std::exp(-4.0 * mu);
  const double denom = 1.0 - em4;  // sinh(2 mu) scaling, stable form

  Decomposition dec;

  const CoefficientFn f = problem.f;
  const bool f_is_absx = (f.registry_id == "absx");
  dec.u0 = [f, b, f_is_absx](double x) -> std::pair<double, double> {
    double v = f.eval(x) / b;
    double dv;
    if (f.eval_d1) {
      dv = f.eval_d1(x) / b;
    } else if (f_is_absx) {
      dv = sgn0(x) / b;
    } else {
      // central finite difference fallback
      const double h = 1e-6;
      const double xl = std::max(-1.0, x - h);
      const double xr = std::min(1.0, x + h);
      dv = (f.eval(xr) - f.eval(xl)) / (b * (xr - xl));
    }
    return {v, dv};
  };

  const double u0_m1 = f.eval(-1.0) / b;  // u0(-1)
  const double u0_p1 = f.eval(1.0) / b;   // u0(+1)

  // uBL_minus = -u0(-1) * sinh(mu (1-x)) / sinh(2 mu), evaluated as
  //   -u0(-1) * (exp(-mu(1+x)) - exp(-mu(3-x))) / (1 - exp(-4 mu)).
  dec.uBL_minus = [=](double x) -> std::pair<double, double> {
    const double e0 = std::exp(-mu * (1.0 + x));
    const double e1 = std::exp(-mu * (3.0 - x));
    const double v = -u0_m1 * (e0 - e1) / denom;
    const double dv = u0_m1 * mu * (e0 + e1) / denom;
    return {v, dv};
  };
  dec.uBL_minus_d2 = [=](double x) {
    const double e0 = std::exp(-mu * (1.0 + x));
    const double e1 = std::exp(-mu * (3.0 - x));
    return -u0_m1 * mu * mu * (e0 - e1) / denom;
  };
  dec.uBL_minus_log_abs_d2 = [=](double x) {
    if (u0_m1 == 0.0) return -kInf;
    // log |mu^2 u0(-1) (exp(-mu(1+x)) - exp(-mu(3-x))) / (1-exp(-4mu))|
    const double tail = -std::expm1(-2.0 * mu * (1.0 - x));  // 1 - e^{-2mu(1-x)}
    if (tail <= 0.0) return -kInf;                           // x = 1 exactly
    return 2.0 * std::log(mu) + std::log(std::abs(u0_m1)) - mu * (1.0 + x) +
           std::log(tail) - std::log1p(-em4);
  };

  dec.uBL_plus = [=](double x) -> std::pair<double, double> {
    const double e0 = std::exp(mu * (x - 1.0));
    const double e1 = std::exp(-mu * (x + 3.0));
    const double v = -u0_p1 * (e0 - e1) / denom;
    const double dv = -u0_p1 * mu * (e0 + e1) / denom;
    return {v, dv};
  };
  dec.uBL_plus_d2 = [=](double x) {
    const double e0 = std::exp(mu * (x - 1.0));
    const double e1 = std::exp(-mu * (x + 3.0));
    return -u0_p1 * mu * mu * (e0 - e1) / denom;
  };
  dec.uBL_plus_log_abs_d2 = [=](double x) {
    if (u0_p1 == 0.0) return -kInf;
    const double tail = -std::expm1(-2.0 * mu * (1.0 + x));
    if (tail <= 0.0) return -kInf;  // x = -1 exactly
    return 2.0 * std::log(mu) + std::log(std::abs(u0_p1)) - mu * (1.0 - x) +
           std::log(tail) - std::log1p(-em4);
  };

  const FnVD u0 = dec.u0;
  const FnVD blm = dec.uBL_minus;
  const FnVD blp = dec.uBL_plus;
  const FnVD reval = ref.eval;
  dec.uR = [=](double x) -> std::pair<double, double> {
    auto r = reval(x);
    auto a0 = u0(x);
    auto am = blm(x);
    auto ap = blp(x);
    return {r.first - a0.first - am.first - ap.first,
            r.second - a0.second - am.second - ap.second};
  };
  return dec;
}

namespace {

/// Geometric subdivision of [a,b] with panel widths starting at w0 at the
/// `from_left` end and doubling away from it.
void graded_subdiv(double a, double b, double w0, bool from_left,
                   std::vector<double>& out) {
  const double h = b - a;
  std::vector<double> pts;
  double w = w0;
  if (from_left) {
    double p = a;
    pts.push_back(a);
    while (p + w < b && w < h) {
      p += w;
      pts.push_back(p);
      w *= 2.0;
    }
    pts.push_back(b);
  } else {
    double p = b;
    pts.push_back(b);
    while (p - w > a && w < h) {
      p -= w;
      pts.push_back(p);
      w *= 2.0;
    }
    pts.push_back(a);
    std::reverse(pts.begin(), pts.end());
  }
  // append, skipping the shared first point when continuing a global list
  for (size_t i = 0; i < pts.size(); ++i) {
    if (!out.empty() && pts[i] <= out.back()) continue;
    out.push_back(pts[i]);
  }
}

}  // namespace

std::vector<double> panels_for_mesh(const Mesh& mesh, const Problem& problem,
                                    const std::vector<double>& centers) {
  const double s = problem.epsilon * problem.beta_star;  // layer length scale
  std::vector<double> breaks;
  breaks.reserve(mesh.N * 4);
  breaks.push_back(mesh.nodes[0]);
  for (int k = 0; k < mesh.N; ++k) {
    const double a = mesh.nodes[k];
    const double b = mesh.nodes[k + 1];
    const double h = b - a;
    if (h <= s / 4.0 || centers.empty()) {
      breaks.push_back(b);
      continue;
    }
    // nearest center and its distance to the element
    double best_c = centers[0];
    double best_d = kInf;
    for (double c : centers) {
      const double d = std::max({a - c, c - b, 0.0});
      if (d < best_d) {
        best_d = d;
        best_c = c;
      }
    }
    if (best_d < 50.0 * s) {
      if (best_c <= a) {
        graded_subdiv(a, b, s / 8.0, /*from_left=*/true, breaks);
      } else if (best_c >= b) {
        graded_subdiv(a, b, s / 8.0, /*from_left=*/false, breaks);
      } else {
        // center interior to the element: grade away from it on both sides
        graded_subdiv(a, best_c, s / 8.0, /*from_left=*/false, breaks);
        graded_subdiv(best_c, b, s / 8.0, /*from_left=*/true, breaks);
      }
    } else {
      // halve once so no panel is wider than half an element
      const double mid = 0.5 * (a + b);
      if (mid > breaks.back()) breaks.push_back(mid);
      breaks.push_back(b);
    }
  }
  return breaks;
}

std::vector<double> layer_panels(const Problem& problem,
                                 const std::vector<double>& centers) {
  const double s = problem.epsilon * problem.beta_star;
  std::set<double> pts;
  constexpr int kBase = 64;
  for (int i = 0; i <= kBase; ++i) pts.insert(-1.0 + 2.0 * i / kBase);
  for (double c : centers) {
    double off = 0.0;
    double w = s / 16.0;
    while (off < 2.0) {
      off += w;
      w *= 2.0;
      const double lo = c - off;
      const double hi = c + off;
      if (lo > -1.0 && lo < 1.0) pts.insert(lo);
      if (hi > -1.0 && hi < 1.0) pts.insert(hi);
    }
  }
  pts.insert(-1.0);
  pts.insert(1.0);
  std::vector<double> breaks;
  for (double p : pts) {
    if (!breaks.empty() && p - breaks.back() < 1e-300) continue;
    breaks.push_back(p);
  }
  return breaks;
}

double norm_energy(const Problem& problem, const FnVD& e,
                   const std::vector<double>& panels) {
  const QuadratureRule q = gauss_rule(10);
  const double eps2 = problem.epsilon * problem.epsilon;
  double total = 0.0;
  for (size_t k = 0; k + 1 < panels.size(); ++k) {
    const double a = panels[k];
    const double len = panels[k + 1] - a;
    for (int i = 0; i < q.order; ++i) {
      const double x = a + len * q.points[i];
      const double w = q.weights[i] * len;
      auto [v, dv] = e(x);
      total += w * (eps2 * dv * dv + problem.b.eval(x) * v * v);
    }
  }
  return std::sqrt(total);
}

double norm_weighted_L2(const Problem& problem,
                        const std::function<double(double)>& log_abs_g,
                        Side side) {
  WeightFn weight{side, problem.epsilon, problem.beta_star};
  const std::vector<double> panels = layer_panels(problem, {-1.0, 1.0});
  const QuadratureRule q = gauss_rule(10);
  double total = 0.0;
  for (size_t k = 0; k + 1 < panels.size(); ++k) {
    const double a = panels[k];
    const double len = panels[k + 1] - a;
    for (int i = 0; i < q.order; ++i) {
      const double x = a + len * q.points[i];
      const double w = q.weights[i] * len;
      const double lg = log_abs_g(x);
      if (std::isnan(lg)) {
        fail(ErrorCode::NonFinite, "log|g| evaluated to NaN at x=" +
                                       std::to_string(x));
      }
      const double term = std::exp(2.0 * (lg + weight.log_eval(x)));
      if (!std::isfinite(term)) {
        fail(ErrorCode::NonFinite,
             "weighted integrand overflow at x=" + std::to_string(x) +
                 " (wrong side pairing?)");
      }
      total += w * term;
    }
  }
  if (!std::isfinite(total)) {
    fail(ErrorCode::NonFinite, "weighted norm accumulated to non-finite value");
  }
  return std::sqrt(total);
}

ConvergenceRow measure_errors(const Problem& problem,
                              const ReferenceSolution& ref,
                              const FeSolution& u_h) {
  const std::vector<double> panels =
      panels_for_mesh(u_h.mesh, problem, {-1.0, 1.0});
  const QuadratureRule q = gauss_rule(10);
  const double eps2 = problem.epsilon * problem.epsilon;

  double acc_energy = 0.0, acc_l2 = 0.0, acc_h1 = 0.0, linf = 0.0;
  auto consider = [&](double x) {
    auto r = ref.eval(x);
    auto uh = eval_fe(u_h, x);
    linf = std::max(linf, std::abs(r.first - uh.first));
  };
  for (size_t k = 0; k + 1 < panels.size(); ++k) {
    const double a = panels[k];
    const double len = panels[k + 1] - a;
    for (int i = 0; i < q.order; ++i) {
      const double x = a + len * q.points[i];
      const double w = q.weights[i] * len;
      auto r = ref.eval(x);
      auto uh = eval_fe(u_h, x);
      const double ev = r.first - uh.first;
      const double edv = r.second - uh.second;
      acc_energy += w * (eps2 * edv * edv + problem.b.eval(x) * ev * ev);
      acc_l2 += w * ev * ev;
      acc_h1 += w * edv * edv;
      linf = std::max(linf, std::abs(ev));
    }
    // extra sup-norm sampling: panel ends plus a short equispaced scan
    consider(a);
    for (int j = 1; j < 8; ++j) consider(a + len * j / 8.0);
  }
  consider(panels.back());

  ConvergenceRow row;
  row.mesh_kind = mesh_kind_name(u_h.mesh.kind.tag);
  row.epsilon = problem.epsilon;
  row.N = u_h.mesh.N;
  row.err_energy = std::sqrt(acc_energy);
  row.err_L2 = std::sqrt(acc_l2);
  row.err_H1semi = std::sqrt(acc_h1);
  row.err_Linf = linf;
  row.out_of_regime = (static_cast<double>(row.N) * problem.epsilon > 1.0);
  return row;
}

std::pair<double, double> lsq_slope(const std::vector<double>& x,
                                    const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(ErrorCode::InsufficientData, "lsq_slope needs >= 2 points");
  }
  const size_t n = x.size();
  double sx = 0.0, sy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double yhat = slope * x[i] + intercept;
    ss_res += (y[i] - yhat) * (y[i] - yhat);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  const double r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  return {slope, r2};
}

namespace {

RateFit fit_one(const std::string& kind, const std::string& field,
                const std::map<int, double>& worst_by_N) {
  std::vector<int> Ns;
  std::vector<double> errs;
  for (const auto& [N, e] : worst_by_N) {
    Ns.push_back(N);
    errs.push_back(e);
  }
  // Preasymptotic guard: with >= 5 N values, drop the smallest.
  if (Ns.size() >= 5) {
    Ns.erase(Ns.begin());
    errs.erase(errs.begin());
  }
  RateFit fit;
  fit.mesh_kind = kind;
  fit.field = field;
  fit.Ns = Ns;
  fit.worst_err = errs;
  std::vector<double> lx, lxln, ly;
  double cmax = -kInf, cmin = kInf;
  for (size_t i = 0; i < Ns.size(); ++i) {
    const double N = Ns[i];
    lx.push_back(std::log(N));
    lxln.push_back(std::log(N / std::log(N)));
    ly.push_back(std::log(errs[i]));
    const double c = errs[i] * N / std::log(N);
    cmax = std::max(cmax, c);
    cmin = std::min(cmin, c);
  }
  std::tie(fit.slope_vs_logN, fit.r2_logN) = lsq_slope(lx, ly);
  std::tie(fit.slope_vs_logNlnN, fit.r2_logNlnN) = lsq_slope(lxln, ly);
  fit.c_ratio = cmax / cmin;
  return fit;
}

}  // namespace

FitReport fit_rates(const ConvergenceTable& table) {
  if (table.rows.empty()) {
    fail(ErrorCode::InsufficientData, "empty convergence table");
  }
  std::set<std::string> kinds;
  for (const auto& r : table.rows) kinds.insert(r.mesh_kind);

  FitReport report;
  for (const std::string& kind : kinds) {
    for (const char* field : {"energy", "L2"}) {
      auto value_of = [&](const ConvergenceRow& r) {
        return field == std::string("energy") ? r.err_energy : r.err_L2;
      };
      std::map<int, double> full, regime;
      for (const auto& r : table.rows) {
        if (r.mesh_kind != kind) continue;
        const double v = value_of(r);
        auto it = full.find(r.N);
        if (it == full.end() || v > it->second) full[r.N] = v;
        if (!r.out_of_regime) {
          auto jt = regime.find(r.N);
          if (jt == regime.end() || v > jt->second) regime[r.N] = v;
        }
      }
      if (full.size() < 3) {
        fail(ErrorCode::InsufficientData,
             "mesh kind '" + kind + "' has fewer than 3 N values");
      }
      report.full.push_back(fit_one(kind, field, full));
      const size_t regime_effective =
          regime.size() >= 5 ? regime.size() - 1 : regime.size();
      if (regime_effective >= 3) {
        report.regime.push_back(fit_one(kind, field, regime));
      }
    }
  }
  return report;
}

}  // namespace sperturb
