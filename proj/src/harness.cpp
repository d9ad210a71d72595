#include "sperturb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sperturb/error.hpp"
#include "sperturb/fem.hpp"
#include "sperturb/nn.hpp"
#include "sperturb/problem.hpp"
#include "sperturb/quadrature.hpp"

namespace sperturb {

using nlohmann::json;

LogLevel log_level() {
  static const LogLevel lvl = [] {
    const char* e = std::getenv("SPERTURB_LOG");
    if (!e) return LogLevel::Error;
    std::string s(e);
    if (s == "debug") return LogLevel::Debug;
    if (s == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return lvl;
}

void log_msg(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  const char* tag = level == LogLevel::Error  ? "error"
                    : level == LogLevel::Info ? "info"
                                              : "debug";
  std::fprintf(stderr, "[sperturb %s] %s\n", tag, msg.c_str());
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> kind_names(const std::vector<MeshKind>& kinds) {
  std::vector<std::string> out;
  out.reserve(kinds.size());
  for (const MeshKind& k : kinds) out.push_back(mesh_kind_name(k.tag));
  return out;
}

void check_config(const RunConfig& c) {
  for (double e : c.eps)
    if (!(e > 0.0) || !(e <= 1.0))
      fail(ErrorCode::EpsilonOutOfRange,
           "config eps " + fmt17(e) + " outside (0,1]");
  for (int n : c.Ns)
    if (n < 4 || n % 4 != 0)
      fail(ErrorCode::BadN, "config N " + std::to_string(n) +
                                " must be >= 4 and divisible by 4");
  if (c.quad_order < 2)
    fail(ErrorCode::DomainError, "quad_order must be >= 2");
  if (c.oracle_N < 4096 || c.oracle_N % 4 != 0)
    fail(ErrorCode::BadN, "oracle_N must be >= 4096 and divisible by 4");
  if (c.jobs < 1) fail(ErrorCode::DomainError, "jobs must be >= 1");
  if (c.kinds.empty()) fail(ErrorCode::DomainError, "no mesh kinds configured");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  f << text;
  if (!f) fail(ErrorCode::IoError, "write failed for " + path);
}

json fit_to_json(const RateFit& r) {
  return json{{"mesh", r.mesh_kind},
              {"field", r.field},
              {"N", r.Ns},
              {"worst_err", r.worst_err},
              {"slope_vs_logN", r.slope_vs_logN},
              {"r2_logN", r.r2_logN},
              {"slope_vs_logNlnN", r.slope_vs_logNlnN},
              {"r2_logNlnN", r.r2_logNlnN},
              {"c_ratio", r.c_ratio}};
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::ParseError, "config must be an object");
  RunConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      if (key == "eps") {
        c.eps = it.value().get<std::vector<double>>();
      } else if (key == "b") {
        c.b_id = it.value().get<std::string>();
      } else if (key == "f") {
        c.f_id = it.value().get<std::string>();
      } else if (key == "meshes") {
        c.kinds.clear();
        for (const auto& m : it.value())
          c.kinds.push_back(mesh_kind_from_string(m.get<std::string>()));
      } else if (key == "N") {
        c.Ns = it.value().get<std::vector<int>>();
      } else if (key == "quad_order") {
        c.quad_order = it.value().get<int>();
      } else if (key == "oracle_N") {
        c.oracle_N = it.value().get<int>();
      } else if (key == "out_dir") {
        c.out_dir = it.value().get<std::string>();
      } else if (key == "seed") {
        c.seed = it.value().get<unsigned long long>();
      } else if (key == "jobs") {
        c.jobs = it.value().get<int>();
      } else {
        fail(ErrorCode::ParseError, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config JSON: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::IoError, "cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["eps"] = c.eps;
  j["b"] = c.b_id;
  j["f"] = c.f_id;
  j["meshes"] = kind_names(c.kinds);
  j["N"] = c.Ns;
  j["quad_order"] = c.quad_order;
  j["oracle_N"] = c.oracle_N;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  return j.dump(2);
}

namespace {

struct Cell {
  int kind_idx;
  double eps;
  int N;
};

// Canonical order: kind as configured, then eps ascending, then N ascending.
std::vector<Cell> make_cells(const RunConfig& c) {
  std::vector<double> eps = c.eps;
  std::sort(eps.begin(), eps.end());
  std::vector<int> Ns = c.Ns;
  std::sort(Ns.begin(), Ns.end());
  std::vector<Cell> cells;
  for (int k = 0; k < static_cast<int>(c.kinds.size()); ++k)
    for (double e : eps)
      for (int n : Ns) cells.push_back({k, e, n});
  return cells;
}

std::string cell_label(const RunConfig& c, const Cell& cell) {
  return std::string(mesh_kind_name(c.kinds[cell.kind_idx].tag)) + "," +
         fmt17(cell.eps) + "," + std::to_string(cell.N);
}

}  // namespace

SweepResult run_sweep(const RunConfig& config) {
  check_config(config);
  log_msg(LogLevel::Info, "sweep: " + std::to_string(config.kinds.size()) +
                              " mesh kinds, " +
                              std::to_string(config.eps.size()) + " eps, " +
                              std::to_string(config.Ns.size()) + " N values");

  // References depend only on eps; build them serially up front.
  std::map<double, ReferenceSolution> refs;
  for (double e : config.eps) {
    if (refs.count(e)) continue;
    Problem problem = make_problem(e, config.b_id, config.f_id);
    try {
      refs.emplace(e, closed_form_const(problem));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::UnsupportedData) throw;
      log_msg(LogLevel::Info,
              "eps " + fmt17(e) + ": no closed form, using fine-grid oracle");
      refs.emplace(e, fine_grid_oracle(problem, config.oracle_N));
    }
  }
  const QuadratureRule quad = gauss_rule(config.quad_order);

  const std::vector<Cell> cells = make_cells(config);
  std::vector<ConvergenceRow> rows(cells.size());
  std::vector<char> ok(cells.size(), 0);
  std::vector<std::string> fails(cells.size());

  auto run_cell = [&](size_t i) {
    const Cell& cell = cells[i];
    try {
      Problem problem = make_problem(cell.eps, config.b_id, config.f_id);
      Mesh mesh = build_mesh(config.kinds[cell.kind_idx], cell.N, problem);
      FeSolution u_h = solve(problem, mesh, quad);
      rows[i] = measure_errors(problem, refs.at(cell.eps), u_h);
      ok[i] = 1;
    } catch (const std::exception& ex) {
      fails[i] = cell_label(config, cell) + ": " + ex.what();
      log_msg(LogLevel::Error, "cell failed: " + fails[i]);
    }
  };

  const int jobs =
      std::max(1, std::min<int>(config.jobs,
                                static_cast<int>(cells.size() ? cells.size() : 1)));
  if (jobs == 1) {
    for (size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i = next.fetch_add(1); i < cells.size();
           i = next.fetch_add(1))
        run_cell(i);
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  SweepResult result;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (ok[i])
      result.table.rows.push_back(rows[i]);
    else if (!fails[i].empty())
      result.failures.push_back(fails[i]);
  }

  const bool to_disk = !config.out_dir.empty();
  if (to_disk) {
    std::filesystem::create_directories(config.out_dir);
    std::ostringstream csv;
    csv << "mesh,eps,N,err_energy,err_L2,err_H1,err_Linf\n";
    for (const ConvergenceRow& r : result.table.rows)
      csv << r.mesh_kind << ',' << fmt17(r.epsilon) << ',' << r.N << ','
          << fmt17(r.err_energy) << ',' << fmt17(r.err_L2) << ','
          << fmt17(r.err_H1semi) << ',' << fmt17(r.err_Linf) << '\n';
    write_text_file(config.out_dir + "/sweep.csv", csv.str());
  }

  // Fitting may throw InsufficientData (e.g. empty N list); the CSV above is
  // already flushed so partial results survive.
  result.fits = fit_rates(result.table);

  if (to_disk) {
    json j;
    j["config"] = json::parse(config_to_json(config));
    j["failures"] = result.failures;
    json jrows = json::array();
    for (const ConvergenceRow& r : result.table.rows)
      jrows.push_back(json{{"mesh", r.mesh_kind},
                           {"eps", r.epsilon},
                           {"N", r.N},
                           {"err_energy", r.err_energy},
                           {"err_L2", r.err_L2},
                           {"err_H1", r.err_H1semi},
                           {"err_Linf", r.err_Linf},
                           {"out_of_regime", r.out_of_regime}});
    j["rows"] = jrows;
    json jfull = json::array(), jreg = json::array();
    for (const RateFit& r : result.fits.full) jfull.push_back(fit_to_json(r));
    for (const RateFit& r : result.fits.regime) jreg.push_back(fit_to_json(r));
    j["fits"] = json{{"full", jfull}, {"regime", jreg}};
    write_text_file(config.out_dir + "/fits.json", j.dump(2) + "\n");
  }
  return result;
}

TanhAudit audit_tanh_template() {
  // With eps = 1, b = 1 and the left side, the net's y-coordinate is
  // y = 1 + x, so y-space audits evaluate the actual composed net.
  const NeuralNet net = tanh_layer_net(Side::Minus, 1.0, 1.0);
  TanhAudit a;
  a.depth = net.depth();
  a.size = net.size();
  const int n = 100000;
  for (int i = 0; i <= n; ++i) {
    const double y = 50.0 * i / n;
    a.sup_value_err = std::max(
        a.sup_value_err, std::abs(realize1(net, y - 1.0) - std::exp(-y)));
    a.sup_deriv_err = std::max(
        a.sup_deriv_err, std::abs(realize_d1(net, y - 1.0) + std::exp(-y)));
  }
  // Tail y > 50: the net value ~ (16/3) e^{-y-2gamma} and exp(-y) are both
  // monotone decreasing there and already < 1e-20 at y = 50.
  a.tail_bound = 4.0 * std::exp(-50.0);
  a.required_bound = std::exp(-1.0);
  a.ok = (std::max(a.sup_value_err, a.sup_deriv_err) + a.tail_bound) <=
         a.required_bound;
  return a;
}

namespace {

// Sup error of the deep-ReLU exponential net against exp(-y) sampled along
// the mapped x interval, y in [0, min(Y, 40)] uniform + log-spaced near 0.
double relu_exp_sup_err(const NeuralNet& net, double eps, double b_const) {
  const double sqb = std::sqrt(b_const);
  const double ycap = std::min(2.0 * sqb / eps, 40.0);
  double sup = 0.0;
  auto probe = [&](double y) {
    const double x = std::min(1.0, -1.0 + eps * y / sqb);
    const double got = realize1(net, x);
    const double want = std::exp(-sqb * (1.0 + x) / eps);
    sup = std::max(sup, std::abs(got - want));
  };
  const int n = 2001;
  for (int i = 0; i <= n; ++i) probe(ycap * i / n);
  for (int i = 0; i <= n; ++i)
    probe(std::exp(std::log(1e-4) +
                   (std::log(ycap) - std::log(1e-4)) * i / n));
  return sup;
}

}  // namespace

ReluExpAudit audit_relu_exp(double eps) {
  ReluExpAudit a;
  a.eps = eps;
  std::vector<double> ps, logerr;
  long long M4 = 0;
  a.size_ok = true;
  for (int p = 4; p <= 20; p += 2) {
    NeuralNet net = relu_exp_net(p, eps, Side::Minus, 1.0);
    ReluExpPoint pt;
    pt.p = p;
    pt.sup_err = relu_exp_sup_err(net, eps, 1.0);
    pt.depth = net.depth();
    pt.M = net.size();
    if (p == 4) M4 = pt.M;
    a.size_C = static_cast<double>(M4) / 16.0;
    if (static_cast<double>(pt.M) > a.size_C * p * p + 1e-9) a.size_ok = false;
    a.points.push_back(pt);
    ps.push_back(p);
    logerr.push_back(std::log(std::max(pt.sup_err, 1e-300)));
  }
  auto [slope, r2] = lsq_slope(ps, logerr);
  a.slope = slope;
  a.r2 = r2;
  a.ok = (a.slope < -0.15) && (a.r2 >= 0.9) && a.size_ok;
  return a;
}

namespace {

json tanh_audit_json(const TanhAudit& a) {
  return json{{"depth", a.depth},
              {"size", a.size},
              {"sup_value_err", a.sup_value_err},
              {"sup_deriv_err", a.sup_deriv_err},
              {"tail_bound", a.tail_bound},
              {"required_bound", a.required_bound},
              {"ok", a.ok}};
}

json relu_exp_audit_json(const ReluExpAudit& a) {
  json points = json::array();
  for (const ReluExpPoint& pt : a.points)
    points.push_back(json{{"p", pt.p},
                          {"sup_err", pt.sup_err},
                          {"depth", pt.depth},
                          {"M", pt.M}});
  return json{{"eps", a.eps},
              {"points", points},
              {"slope_log_err_vs_p", a.slope},
              {"r2", a.r2},
              {"size_C_at_p4", a.size_C},
              {"size_ok", a.size_ok},
              {"ok", a.ok}};
}

}  // namespace

NnSuiteResult run_nn_suite(const RunConfig& config) {
  check_config(config);
  const QuadratureRule quad = gauss_rule(config.quad_order);
  bool all_ok = true;

  json cases = json::array();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> eps = config.eps;
  std::sort(eps.begin(), eps.end());
  std::vector<int> Ns = config.Ns;
  std::sort(Ns.begin(), Ns.end());

  for (const MeshKind& kind : config.kinds)
    for (double e : eps)
      for (int n : Ns) {
        json c;
        c["mesh"] = mesh_kind_name(kind.tag);
        c["eps"] = e;
        c["N"] = n;
        try {
          Problem problem = make_problem(e, config.b_id, config.f_id);
          Mesh mesh = build_mesh(kind, n, problem);
          FeSolution u_h = solve(problem, mesh, quad);
          NeuralNet net = cpwl_to_relu(u_h);
          double uinf = 0.0;
          for (double v : u_h.coeffs) uinf = std::max(uinf, std::abs(v));
          const double tol = 1e-12 * (1.0 + uinf);
          double max_err = 0.0;
          for (int s = 0; s < 10000; ++s) {
            const double x = unif(rng);
            max_err = std::max(
                std::abs(realize1(net, x) - eval_fe(u_h, x).first), max_err);
          }
          const double bc_m = std::abs(realize1(net, -1.0));
          const double bc_p = std::abs(realize1(net, 1.0));
          c["depth"] = net.depth();
          c["size"] = net.size();
          c["size_budget"] = 3 * n;
          c["width"] = net.width();
          c["max_err"] = max_err;
          c["tol"] = tol;
          c["bc_minus"] = bc_m;
          c["bc_plus"] = bc_p;
          const bool ok = net.depth() == 2 && net.size() <= 3 * n &&
                          max_err <= tol && bc_m <= 1e-12 && bc_p <= 1e-12;
          c["ok"] = ok;
          all_ok = all_ok && ok;
        } catch (const std::exception& ex) {
          c["error"] = ex.what();
          c["ok"] = false;
          all_ok = false;
        }
        cases.push_back(c);
      }

  json report;
  report["config"] = json::parse(config_to_json(config));
  report["cases"] = cases;
  const TanhAudit ta = audit_tanh_template();
  report["tanh"] = tanh_audit_json(ta);
  all_ok = all_ok && ta.ok;
  json rexp = json::array();
  for (double e : {1e-1, 1e-2}) {
    ReluExpAudit a = audit_relu_exp(e);
    all_ok = all_ok && a.ok;
    rexp.push_back(relu_exp_audit_json(a));
  }
  report["relu_exp"] = rexp;
  report["all_ok"] = all_ok;

  NnSuiteResult res;
  res.all_ok = all_ok;
  res.report_json = report.dump(2) + "\n";
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    write_text_file(config.out_dir + "/nn_report.json", res.report_json);
  }
  return res;
}

std::vector<std::string> emit_plotdata(const ConvergenceTable& table,
                                       PlotStyle style,
                                       const std::string& out_dir) {
  if (table.rows.empty()) fail(ErrorCode::EmptyTable, "no rows to plot");
  std::filesystem::create_directories(out_dir);

  // Kinds in order of first appearance (the sweep emits them sorted).
  std::vector<std::string> kinds;
  for (const ConvergenceRow& r : table.rows)
    if (std::find(kinds.begin(), kinds.end(), r.mesh_kind) == kinds.end())
      kinds.push_back(r.mesh_kind);

  const std::string style_name = style == PlotStyle::LoglogErrVsN
                                     ? "loglog_err_vs_N"
                                     : "robustness_vs_eps";
  std::vector<std::string> paths;
  json manifest;
  manifest["style"] = style_name;
  json files = json::array();

  for (const std::string& kind : kinds) {
    std::vector<const ConvergenceRow*> rows;
    for (const ConvergenceRow& r : table.rows)
      if (r.mesh_kind == kind) rows.push_back(&r);

    std::ostringstream out;
    int data_lines = 0;
    if (style == PlotStyle::LoglogErrVsN) {
      out << "# N eps err_energy err_L2 err_H1 err_Linf\n";
      for (const ConvergenceRow* r : rows) {
        out << r->N << ' ' << fmt17(r->epsilon) << ' ' << fmt17(r->err_energy)
            << ' ' << fmt17(r->err_L2) << ' ' << fmt17(r->err_H1semi) << ' '
            << fmt17(r->err_Linf) << '\n';
        ++data_lines;
      }
    } else {
      out << "# eps N err_energy err_L2 err_H1 err_Linf\n";
      std::vector<double> eps;
      for (const ConvergenceRow* r : rows)
        if (std::find(eps.begin(), eps.end(), r->epsilon) == eps.end())
          eps.push_back(r->epsilon);
      std::sort(eps.begin(), eps.end());
      bool first = true;
      for (double e : eps) {
        if (!first) out << '\n';
        first = false;
        out << "# eps = " << fmt17(e) << '\n';
        for (const ConvergenceRow* r : rows)
          if (r->epsilon == e) {
            out << fmt17(r->epsilon) << ' ' << r->N << ' '
                << fmt17(r->err_energy) << ' ' << fmt17(r->err_L2) << ' '
                << fmt17(r->err_H1semi) << ' ' << fmt17(r->err_Linf) << '\n';
            ++data_lines;
          }
      }
    }
    const std::string path = out_dir + "/" + style_name + "_" + kind + ".dat";
    write_text_file(path, out.str());
    paths.push_back(path);
    files.push_back(json{{"path", path}, {"rows", data_lines}});
  }

  manifest["files"] = files;
  const std::string mpath = out_dir + "/plot_manifest_" + style_name + ".json";
  write_text_file(mpath, manifest.dump(2) + "\n");
  paths.push_back(mpath);
  return paths;
}

}  // namespace sperturb
