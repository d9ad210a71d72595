#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sperturb/acceptance.hpp"
#include "sperturb/analysis.hpp"
#include "sperturb/error.hpp"
#include "sperturb/fem.hpp"
#include "sperturb/harness.hpp"
#include "sperturb/mesh.hpp"
#include "sperturb/nn.hpp"
#include "sperturb/problem.hpp"
#include "sperturb/quadrature.hpp"

namespace {

using namespace sperturb;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Options shared by the config-driven subcommands (converge, nn-suite).
struct CfgOpts {
  std::string config_path;
  std::vector<double> eps;
  std::vector<int> Ns;
  std::vector<std::string> meshes;
  std::string b = "one";
  std::string f = "one";
  int quad_order = 5;
  int oracle_N = 16384;
  std::string out_dir = "out";
  unsigned long long seed = 12345;
  int jobs = 1;
};

void add_cfg_options(CLI::App* cmd, CfgOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--eps", o.eps, "epsilon values (overrides config)");
  cmd->add_option("--N", o.Ns, "element counts, divisible by 4");
  cmd->add_option("--mesh", o.meshes, "mesh kinds: shishkin|exp|bs|uniform");
  cmd->add_option("--b", o.b, "reaction coefficient registry id");
  cmd->add_option("--f", o.f, "load registry id");
  cmd->add_option("--quad-order", o.quad_order, "Gauss points per element");
  cmd->add_option("--oracle-N", o.oracle_N, "fine-grid oracle element count");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "seed for sample-point draws");
  cmd->add_option("--jobs", o.jobs, "parallel sweep cells");
}

RunConfig make_run_config(const CLI::App* cmd, const CfgOpts& o) {
  RunConfig c;
  if (cmd->count("--config")) c = load_config(o.config_path);
  if (cmd->count("--eps")) c.eps = o.eps;
  if (cmd->count("--N")) c.Ns = o.Ns;
  if (cmd->count("--mesh")) {
    c.kinds.clear();
    for (const std::string& m : o.meshes)
      c.kinds.push_back(mesh_kind_from_string(m));
  }
  if (cmd->count("--b")) c.b_id = o.b;
  if (cmd->count("--f")) c.f_id = o.f;
  if (cmd->count("--quad-order")) c.quad_order = o.quad_order;
  if (cmd->count("--oracle-N")) c.oracle_N = o.oracle_N;
  if (cmd->count("--out-dir")) c.out_dir = o.out_dir;
  if (cmd->count("--seed")) c.seed = o.seed;
  if (cmd->count("--jobs")) c.jobs = o.jobs;
  return c;
}

int cmd_solve(double eps, int N, const std::string& mesh_name,
              const std::string& b_id, const std::string& f_id, int quad,
              const std::string& out) {
  Problem pr = make_problem(eps, b_id, f_id);
  Mesh mesh = build_mesh(mesh_kind_from_string(mesh_name), N, pr);
  FeSolution u = solve(pr, mesh, gauss_rule(quad));
  solution_dump_csv(u, out);
  log_msg(LogLevel::Info, "solve: wrote " + out);
  return 0;
}

int cmd_mesh_dump(double eps, int N, const std::string& mesh_name,
                  const std::string& b_id, const std::string& out) {
  Problem pr = make_problem(eps, b_id, "one");
  Mesh mesh = build_mesh(mesh_kind_from_string(mesh_name), N, pr);
  mesh_dump_csv(mesh, out);
  log_msg(LogLevel::Info, "mesh dump: wrote " + out);
  return 0;
}

int cmd_converge(const CLI::App* cmd, const CfgOpts& o) {
  RunConfig cfg = make_run_config(cmd, o);
  SweepResult res = run_sweep(cfg);
  if (!cfg.out_dir.empty() && !res.table.rows.empty()) {
    emit_plotdata(res.table, PlotStyle::LoglogErrVsN, cfg.out_dir);
    emit_plotdata(res.table, PlotStyle::RobustnessVsEps, cfg.out_dir);
  }
  std::printf("rows: %zu, failed cells: %zu\n", res.table.rows.size(),
              res.failures.size());
  for (const std::string& f : res.failures)
    std::printf("failed: %s\n", f.c_str());
  for (const RateFit& f : res.fits.full)
    std::printf(
        "fit %-9s %-6s slope(logN)=%+.3f R2=%.4f slope(logN/lnN)=%+.3f "
        "c_ratio=%.3f\n",
        f.mesh_kind.c_str(), f.field.c_str(), f.slope_vs_logN, f.r2_logN,
        f.slope_vs_logNlnN, f.c_ratio);
  if (!cfg.out_dir.empty())
    std::printf("wrote %s/sweep.csv and %s/fits.json\n", cfg.out_dir.c_str(),
                cfg.out_dir.c_str());
  return res.failures.empty() ? 0 : 2;
}

int cmd_decompose(double eps, const std::string& b_id, const std::string& f_id,
                  const std::string& out) {
  Problem pr = make_problem(eps, b_id, f_id);
  ReferenceSolution ref = closed_form_const(pr);
  Decomposition dec = decompose_const(pr, ref);
  std::ofstream f(out, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open " + out + " for writing");
  f << "x,u0,uBL_minus,uBL_plus,uR\n";
  for (int i = 0; i <= 2000; ++i) {
    const double x = -1.0 + 2.0 * i / 2000.0;
    f << fmt17(x) << ',' << fmt17(dec.u0(x).first) << ','
      << fmt17(dec.uBL_minus(x).first) << ',' << fmt17(dec.uBL_plus(x).first)
      << ',' << fmt17(dec.uR(x).first) << '\n';
  }
  if (!f) fail(ErrorCode::IoError, "write failed for " + out);
  log_msg(LogLevel::Info, "decompose: wrote " + out);
  return 0;
}

int cmd_nn_export(const std::string& from, const std::string& out) {
  auto [nodes, values] = solution_read_csv(from);
  NeuralNet net = cpwl_to_relu(nodes, values);
  nn_export(net, out);
  std::printf("exported net: depth=%d size=%lld width=%d -> %s\n", net.depth(),
              net.size(), net.width(), out.c_str());
  return 0;
}

int cmd_nn_eval(const std::string& net_path, int grid,
                const std::string& out) {
  if (grid < 2) fail(ErrorCode::DomainError, "--grid must be >= 2");
  NeuralNet net = nn_import(net_path);
  if (net.input_dim != 1 || net.output_dim != 1)
    fail(ErrorCode::DimensionMismatch, "nn-eval requires a 1->1 net");
  std::ofstream f(out, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open " + out + " for writing");
  f << "x,R\n";
  for (int i = 0; i < grid; ++i) {
    const double x = -1.0 + 2.0 * i / (grid - 1.0);
    f << fmt17(x) << ',' << fmt17(realize1(net, x)) << '\n';
  }
  if (!f) fail(ErrorCode::IoError, "write failed for " + out);
  log_msg(LogLevel::Info, "nn-eval: wrote " + out);
  return 0;
}

int cmd_nn_verify(const std::string& net_path, const std::string& against,
                  double tol) {
  NeuralNet net = nn_import(net_path);
  auto [nodes, values] = solution_read_csv(against);
  double uinf = 0.0;
  for (double v : values) uinf = std::max(uinf, std::abs(v));
  double max_err = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    max_err = std::max(max_err,
                       std::abs(realize1(net, nodes[i]) - values[i]));
    if (i + 1 < nodes.size()) {  // midpoint: both sides are affine there
      const double xm = 0.5 * (nodes[i] + nodes[i + 1]);
      const double um = 0.5 * (values[i] + values[i + 1]);
      max_err = std::max(max_err, std::abs(realize1(net, xm) - um));
    }
  }
  const double tol_eff = tol * (1.0 + uinf);
  const bool ok = max_err <= tol_eff;
  std::printf("nn-verify: max|R-u| = %s, allowed = %s -> %s\n",
              fmt17(max_err).c_str(), fmt17(tol_eff).c_str(),
              ok ? "PASS" : "FAIL");
  return ok ? 0 : 2;
}

int cmd_nn_suite(const CLI::App* cmd, const CfgOpts& o) {
  RunConfig cfg = make_run_config(cmd, o);
  NnSuiteResult res = run_nn_suite(cfg);
  std::printf("nn suite: %s", res.all_ok ? "all checks passed\n"
                                         : "FAILURES (see report)\n");
  if (!cfg.out_dir.empty())
    std::printf("wrote %s/nn_report.json\n", cfg.out_dir.c_str());
  return res.all_ok ? 0 : 2;
}

int cmd_report(int jobs) {
  std::vector<CriterionResult> results = run_acceptance(jobs);
  bool all = true;
  for (const CriterionResult& r : results) {
    std::printf("%s\n", criterion_line(r).c_str());
    all = all && r.pass;
  }
  std::printf("%s\n", all ? "ALL ACCEPTANCE CRITERIA PASS"
                          : "ACCEPTANCE FAILURES PRESENT");
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "sperturb: P1 FEM on layer-adapted meshes for -eps^2 u'' + b u = f "
      "with neural-network realizations"};
  app.require_subcommand(1);

  // ---- solve
  auto* solve_cmd = app.add_subcommand("solve", "solve one BVP instance");
  double s_eps = 1e-2;
  int s_N = 64, s_quad = 5;
  std::string s_mesh = "shishkin", s_b = "one", s_f = "one",
              s_out = "sol.csv";
  solve_cmd->add_option("--eps", s_eps, "epsilon in (0,1]")->required();
  solve_cmd->add_option("--N", s_N, "elements, divisible by 4")->required();
  solve_cmd->add_option("--mesh", s_mesh, "shishkin|exp|bs|uniform");
  solve_cmd->add_option("--b", s_b, "reaction registry id");
  solve_cmd->add_option("--f", s_f, "load registry id");
  solve_cmd->add_option("--quad-order", s_quad, "Gauss points per element");
  solve_cmd->add_option("--out", s_out, "output CSV (x,u)");

  // ---- mesh dump
  auto* mesh_cmd = app.add_subcommand("mesh", "mesh utilities");
  mesh_cmd->require_subcommand(1);
  auto* dump_cmd = mesh_cmd->add_subcommand("dump", "emit nodes as CSV");
  double m_eps = 1e-2;
  int m_N = 64;
  std::string m_mesh = "shishkin", m_b = "one", m_out = "mesh.csv";
  dump_cmd->add_option("--eps", m_eps, "epsilon in (0,1]")->required();
  dump_cmd->add_option("--N", m_N, "elements, divisible by 4")->required();
  dump_cmd->add_option("--mesh", m_mesh, "shishkin|exp|bs|uniform");
  dump_cmd->add_option("--b", m_b, "reaction registry id");
  dump_cmd->add_option("--out", m_out, "output CSV (i,x_i,h_i)");

  // ---- converge
  auto* conv_cmd =
      app.add_subcommand("converge", "run the eps x N sweep and fit rates");
  CfgOpts conv_opts;
  add_cfg_options(conv_cmd, conv_opts);

  // ---- decompose
  auto* dec_cmd = app.add_subcommand(
      "decompose", "emit the boundary-layer decomposition (constant b)");
  double d_eps = 1e-2;
  std::string d_b = "one", d_f = "one", d_out = "decomp.csv";
  dec_cmd->add_option("--eps", d_eps, "epsilon in (0,1]")->required();
  dec_cmd->add_option("--b", d_b, "reaction registry id (constant)");
  dec_cmd->add_option("--f", d_f, "load registry id");
  dec_cmd->add_option("--out", d_out, "output CSV on a 2001-point grid");

  // ---- nn-export
  auto* nx_cmd = app.add_subcommand(
      "nn-export", "convert a solution CSV to a shallow ReLU net");
  std::string nx_from, nx_out = "net.nn";
  nx_cmd->add_option("--from", nx_from, "solution CSV (x,u)")->required();
  nx_cmd->add_option("--out", nx_out, "network file");

  // ---- nn-eval
  auto* ne_cmd = app.add_subcommand("nn-eval", "evaluate a network on a grid");
  std::string ne_net, ne_out = "vals.csv";
  int ne_grid = 10001;
  ne_cmd->add_option("--net", ne_net, "network file")->required();
  ne_cmd->add_option("--grid", ne_grid, "number of grid points on [-1,1]");
  ne_cmd->add_option("--out", ne_out, "output CSV (x,R)");

  // ---- nn-verify
  auto* nv_cmd = app.add_subcommand(
      "nn-verify", "check a network against a solution CSV");
  std::string nv_net, nv_against;
  double nv_tol = 1e-12;
  nv_cmd->add_option("--net", nv_net, "network file")->required();
  nv_cmd->add_option("--against", nv_against, "solution CSV (x,u)")
      ->required();
  nv_cmd->add_option("--tol", nv_tol,
                     "relative tolerance (scaled by 1 + max|u|)");

  // ---- nn-suite
  auto* ns_cmd =
      app.add_subcommand("nn-suite", "run the neural-network audit suite");
  CfgOpts ns_opts;
  add_cfg_options(ns_cmd, ns_opts);

  // ---- report
  auto* rep_cmd = app.add_subcommand(
      "report", "run all acceptance criteria and print PASS/FAIL lines");
  int r_jobs = 0;
  rep_cmd->add_option("--jobs", r_jobs, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
    if (solve_cmd->parsed())
      return cmd_solve(s_eps, s_N, s_mesh, s_b, s_f, s_quad, s_out);
    if (dump_cmd->parsed())
      return cmd_mesh_dump(m_eps, m_N, m_mesh, m_b, m_out);
    if (conv_cmd->parsed()) return cmd_converge(conv_cmd, conv_opts);
    if (dec_cmd->parsed()) return cmd_decompose(d_eps, d_b, d_f, d_out);
    if (nx_cmd->parsed()) return cmd_nn_export(nx_from, nx_out);
    if (ne_cmd->parsed()) return cmd_nn_eval(ne_net, ne_grid, ne_out);
    if (nv_cmd->parsed()) return cmd_nn_verify(nv_net, nv_against, nv_tol);
    if (ns_cmd->parsed()) return cmd_nn_suite(ns_cmd, ns_opts);
    if (rep_cmd->parsed()) return cmd_report(r_jobs);
    std::fprintf(stderr, "no subcommand\n");
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // --help exits 0; parse errors exit 1
  } catch (const sperturb::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", error_code_name(e.code()),
                 e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
