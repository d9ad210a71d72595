#pragma once

#include <string>
#include <vector>

#include "sperturb/analysis.hpp"
#include "sperturb/mesh.hpp"

namespace sperturb {

/// Sweep configuration. Defaults reproduce the standard desk-scale study.
/// Invariants (checked by run_sweep / run_nn_suite): every N divisible by 4,
/// every eps in (0,1], quad_order >= 2, oracle_N >= 4096 and divisible by 4,
/// jobs >= 1. Cells with N > 1/eps are executed but flagged out_of_regime.
struct RunConfig {
  std::vector<double> eps{1e-2, 1e-3, 1e-4, 1e-6, 1e-8};
  std::string b_id = "one";
  std::string f_id = "one";
  std::vector<MeshKind> kinds{MeshKind::shishkin(), MeshKind::exp(),
                              MeshKind::bakhvalov_shishkin(),
                              MeshKind::uniform()};
  std::vector<int> Ns{16, 32, 64, 128, 256};
  int quad_order = 5;
  int oracle_N = 16384;
  std::string out_dir = "out";
  unsigned long long seed = 12345;
  int jobs = 1;
};

/// JSON (de)serialization of RunConfig. Unknown keys are rejected; absent
/// keys keep their defaults. Throws ParseError (and IoError for the file
/// loader). Schema keys: eps, b, f, meshes, N, quad_order, oracle_N,
/// out_dir, seed, jobs.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

struct SweepResult {
  ConvergenceTable table;
  FitReport fits;
  std::vector<std::string> failures;  ///< "kind,eps,N: message" per bad cell
};

/// Runs the eps x N x mesh-kind sweep. Cells execute independently (up to
/// config.jobs threads); a failing cell is recorded in `failures` and never
/// aborts the rest. Results are merged sorted by (kind, eps, N). Writes
/// <out_dir>/sweep.csv (header mesh,eps,N,err_energy,err_L2,err_H1,err_Linf)
/// and <out_dir>/fits.json before rate checks, so partial results survive an
/// InsufficientData throw from fitting. Reference: closed form when b is
/// constant and f supported, fine-grid oracle otherwise. Identical config
/// yields byte-identical outputs. Pass out_dir="" to skip file output.
SweepResult run_sweep(const RunConfig& config);

struct NnSuiteResult {
  bool all_ok = false;
  std::string report_json;  ///< the full report, also written to disk
};

/// Per-cell CpwL-network audit (exactness at seeded sample points, depth,
/// size, boundary values) plus the tanh-template and deep-ReLU-exponential
/// audits. Writes <out_dir>/nn_report.json (out_dir="" skips the write).
NnSuiteResult run_nn_suite(const RunConfig& config);

/// Audit of the depth-2/size-4 tanh boundary-layer template against
/// exp(-y) on y >= 0: dense grid on [0,50] plus an analytic tail bound.
struct TanhAudit {
  int depth = 0;
  long long size = 0;
  double sup_value_err = 0.0;
  double sup_deriv_err = 0.0;
  double tail_bound = 0.0;
  double required_bound = 0.0;  ///< exp(-1)
  bool ok = false;
};
TanhAudit audit_tanh_template();

/// Audit of the deep-ReLU exponential family at one eps: sup errors for
/// p = 4,6,...,20, the fitted log-error decay slope, and the size budget
/// M(p) <= C p^2 with C calibrated at p = 4.
struct ReluExpPoint {
  int p = 0;
  double sup_err = 0.0;
  int depth = 0;
  long long M = 0;
};
struct ReluExpAudit {
  double eps = 0.0;
  std::vector<ReluExpPoint> points;
  double slope = 0.0;  ///< log sup_err vs p
  double r2 = 0.0;
  double size_C = 0.0;  ///< M(4)/16
  bool size_ok = false;
  bool ok = false;  ///< slope < -0.15 && r2 >= 0.9 && size_ok
};
ReluExpAudit audit_relu_exp(double eps);

enum class PlotStyle { LoglogErrVsN, RobustnessVsEps };

/// Emits gnuplot-compatible whitespace-separated data files per mesh kind
/// plus a JSON manifest (plot_manifest.json) listing every data file with
/// its row count. LoglogErrVsN: one line per table row. RobustnessVsEps:
/// rows grouped into per-eps blocks separated by blank lines.
/// Returns the emitted paths (manifest last). Throws EmptyTable.
std::vector<std::string> emit_plotdata(const ConvergenceTable& table,
                                       PlotStyle style,
                                       const std::string& out_dir);

/// Logging to stderr, gated by the SPERTURB_LOG environment variable
/// (error < info < debug; default error).
enum class LogLevel { Error = 0, Info = 1, Debug = 2 };
LogLevel log_level();
void log_msg(LogLevel level, const std::string& msg);

}  // namespace sperturb
