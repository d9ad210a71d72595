#include "sperturb/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sperturb/error.hpp"

namespace sperturb {

MeshKind mesh_kind_from_string(const std::string& name) {
  if (name == "shishkin") return MeshKind::shishkin();
  if (name == "exp") return MeshKind::exp();
  if (name == "bs") return MeshKind::bakhvalov_shishkin();
  if (name == "uniform") return MeshKind::uniform();
  fail(ErrorCode::DomainError, "unknown mesh kind '" + name + "'");
}

const char* mesh_kind_name(MeshTag tag) {
  switch (tag) {
    case MeshTag::Shishkin: return "shishkin";
    case MeshTag::Exp: return "exp";
    case MeshTag::BakhvalovShishkin: return "bs";
    case MeshTag::Uniform: return "uniform";
  }
  return "?";
}

namespace {

void check_N(int N) {
  if (N < 4 || N % 4 != 0) {
    fail(ErrorCode::BadN,
         "N must be >= 4 and divisible by 4, got " + std::to_string(N));
  }
}

/// phi(t) for the layer-adapted kinds.
double phi_of(MeshTag tag, int N, double t) {
  switch (tag) {
    case MeshTag::Shishkin:
      return 2.0 * t * std::log(static_cast<double>(N));
    case MeshTag::Exp:
      return -std::log1p(-2.0 * t * (1.0 - 2.0 / N));
    case MeshTag::BakhvalovShishkin:
      return -std::log1p(-2.0 * t * (1.0 - 1.0 / N));
    case MeshTag::Uniform:
      break;
  }
  fail(ErrorCode::DomainError, "Uniform mesh has no generating function");
}

/// Analytic element length theta*eps*(phi(t_i) - phi(t_{i-1})) for layer
/// elements, evaluated stably (accurate relative to the length itself).
double layer_h(MeshTag tag, int N, int i, double eps, double theta) {
  double tprev = 2.0 * (i - 1) / N;
  switch (tag) {
    case MeshTag::Shishkin:
      return 4.0 * theta * eps * std::log(static_cast<double>(N)) / N;
    case MeshTag::Exp: {
      // phi(t_i)-phi(t_{i-1}) = -log(1 - delta/psi(t_{i-1})),
      // delta = (4/N)(1 - 2/N).
      double psi_prev = 1.0 - 2.0 * tprev * (1.0 - 2.0 / N);
      double delta = (4.0 / N) * (1.0 - 2.0 / N);
      return theta * eps * (-std::log1p(-delta / psi_prev));
    }
    case MeshTag::BakhvalovShishkin: {
      double psi_prev = 1.0 - 2.0 * tprev * (1.0 - 1.0 / N);
      double delta = (4.0 / N) * (1.0 - 1.0 / N);
      return theta * eps * (-std::log1p(-delta / psi_prev));
    }
    case MeshTag::Uniform:
      break;
  }
  fail(ErrorCode::DomainError, "layer_h: uniform mesh has no layer branch");
}

Mesh three_uniform_patches(MeshKind kind, int N, const Problem& p) {
  // Degenerate case lambda = 1/4: layer patches [-1,-3/4], [3/4,1] with N/4
  // elements each (h = 1/N), coarse patch [-3/4, 3/4] with N/2 elements
  // (h = 3/N).
  Mesh m;
  m.kind = kind;
  m.N = N;
  m.epsilon = p.epsilon;
  m.theta = p.theta;
  m.lambda = 0.25;
  m.degenerate = true;
  m.nodes.assign(N + 1, 0.0);
  m.h.assign(N, 0.0);
  for (int i = 0; i <= N / 4; ++i) m.nodes[i] = -1.0 + static_cast<double>(i) / N;
  for (int i = N / 4; i <= N / 2; ++i)
    m.nodes[i] = -0.75 + 3.0 * (i - N / 4.0) / N;
  m.nodes[N / 2] = 0.0;
  for (int i = N / 2 + 1; i <= N; ++i) m.nodes[i] = -m.nodes[N - i];
  for (int i = 0; i < N; ++i) {
    bool layer = (i < N / 4) || (i >= 3 * N / 4);
    m.h[i] = layer ? 1.0 / N : 3.0 / N;
  }
  return m;
}

}  // namespace

Mesh build_mesh(MeshKind kind, int N, const Problem& problem) {
  check_N(N);
  const double eps = problem.epsilon;
  const double theta = problem.theta;

  if (kind.tag == MeshTag::Uniform) {
    Mesh m;
    m.kind = kind;
    m.N = N;
    m.epsilon = eps;
    m.theta = theta;
    m.lambda = 0.0;
    m.nodes.assign(N + 1, 0.0);
    m.h.assign(N, 2.0 / N);
    for (int i = 0; i <= N / 2; ++i) m.nodes[i] = -1.0 + 2.0 * i / N;
    m.nodes[N / 2] = 0.0;
    for (int i = N / 2 + 1; i <= N; ++i) m.nodes[i] = -m.nodes[N - i];
    return m;
  }

  // Transition offset from the kind's phi endpoint value.
  const double phi_half = phi_of(kind.tag, N, 0.5);
  const double lam_raw = theta * eps * phi_half;
  if (lam_raw >= 0.25 - 1e-15) {
    return three_uniform_patches(kind, N, problem);
  }

  Mesh m;
  m.kind = kind;
  m.N = N;
  m.epsilon = eps;
  m.theta = theta;
  m.lambda = lam_raw;
  m.nodes.assign(N + 1, 0.0);
  m.h.assign(N, 0.0);

  // Left layer: x_i = -1 + theta*eps*phi(2i/N), i = 0..N/4.
  for (int i = 0; i <= N / 4; ++i) {
    m.nodes[i] = -1.0 + theta * eps * phi_of(kind.tag, N, 2.0 * i / N);
  }
  // Coarse region: x_i = -1 + lambda + (4i/N - 1)(1 - lambda), up to x_{N/2}.
  for (int i = N / 4 + 1; i < N / 2; ++i) {
    m.nodes[i] = -1.0 + m.lambda + (4.0 * i / N - 1.0) * (1.0 - m.lambda);
  }
  m.nodes[N / 2] = 0.0;
  // Right half by mirror symmetry (bit-exact x_i = -x_{N-i}).
  for (int i = N / 2 + 1; i <= N; ++i) m.nodes[i] = -m.nodes[N - i];

  // Element lengths from the analytic per-branch formulas.
  const double coarse_h = (4.0 / N) * (1.0 - m.lambda);
  for (int i = 1; i <= N; ++i) {
    if (i <= N / 4) {
      m.h[i - 1] = layer_h(kind.tag, N, i, eps, theta);
    } else if (i <= 3 * N / 4) {
      m.h[i - 1] = coarse_h;
    } else {
      m.h[i - 1] = m.h[N - i];  // mirror of the left layer
    }
  }

  // Sanity: strictly increasing nodes.
  for (int i = 0; i < N; ++i) {
    if (!(m.nodes[i] < m.nodes[i + 1])) {
      fail(ErrorCode::DomainError,
           "mesh nodes not strictly increasing at i=" + std::to_string(i));
    }
  }
  return m;
}

std::pair<double, double> mesh_char(MeshKind kind, int N, double t) {
  check_N(N);
  if (kind.tag == MeshTag::Uniform) {
    fail(ErrorCode::DomainError, "mesh_char is undefined for the uniform mesh");
  }
  if (!(t >= 0.0 && t <= 0.5)) {
    fail(ErrorCode::DomainError,
         "mesh_char parameter t must lie in [0,1/2], got " + std::to_string(t));
  }
  double phi = phi_of(kind.tag, N, t);
  return {phi, std::exp(-phi)};
}

void mesh_dump_csv(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out << "i,x_i,h_i\n";
  char buf[64];
  for (int i = 0; i <= mesh.N; ++i) {
    out << i << ',';
    std::snprintf(buf, sizeof buf, "%.17g", mesh.nodes[i]);
    out << buf << ',';
    if (i > 0) {
      std::snprintf(buf, sizeof buf, "%.17g", mesh.h[i - 1]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failure on '" + path + "'");
}

}  // namespace sperturb
