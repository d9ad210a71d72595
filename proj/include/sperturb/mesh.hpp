#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sperturb/problem.hpp"

namespace sperturb {

/// Supported partitions of [-1,1].
enum class MeshTag { Shishkin, Exp, BakhvalovShishkin, Uniform };

/// Mesh family descriptor. `alpha` is the S-type normalization parameter
/// (phi(1/2) = ln(alpha * N)): 1 for Shishkin and Bakhvalov-Shishkin, 1/2 for
/// the exponentially graded mesh; unused for Uniform.
struct MeshKind {
  MeshTag tag = MeshTag::Shishkin;
  double alpha = 1.0;

  static MeshKind shishkin() { return {MeshTag::Shishkin, 1.0}; }
  static MeshKind exp() { return {MeshTag::Exp, 0.5}; }
  static MeshKind bakhvalov_shishkin() { return {MeshTag::BakhvalovShishkin, 1.0}; }
  static MeshKind uniform() { return {MeshTag::Uniform, 1.0}; }
};

/// Parses "shishkin" | "exp" | "bs" | "uniform". Throws DomainError.
MeshKind mesh_kind_from_string(const std::string& name);
const char* mesh_kind_name(MeshTag tag);

/// A partition -1 = x_0 < x_1 < ... < x_N = 1.
///
/// For layer-adapted kinds the transition offset is
///   lambda = min{ theta * eps * phi(1/2), 1/4 },
/// where phi(1/2) = ln N for Shishkin and Bakhvalov-Shishkin and ln(N/2) for
/// the exponential mesh. When theta*eps*phi(1/2) >= 1/4 (to within 1e-15) the
/// mesh degenerates to three uniform patches with lambda = 1/4.
///
/// All kinds are symmetric: x_i + x_{N-i} = 0 (bit-exact by mirror
/// construction). Element lengths h_i = x_i - x_{i-1} are stored from the
/// analytic per-branch formulas so that layer-element lengths are accurate
/// relative to themselves even when h_i << |x_i|.
struct Mesh {
  MeshKind kind;
  int N = 0;               ///< number of elements; >= 4, divisible by 4
  double epsilon = 0.0;
  double theta = 0.0;
  double lambda = 0.0;     ///< transition offset (0 for Uniform)
  bool degenerate = false; ///< true when the lambda = 1/4 fallback was taken
  std::vector<double> nodes;  ///< size N+1
  std::vector<double> h;      ///< size N; h[i] = x_{i+1} - x_i
};

/// Builds the requested mesh. Throws BadN if N < 4 or N % 4 != 0.
Mesh build_mesh(MeshKind kind, int N, const Problem& problem);

/// Evaluates the mesh-generating function phi and the characterization
/// psi = exp(-phi) at t in [0,1/2]. Throws DomainError for t outside [0,1/2]
/// or for the Uniform kind (which has no generating function).
std::pair<double, double> mesh_char(MeshKind kind, int N, double t);

/// Writes the mesh as CSV: header "i,x_i,h_i" (h_0 empty), 17 significant
/// digits. Throws IoError.
void mesh_dump_csv(const Mesh& mesh, const std::string& path);

}  // namespace sperturb
