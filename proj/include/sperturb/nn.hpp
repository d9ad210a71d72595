#pragma once

#include <string>
#include <vector>

#include "sperturb/analysis.hpp"
#include "sperturb/fem.hpp"

namespace sperturb {

/// Per-neuron activation tag. No activation is applied in the last layer
/// (all its tags must be Identity).
enum class Act { Relu, Tanh, Identity };

const char* act_name(Act a);

/// One affine layer: out = act(A * in + c) componentwise, where act may
/// differ per neuron (heterogeneous layers combine relu and tanh units).
struct Layer {
  int rows = 0;
  int cols = 0;
  std::vector<double> A;    ///< row-major, rows*cols
  std::vector<double> c;    ///< size rows
  std::vector<Act> act;     ///< size rows
};

/// Feedforward network without skip connections.
/// Metrics: depth = number of layers, size = count of nonzero weight and bias
/// entries, width = max neuron count over hidden layers.
struct NeuralNet {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<Layer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  long long size() const;
  int width() const;
};

/// Checks the dimension chain and the identity-tagged last layer.
/// Throws DimensionMismatch.
void validate(const NeuralNet& net);

/// Forward pass x_l = act(A_l x_{l-1} + c_l), no activation on the last
/// layer. Affine accumulation runs in compensated (double-double) arithmetic:
/// exact piecewise-linear representations of boundary-layer FE solutions have
/// hidden slopes of size O(1/h) whose telescoping sum cancels catastrophically
/// in plain double. Throws DimensionMismatch if x size != input_dim.
std::vector<double> realize(const NeuralNet& net, const std::vector<double>& x);

/// Scalar convenience wrapper (input_dim = output_dim = 1 required).
double realize1(const NeuralNet& net, double x);

/// Derivative of the realization by the forward chain rule, with the
/// convention ReLU'(0) = 0 (consistent with eval_fe right-element
/// tie-breaking on the measure-zero kink set).
/// Requires input_dim = output_dim = 1 (DimensionMismatch otherwise).
double realize_d1(const NeuralNet& net, double x);

/// Exact shallow-ReLU representation of the continuous piecewise-linear
/// function through (nodes[j], values[j]):
///   R(t) = values[0] + sum_j w_j ReLU(t - nodes[j-1]),
/// depth 2, one hidden neuron per element. Hidden weights/biases depend only
/// on the partition. Output weights are slope increments, refined greedily so
/// the realization interpolates every nodal value to machine accuracy even
/// when slopes are O(1/h). Throws BadPartition for non-increasing nodes or a
/// size mismatch.
NeuralNet cpwl_to_relu(const std::vector<double>& nodes,
                       const std::vector<double>& values);
NeuralNet cpwl_to_relu(const FeSolution& u);

/// Depth-2, size-4 net with a single tanh neuron approximating the boundary
/// layer exp(-sqrt(b)(1 -/+ x)/eps) on [-1,1]:
///   R = d * (1 - tanh(y/2 + gamma)),  y = sqrt(b)(1 -/+ x)/eps,
/// with exp(2*gamma) = 3 and d = 8/3. Over y >= 0 the sup error is exactly
/// 1/3 (attained at y = 0) and the sup derivative error is ~0.1549; both are
/// <= exp(-1). Throws DomainError for epsilon outside (0,1] or b <= 0.
NeuralNet tanh_layer_net(Side side, double epsilon, double b_const);

/// Sawtooth-composition approximation of x^2 on [0,1]:
/// depth m+1, sup error <= 2^(-2m-2), exact at 0 and 1.
/// Throws DomainError for m < 1.
NeuralNet relu_square_gadget(int m);

/// Two-input multiplication net from the polarization identity
/// xy = ((x+y)^2 - x^2 - y^2)/2 with squares taken on |.|/(2*bound):
/// depth m+2, sup error <= 6*bound^2*2^(-2m-2) on [-bound,bound]^2.
/// Throws DomainError for m < 1 or bound <= 0.
NeuralNet relu_product_gadget(int m, double bound);

/// Deep strict-ReLU approximation of the boundary layer
/// exp(-sqrt(b)(1 -/+ x)/eps) on [-1,1]. Construction: scale the layer
/// argument y in [0, 2 sqrt(b)/eps] to z = y/2^K in [0,1] with
/// K = ceil(log2(2 sqrt(b)/eps)); evaluate the degree-max(1, floor(p/2))
/// truncated Taylor polynomial of exp(-z) by Horner with product gadgets
/// (m = p); square the result K times (repeated squaring turns exp(-z) into
/// exp(-y)); clamp the output to [0,1] with two ReLU units.
/// Sup error decays exponentially in p. Throws POutOfRange for p outside
/// [1,24], DomainError for epsilon outside (0,1] or b <= 0.
NeuralNet relu_exp_net(int p, double epsilon, Side side, double b_const);

/// Weighted parallel combination: R(result) = sum_i weights[i] * R(nets[i]).
/// Shallower nets are padded to the common depth by turning their output into
/// a shifted nonnegative ReLU carry channel (shift = 1 + interval bound of
/// |R| on [-1,1], subtracted again in the final combination), so strict-ReLU
/// nets stay strict-ReLU. Throws DimensionMismatch unless every net is 1->1
/// and weights.size() == nets.size().
NeuralNet parallelize(const std::vector<NeuralNet>& nets,
                      const std::vector<double>& weights);

/// Text serialization, lossless for doubles (17 significant digits):
///   NNv1 <L> <input_dim> <output_dim>
///   per layer: "layer <rows> <cols> <act>" (act a single tag or a
///   comma-list, one tag per neuron), <rows> weight lines, one bias line.
/// Throws IoError / ParseError.
void nn_export(const NeuralNet& net, const std::string& path);
NeuralNet nn_import(const std::string& path);

}  // namespace sperturb
