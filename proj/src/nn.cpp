#include "sperturb/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sperturb/dd.hpp"
#include "sperturb/error.hpp"

namespace sperturb {

const char* act_name(Act a) {
  switch (a) {
    case Act::Relu: return "relu";
    case Act::Tanh: return "tanh";
    case Act::Identity: return "identity";
  }
  return "?";
}

long long NeuralNet::size() const {
  long long m = 0;
  for (const Layer& l : layers) {
    for (double v : l.A)
      if (v != 0.0) ++m;
    for (double v : l.c)
      if (v != 0.0) ++m;
  }
  return m;
}

int NeuralNet::width() const {
  int w = 0;
  for (int l = 0; l + 1 < static_cast<int>(layers.size()); ++l)
    w = std::max(w, layers[l].rows);
  return w;
}

void validate(const NeuralNet& net) {
  if (net.layers.empty()) fail(ErrorCode::DimensionMismatch, "net has no layers");
  if (net.input_dim < 1 || net.output_dim < 1)
    fail(ErrorCode::DimensionMismatch, "nonpositive net dimension");
  int prev = net.input_dim;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& lay = net.layers[l];
    if (lay.rows < 1 || lay.cols != prev)
      fail(ErrorCode::DimensionMismatch,
           "layer " + std::to_string(l + 1) + " shape breaks the dimension chain");
    if (lay.A.size() != static_cast<size_t>(lay.rows) * lay.cols ||
        lay.c.size() != static_cast<size_t>(lay.rows) ||
        lay.act.size() != static_cast<size_t>(lay.rows))
      fail(ErrorCode::DimensionMismatch,
           "layer " + std::to_string(l + 1) + " storage sizes inconsistent");
    prev = lay.rows;
  }
  const Layer& last = net.layers.back();
  if (last.rows != net.output_dim)
    fail(ErrorCode::DimensionMismatch, "last layer rows != output_dim");
  for (Act a : last.act)
    if (a != Act::Identity)
      fail(ErrorCode::DimensionMismatch, "last layer must be activation-free");
}

namespace {

// Compensated forward pass. Affine parts accumulate in double-double; tanh
// collapses its argument to double (the transcendental dominates any benefit).
std::vector<DD> forward_dd(const NeuralNet& net, const std::vector<double>& x) {
  std::vector<DD> cur(x.size());
  for (size_t i = 0; i < x.size(); ++i) cur[i] = DD{x[i], 0.0};
  std::vector<DD> next;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& lay = net.layers[l];
    const bool last = (l + 1 == net.layers.size());
    next.assign(lay.rows, DD{0.0, 0.0});
    for (int r = 0; r < lay.rows; ++r) {
      DD acc{lay.c[r], 0.0};
      const double* row = lay.A.data() + static_cast<size_t>(r) * lay.cols;
      for (int j = 0; j < lay.cols; ++j)
        if (row[j] != 0.0) acc = dd_fma(acc, row[j], cur[j]);
      if (!last) {
        switch (lay.act[r]) {
          case Act::Relu:
            if (acc.hi + acc.lo <= 0.0) acc = DD{0.0, 0.0};
            break;
          case Act::Tanh:
            acc = DD{std::tanh(acc.hi + acc.lo), 0.0};
            break;
          case Act::Identity:
            break;
        }
      }
      next[r] = acc;
    }
    cur.swap(next);
  }
  return cur;
}

}  // namespace

std::vector<double> realize(const NeuralNet& net, const std::vector<double>& x) {
  validate(net);
  if (static_cast<int>(x.size()) != net.input_dim)
    fail(ErrorCode::DimensionMismatch, "input size != input_dim");
  std::vector<DD> out = forward_dd(net, x);
  std::vector<double> res(out.size());
  for (size_t i = 0; i < out.size(); ++i) res[i] = out[i].hi + out[i].lo;
  return res;
}

double realize1(const NeuralNet& net, double x) {
  if (net.input_dim != 1 || net.output_dim != 1)
    fail(ErrorCode::DimensionMismatch, "realize1 requires a 1->1 net");
  return realize(net, {x})[0];
}

double realize_d1(const NeuralNet& net, double x) {
  validate(net);
  if (net.input_dim != 1 || net.output_dim != 1)
    fail(ErrorCode::DimensionMismatch, "realize_d1 requires a 1->1 net");
  std::vector<DD> val(1, DD{x, 0.0});
  std::vector<DD> der(1, DD{1.0, 0.0});
  std::vector<DD> nval, nder;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& lay = net.layers[l];
    const bool last = (l + 1 == net.layers.size());
    nval.assign(lay.rows, DD{0.0, 0.0});
    nder.assign(lay.rows, DD{0.0, 0.0});
    for (int r = 0; r < lay.rows; ++r) {
      DD v{lay.c[r], 0.0};
      DD d{0.0, 0.0};
      const double* row = lay.A.data() + static_cast<size_t>(r) * lay.cols;
      for (int j = 0; j < lay.cols; ++j)
        if (row[j] != 0.0) {
          v = dd_fma(v, row[j], val[j]);
          d = dd_fma(d, row[j], der[j]);
        }
      if (!last) {
        switch (lay.act[r]) {
          case Act::Relu:
            if (v.hi + v.lo <= 0.0) {  // ReLU'(0) := 0
              v = DD{0.0, 0.0};
              d = DD{0.0, 0.0};
            }
            break;
          case Act::Tanh: {
            const double t = std::tanh(v.hi + v.lo);
            v = DD{t, 0.0};
            d = dd_mul(d, 1.0 - t * t);
            break;
          }
          case Act::Identity:
            break;
        }
      }
      nval[r] = v;
      nder[r] = d;
    }
    val.swap(nval);
    der.swap(nder);
  }
  return der[0].hi + der[0].lo;
}

NeuralNet cpwl_to_relu(const std::vector<double>& nodes,
                       const std::vector<double>& values) {
  const int n = static_cast<int>(nodes.size());
  if (n < 2 || values.size() != nodes.size())
    fail(ErrorCode::BadPartition, "need >= 2 nodes and matching values");
  for (int i = 1; i < n; ++i)
    if (!(nodes[i] > nodes[i - 1]))
      fail(ErrorCode::BadPartition, "nodes must be strictly increasing");
  const int m = n - 1;  // hidden units, one per element

  NeuralNet net;
  net.input_dim = 1;
  net.output_dim = 1;
  Layer hid;
  hid.rows = m;
  hid.cols = 1;
  hid.A.assign(m, 1.0);
  hid.c.resize(m);
  hid.act.assign(m, Act::Relu);
  for (int j = 0; j < m; ++j) hid.c[j] = -nodes[j];

  // Greedy output weights: choose w_j so the realization (with all previous
  // w already rounded to double) hits values[j] exactly at nodes[j]. Running
  // slope and realized nodal value are tracked in double-double.
  Layer out;
  out.rows = 1;
  out.cols = m;
  out.A.resize(m);
  out.c.assign(1, values[0]);
  out.act.assign(1, Act::Identity);
  DD slope{0.0, 0.0};   // sum of already-chosen w_k
  DD value{values[0], 0.0};  // realized value at the current node
  for (int j = 1; j <= m; ++j) {
    const DD h = two_sum(nodes[j], -nodes[j - 1]);
    const DD pred = dd_add(value, dd_mul(slope, h));  // value with w_j = 0
    const DD need = dd_sub(DD{values[j], 0.0}, pred);
    const double w = (need.hi + need.lo) / (h.hi + h.lo);
    out.A[j - 1] = w;
    slope = dd_add(slope, w);
    value = dd_add(pred, dd_mul(h, w));
  }
  net.layers = {std::move(hid), std::move(out)};
  return net;
}

NeuralNet cpwl_to_relu(const FeSolution& u) {
  return cpwl_to_relu(u.mesh.nodes, u.coeffs);
}

NeuralNet tanh_layer_net(Side side, double epsilon, double b_const) {
  if (!(epsilon > 0.0) || !(epsilon <= 1.0))
    fail(ErrorCode::DomainError, "epsilon must lie in (0,1]");
  if (!(b_const > 0.0)) fail(ErrorCode::DomainError, "b must be positive");
  const double mu2 = std::sqrt(b_const) / (2.0 * epsilon);  // y/2 coefficient
  const double gamma = 0.5 * std::log(3.0);
  const double d = 8.0 / 3.0;

  NeuralNet net;
  net.input_dim = 1;
  net.output_dim = 1;
  Layer hid;
  hid.rows = 1;
  hid.cols = 1;
  // y = sqrt(b)(1+x)/eps on the left side, sqrt(b)(1-x)/eps on the right.
  hid.A = {side == Side::Minus ? mu2 : -mu2};
  hid.c = {mu2 + gamma};
  hid.act = {Act::Tanh};
  Layer out;
  out.rows = 1;
  out.cols = 1;
  out.A = {-d};
  out.c = {d};
  out.act = {Act::Identity};
  net.layers = {std::move(hid), std::move(out)};
  return net;
}

namespace {

Layer make_layer(int rows, int cols, Act a) {
  Layer l;
  l.rows = rows;
  l.cols = cols;
  l.A.assign(static_cast<size_t>(rows) * cols, 0.0);
  l.c.assign(rows, 0.0);
  l.act.assign(rows, a);
  return l;
}

inline void set(Layer& l, int r, int j, double v) {
  l.A[static_cast<size_t>(r) * l.cols + j] = v;
}

}  // namespace

NeuralNet relu_square_gadget(int m) {
  if (m < 1) fail(ErrorCode::DomainError, "square gadget needs m >= 1");
  NeuralNet net;
  net.input_dim = 1;
  net.output_dim = 1;

  // Channels: [t, r, acc]. t tracks the sawtooth iterate, r its shifted copy
  // (so 2t - 4r is the next tent map value), acc the partial series
  // x - sum_l g_l(x)/4^l which converges to x^2.
  Layer l1 = make_layer(3, 1, Act::Relu);
  set(l1, 0, 0, 1.0);
  set(l1, 1, 0, 1.0);
  l1.c[1] = -0.5;
  set(l1, 2, 0, 1.0);
  net.layers.push_back(std::move(l1));

  for (int l = 2; l <= m; ++l) {
    Layer mid = make_layer(3, 3, Act::Relu);
    const double s = std::ldexp(1.0, -2 * (l - 1));  // 4^-(l-1)
    set(mid, 0, 0, 2.0);
    set(mid, 0, 1, -4.0);
    set(mid, 1, 0, 2.0);
    set(mid, 1, 1, -4.0);
    mid.c[1] = -0.5;
    set(mid, 2, 0, -2.0 * s);
    set(mid, 2, 1, 4.0 * s);
    set(mid, 2, 2, 1.0);
    net.layers.push_back(std::move(mid));
  }

  Layer out = make_layer(1, 3, Act::Identity);
  const double s = std::ldexp(1.0, -2 * m);  // 4^-m
  set(out, 0, 0, -2.0 * s);
  set(out, 0, 1, 4.0 * s);
  set(out, 0, 2, 1.0);
  net.layers.push_back(std::move(out));
  return net;
}

NeuralNet relu_product_gadget(int m, double bound) {
  if (m < 1) fail(ErrorCode::DomainError, "product gadget needs m >= 1");
  if (!(bound > 0.0)) fail(ErrorCode::DomainError, "bound must be positive");
  const double B = bound;
  NeuralNet net;
  net.input_dim = 2;
  net.output_dim = 1;

  // Layer 1: positive/negative parts of x+y, x, y (so |.| is available to
  // the square gadgets downstream). Channels: [p0,m0, p1,m1, p2,m2].
  Layer l1 = make_layer(6, 2, Act::Relu);
  set(l1, 0, 0, 1.0);
  set(l1, 0, 1, 1.0);
  set(l1, 1, 0, -1.0);
  set(l1, 1, 1, -1.0);
  set(l1, 2, 0, 1.0);
  set(l1, 3, 0, -1.0);
  set(l1, 4, 1, 1.0);
  set(l1, 5, 1, -1.0);
  net.layers.push_back(std::move(l1));

  // Layer 2: first square-gadget layer for each of the three arguments,
  // with the 1/(2B) normalization folded in. |x+y|/(2B) <= 1 on the box.
  // Channels: [t0,r0,a0, t1,r1,a1, t2,r2,a2].
  Layer l2 = make_layer(9, 6, Act::Relu);
  for (int g = 0; g < 3; ++g)
    for (int r = 0; r < 3; ++r) {
      set(l2, 3 * g + r, 2 * g, 1.0 / (2.0 * B));
      set(l2, 3 * g + r, 2 * g + 1, 1.0 / (2.0 * B));
      if (r == 1) l2.c[3 * g + r] = -0.5;
    }
  net.layers.push_back(std::move(l2));

  for (int l = 2; l <= m; ++l) {
    Layer mid = make_layer(9, 9, Act::Relu);
    const double s = std::ldexp(1.0, -2 * (l - 1));
    for (int g = 0; g < 3; ++g) {
      const int t = 3 * g, r = 3 * g + 1, a = 3 * g + 2;
      set(mid, t, t, 2.0);
      set(mid, t, r, -4.0);
      set(mid, r, t, 2.0);
      set(mid, r, r, -4.0);
      mid.c[r] = -0.5;
      set(mid, a, t, -2.0 * s);
      set(mid, a, r, 4.0 * s);
      set(mid, a, a, 1.0);
    }
    net.layers.push_back(std::move(mid));
  }

  // Output: xy = 2B^2 [ sq(|x+y|/2B) - sq(|x|/2B) - sq(|y|/2B) ].
  Layer out = make_layer(1, 9, Act::Identity);
  const double s = std::ldexp(1.0, -2 * m);
  const double sg[3] = {1.0, -1.0, -1.0};
  for (int g = 0; g < 3; ++g) {
    set(out, 0, 3 * g, sg[g] * 2.0 * B * B * (-2.0 * s));
    set(out, 0, 3 * g + 1, sg[g] * 2.0 * B * B * (4.0 * s));
    set(out, 0, 3 * g + 2, sg[g] * 2.0 * B * B);
  }
  net.layers.push_back(std::move(out));
  return net;
}

namespace {

// Affine description of a value as (coefficients over current channels, bias).
struct Lin {
  std::vector<double> a;
  double b = 0.0;
};

// Appends the product-gadget body PG(m, B=1) computing u*v where u >= 0 is a
// single nonnegative channel and v is given as a (plus, minus) ReLU pair.
// `carry` channels (each nonnegative) ride along via identity ReLU rows.
// On return, channels are [carried..., 9 gadget channels]; `prod` receives
// the affine form of the product over the output channel layout.
void append_product_stage(NeuralNet& net, int in_channels, int u_ch, int vp_ch,
                          int vm_ch, const std::vector<int>& carry, int m,
                          Lin& prod) {
  const int nc = static_cast<int>(carry.size());

  // (a) absolute-value layer: pos/neg parts of u+v, u, v, then carries.
  Layer abs = make_layer(6 + nc, in_channels, Act::Relu);
  set(abs, 0, u_ch, 1.0);
  set(abs, 0, vp_ch, 1.0);
  set(abs, 0, vm_ch, -1.0);
  set(abs, 1, u_ch, -1.0);
  set(abs, 1, vp_ch, -1.0);
  set(abs, 1, vm_ch, 1.0);
  set(abs, 2, u_ch, 1.0);
  set(abs, 3, u_ch, -1.0);
  set(abs, 4, vp_ch, 1.0);
  set(abs, 4, vm_ch, -1.0);
  set(abs, 5, vp_ch, -1.0);
  set(abs, 5, vm_ch, 1.0);
  for (int k = 0; k < nc; ++k) set(abs, 6 + k, carry[k], 1.0);
  net.layers.push_back(std::move(abs));

  // (b) square-gadget entry layer (B = 1 so arguments are halved).
  Layer l2 = make_layer(9 + nc, 6 + nc, Act::Relu);
  for (int g = 0; g < 3; ++g)
    for (int r = 0; r < 3; ++r) {
      set(l2, 3 * g + r, 2 * g, 0.5);
      set(l2, 3 * g + r, 2 * g + 1, 0.5);
      if (r == 1) l2.c[3 * g + r] = -0.5;
    }
  for (int k = 0; k < nc; ++k) set(l2, 9 + k, 6 + k, 1.0);
  net.layers.push_back(std::move(l2));

  // (c) sawtooth refinement layers.
  for (int l = 2; l <= m; ++l) {
    Layer mid = make_layer(9 + nc, 9 + nc, Act::Relu);
    const double s = std::ldexp(1.0, -2 * (l - 1));
    for (int g = 0; g < 3; ++g) {
      const int t = 3 * g, r = 3 * g + 1, a = 3 * g + 2;
      set(mid, t, t, 2.0);
      set(mid, t, r, -4.0);
      set(mid, r, t, 2.0);
      set(mid, r, r, -4.0);
      mid.c[r] = -0.5;
      set(mid, a, t, -2.0 * s);
      set(mid, a, r, 4.0 * s);
      set(mid, a, a, 1.0);
    }
    for (int k = 0; k < nc; ++k) set(mid, 9 + k, 9 + k, 1.0);
    net.layers.push_back(std::move(mid));
  }

  prod.a.assign(9 + nc, 0.0);
  prod.b = 0.0;
  const double s = std::ldexp(1.0, -2 * m);
  const double sg[3] = {1.0, -1.0, -1.0};
  for (int g = 0; g < 3; ++g) {
    prod.a[3 * g] = sg[g] * 2.0 * (-2.0 * s);
    prod.a[3 * g + 1] = sg[g] * 2.0 * (4.0 * s);
    prod.a[3 * g + 2] = sg[g] * 2.0;
  }
}

}  // namespace

NeuralNet relu_exp_net(int p, double epsilon, Side side, double b_const) {
  if (p < 1 || p > 24) fail(ErrorCode::POutOfRange, "p must lie in [1,24]");
  if (!(epsilon > 0.0) || !(epsilon <= 1.0))
    fail(ErrorCode::DomainError, "epsilon must lie in (0,1]");
  if (!(b_const > 0.0)) fail(ErrorCode::DomainError, "b must be positive");

  const double sqb = std::sqrt(b_const);
  const double Y = 2.0 * sqb / epsilon;  // layer argument range [0, Y]
  const int K = std::max(0, static_cast<int>(std::ceil(std::log2(Y))));
  const int g = std::max(1, p / 2);  // Taylor degree of the seed polynomial
  const int m = p;                   // product-gadget refinement depth

  std::vector<double> taylor(g + 1);  // exp(-z) Taylor coefficients
  taylor[0] = 1.0;
  for (int i = 1; i <= g; ++i) taylor[i] = -taylor[i - 1] / i;

  NeuralNet net;
  net.input_dim = 1;
  net.output_dim = 1;

  // Seed layer: z = y/2^K in [0,1] plus the top Horner coefficient as a
  // (plus, minus) constant pair. Channels: [z, Hp, Hm].
  const double alpha = sqb / (epsilon * std::ldexp(1.0, K));
  Layer l1 = make_layer(3, 1, Act::Relu);
  set(l1, 0, 0, side == Side::Minus ? alpha : -alpha);
  l1.c[0] = alpha;
  l1.c[1] = std::max(taylor[g], 0.0);
  l1.c[2] = std::max(-taylor[g], 0.0);
  net.layers.push_back(std::move(l1));

  // Horner: H <- taylor[j] + z * H for j = g-1 .. 0. Partial Horner values
  // of the alternating exp(-z) series stay in [-1,1], so bound 1 suffices
  // for the product gadget.
  for (int j = g - 1; j >= 0; --j) {
    Lin prod;
    append_product_stage(net, 3, /*u=*/0, /*vp=*/1, /*vm=*/2, /*carry=*/{0}, m,
                         prod);
    // Recombine: H' = taylor[j] + prod as a ReLU pair; keep z unless done.
    const bool keep_z = (j > 0) || (K > 0);
    const int cols = 10;  // 9 gadget channels + carried z (last)
    Layer rec = make_layer(keep_z ? 3 : 2, cols, Act::Relu);
    const int zin = 9;
    int hp = 0, hm = 1;
    if (keep_z) {
      set(rec, 0, zin, 1.0);
      hp = 1;
      hm = 2;
    }
    for (int kk = 0; kk < 9; ++kk) {
      if (prod.a[kk] != 0.0) {
        set(rec, hp, kk, prod.a[kk]);
        set(rec, hm, kk, -prod.a[kk]);
      }
    }
    rec.c[hp] = taylor[j];
    rec.c[hm] = -taylor[j];
    net.layers.push_back(std::move(rec));
  }
  // Channel layout now: [z, Hp, Hm] if K > 0, else [Hp, Hm].

  // K squarings: v <- v * v via the same gadget with u := v restricted to
  // v >= 0? v may round slightly negative, so feed the pair on both slots.
  for (int k = 0; k < K; ++k) {
    const bool z_present = (k == 0);
    const int in_ch = z_present ? 3 : 2;
    const int vp = z_present ? 1 : 0;
    const int vm = z_present ? 2 : 1;

    // abs layer for PG(v,v): pos/neg parts of 2v, v, v.
    Layer abs = make_layer(6, in_ch, Act::Relu);
    auto put = [&](int r, double wp, double wm) {
      set(abs, r, vp, wp);
      set(abs, r, vm, wm);
    };
    put(0, 2.0, -2.0);
    put(1, -2.0, 2.0);
    put(2, 1.0, -1.0);
    put(3, -1.0, 1.0);
    put(4, 1.0, -1.0);
    put(5, -1.0, 1.0);
    net.layers.push_back(std::move(abs));

    Layer l2 = make_layer(9, 6, Act::Relu);
    for (int gg = 0; gg < 3; ++gg)
      for (int r = 0; r < 3; ++r) {
        set(l2, 3 * gg + r, 2 * gg, 0.5);
        set(l2, 3 * gg + r, 2 * gg + 1, 0.5);
        if (r == 1) l2.c[3 * gg + r] = -0.5;
      }
    net.layers.push_back(std::move(l2));

    for (int l = 2; l <= m; ++l) {
      Layer mid = make_layer(9, 9, Act::Relu);
      const double s = std::ldexp(1.0, -2 * (l - 1));
      for (int gg = 0; gg < 3; ++gg) {
        const int t = 3 * gg, r = 3 * gg + 1, a = 3 * gg + 2;
        set(mid, t, t, 2.0);
        set(mid, t, r, -4.0);
        set(mid, r, t, 2.0);
        set(mid, r, r, -4.0);
        mid.c[r] = -0.5;
        set(mid, a, t, -2.0 * s);
        set(mid, a, r, 4.0 * s);
        set(mid, a, a, 1.0);
      }
      net.layers.push_back(std::move(mid));
    }

    // Recombine to a ReLU pair; the last squaring folds in the clamp start.
    const double s = std::ldexp(1.0, -2 * m);
    const double sg[3] = {1.0, -1.0, -1.0};
    std::vector<double> pa(9, 0.0);
    for (int gg = 0; gg < 3; ++gg) {
      pa[3 * gg] = sg[gg] * 2.0 * (-2.0 * s);
      pa[3 * gg + 1] = sg[gg] * 2.0 * (4.0 * s);
      pa[3 * gg + 2] = sg[gg] * 2.0;
    }
    Layer rec = make_layer(2, 9, Act::Relu);
    const bool final_sq = (k + 1 == K);
    for (int kk = 0; kk < 9; ++kk)
      if (pa[kk] != 0.0) {
        set(rec, 0, kk, pa[kk]);
        set(rec, 1, kk, final_sq ? pa[kk] : -pa[kk]);
      }
    if (final_sq) rec.c[1] = -1.0;  // channels [ReLU(v), ReLU(v-1)]
    net.layers.push_back(std::move(rec));
  }

  if (K == 0) {
    // Clamp layer from the (Hp, Hm) pair.
    Layer cl = make_layer(2, 2, Act::Relu);
    set(cl, 0, 0, 1.0);
    set(cl, 0, 1, -1.0);
    set(cl, 1, 0, 1.0);
    set(cl, 1, 1, -1.0);
    cl.c[1] = -1.0;
    net.layers.push_back(std::move(cl));
  }

  // Output: clamp(v, 0, 1) = ReLU(v) - ReLU(v - 1).
  Layer out = make_layer(1, 2, Act::Identity);
  set(out, 0, 0, 1.0);
  set(out, 0, 1, -1.0);
  net.layers.push_back(std::move(out));
  return net;
}

namespace {

// Interval propagation of the net over x in [-1,1]; returns 1 + bound on |R|.
double output_shift_bound(const NeuralNet& net) {
  std::vector<double> lo(1, -1.0), hi(1, 1.0), nlo, nhi;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& lay = net.layers[l];
    const bool last = (l + 1 == net.layers.size());
    nlo.assign(lay.rows, 0.0);
    nhi.assign(lay.rows, 0.0);
    for (int r = 0; r < lay.rows; ++r) {
      double a = lay.c[r], b = lay.c[r];
      const double* row = lay.A.data() + static_cast<size_t>(r) * lay.cols;
      for (int j = 0; j < lay.cols; ++j) {
        const double w = row[j];
        if (w > 0.0) {
          a += w * lo[j];
          b += w * hi[j];
        } else if (w < 0.0) {
          a += w * hi[j];
          b += w * lo[j];
        }
      }
      if (!last) {
        switch (lay.act[r]) {
          case Act::Relu:
            a = std::max(0.0, a);
            b = std::max(0.0, b);
            break;
          case Act::Tanh:
            a = std::tanh(a);
            b = std::tanh(b);
            break;
          case Act::Identity:
            break;
        }
      }
      nlo[r] = a;
      nhi[r] = b;
    }
    lo.swap(nlo);
    hi.swap(nhi);
  }
  return 1.0 + std::max(std::abs(lo[0]), std::abs(hi[0]));
}

}  // namespace

NeuralNet parallelize(const std::vector<NeuralNet>& nets,
                      const std::vector<double>& weights) {
  if (nets.empty()) fail(ErrorCode::DimensionMismatch, "no nets to combine");
  if (weights.size() != nets.size())
    fail(ErrorCode::DimensionMismatch,
         "combination weights must match the number of nets");
  for (const NeuralNet& n : nets) {
    validate(n);
    if (n.input_dim != 1 || n.output_dim != 1)
      fail(ErrorCode::DimensionMismatch, "parallelize requires 1->1 nets");
  }
  const int nn = static_cast<int>(nets.size());
  int D = 0;
  for (const NeuralNet& n : nets) D = std::max(D, n.depth());

  if (D == 1) {  // all nets purely affine: fold into one affine layer
    Layer out = make_layer(1, 1, Act::Identity);
    for (int i = 0; i < nn; ++i) {
      out.A[0] += weights[i] * nets[i].layers[0].A[0];
      out.c[0] += weights[i] * nets[i].layers[0].c[0];
    }
    NeuralNet res;
    res.layers = {std::move(out)};
    return res;
  }

  std::vector<double> shift(nn, 0.0);
  for (int i = 0; i < nn; ++i)
    if (nets[i].depth() < D) shift[i] = output_shift_bound(nets[i]);

  NeuralNet res;
  res.input_dim = 1;
  res.output_dim = 1;

  // prev_off[i] = offset of net i's channels in the previous layer.
  std::vector<int> prev_off(nn, 0);
  int prev_total = 1;  // the shared scalar input

  for (int l = 1; l < D; ++l) {  // hidden layers of the combination
    // Row layout for this layer.
    std::vector<int> off(nn, 0), cnt(nn, 0);
    int total = 0;
    for (int i = 0; i < nn; ++i) {
      const int Li = nets[i].depth();
      off[i] = total;
      if (Li > l)
        cnt[i] = nets[i].layers[l - 1].rows;  // its own hidden layer l
      else
        cnt[i] = 1;  // converted output (Li == l) or carry (Li < l)
      total += cnt[i];
    }
    Layer lay = make_layer(total, prev_total, Act::Relu);
    for (int i = 0; i < nn; ++i) {
      const int Li = nets[i].depth();
      if (Li > l) {
        const Layer& src = nets[i].layers[l - 1];
        for (int r = 0; r < src.rows; ++r) {
          for (int j = 0; j < src.cols; ++j)
            set(lay, off[i] + r, prev_off[i] + j,
                src.A[static_cast<size_t>(r) * src.cols + j]);
          lay.c[off[i] + r] = src.c[r];
          lay.act[off[i] + r] = src.act[r];
        }
      } else if (Li == l) {
        // Output layer becomes a shifted nonnegative carry: ReLU(o + shift).
        const Layer& src = nets[i].layers[l - 1];
        for (int j = 0; j < src.cols; ++j)
          set(lay, off[i], prev_off[i] + j, src.A[j]);
        lay.c[off[i]] = src.c[0] + shift[i];
        lay.act[off[i]] = Act::Relu;
      } else {
        set(lay, off[i], prev_off[i], 1.0);  // identity carry, stays >= 1
        lay.act[off[i]] = Act::Relu;
      }
    }
    res.layers.push_back(std::move(lay));
    prev_off = off;
    prev_total = total;
  }

  Layer out = make_layer(1, prev_total, Act::Identity);
  for (int i = 0; i < nn; ++i) {
    const int Li = nets[i].depth();
    if (Li == D) {
      const Layer& src = nets[i].layers[D - 1];
      for (int j = 0; j < src.cols; ++j)
        set(out, 0, prev_off[i] + j,
            out.A[prev_off[i] + j] + weights[i] * src.A[j]);
      out.c[0] += weights[i] * src.c[0];
    } else {
      set(out, 0, prev_off[i], weights[i]);
      out.c[0] -= weights[i] * shift[i];
    }
  }
  res.layers.push_back(std::move(out));
  return res;
}

void nn_export(const NeuralNet& net, const std::string& path) {
  validate(net);
  std::ofstream f(path);
  if (!f) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    f << buf;
  };
  f << "NNv1 " << net.layers.size() << ' ' << net.input_dim << ' '
    << net.output_dim << '\n';
  for (const Layer& lay : net.layers) {
    bool uniform = true;
    for (Act a : lay.act)
      if (a != lay.act[0]) uniform = false;
    f << "layer " << lay.rows << ' ' << lay.cols << ' ';
    if (uniform) {
      f << act_name(lay.act[0]);
    } else {
      for (int r = 0; r < lay.rows; ++r) {
        if (r) f << ',';
        f << act_name(lay.act[r]);
      }
    }
    f << '\n';
    for (int r = 0; r < lay.rows; ++r) {
      for (int j = 0; j < lay.cols; ++j) {
        if (j) f << ' ';
        put(lay.A[static_cast<size_t>(r) * lay.cols + j]);
      }
      f << '\n';
    }
    for (int r = 0; r < lay.rows; ++r) {
      if (r) f << ' ';
      put(lay.c[r]);
    }
    f << '\n';
  }
  if (!f) fail(ErrorCode::IoError, "write failed for " + path);
}

namespace {

Act act_from_name(const std::string& s) {
  if (s == "relu") return Act::Relu;
  if (s == "tanh") return Act::Tanh;
  if (s == "identity") return Act::Identity;
  fail(ErrorCode::ParseError, "unknown activation tag '" + s + "'");
}

}  // namespace

NeuralNet nn_import(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::IoError, "cannot open " + path);
  std::string magic;
  long L = 0, in_d = 0, out_d = 0;
  if (!(f >> magic >> L >> in_d >> out_d) || magic != "NNv1")
    fail(ErrorCode::ParseError, "bad header in " + path);
  if (L < 1 || in_d < 1 || out_d < 1)
    fail(ErrorCode::ParseError, "bad dimensions in header of " + path);
  NeuralNet net;
  net.input_dim = static_cast<int>(in_d);
  net.output_dim = static_cast<int>(out_d);
  for (long l = 0; l < L; ++l) {
    std::string kw, acts;
    int rows = 0, cols = 0;
    if (!(f >> kw >> rows >> cols >> acts) || kw != "layer" || rows < 1 ||
        cols < 1)
      fail(ErrorCode::ParseError, "bad layer header in " + path);
    Layer lay;
    lay.rows = rows;
    lay.cols = cols;
    lay.A.resize(static_cast<size_t>(rows) * cols);
    lay.c.resize(rows);
    if (acts.find(',') == std::string::npos) {
      lay.act.assign(rows, act_from_name(acts));
    } else {
      std::stringstream ss(acts);
      std::string tok;
      while (std::getline(ss, tok, ',')) lay.act.push_back(act_from_name(tok));
      if (static_cast<int>(lay.act.size()) != rows)
        fail(ErrorCode::ParseError, "activation list length != rows");
    }
    for (double& v : lay.A)
      if (!(f >> v)) fail(ErrorCode::ParseError, "truncated weights in " + path);
    for (double& v : lay.c)
      if (!(f >> v)) fail(ErrorCode::ParseError, "truncated biases in " + path);
    net.layers.push_back(std::move(lay));
  }
  try {
    validate(net);
  } catch (const Error&) {
    fail(ErrorCode::ParseError, "inconsistent network in " + path);
  }
  return net;
}

}  // namespace sperturb
