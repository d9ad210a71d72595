#pragma once

#include <cmath>

namespace sperturb {

/// Double-double (compensated) arithmetic: an unevaluated sum hi + lo with
/// |lo| <= ulp(hi)/2. Used where plain doubles lose too many digits to
/// cancellation, e.g. evaluating piecewise-linear ReLU representations whose
/// hidden slopes are O(1/h) with h ~ 1e-9 while the represented values are
/// O(1): the telescoping output sum then cancels ~8 digits in double.
struct DD {
  double hi = 0.0;
  double lo = 0.0;

  DD() = default;
  constexpr DD(double h) : hi(h), lo(0.0) {}
  constexpr DD(double h, double l) : hi(h), lo(l) {}

  double to_double() const { return hi + lo; }
};

/// Error-free sum: a + b = s + e exactly (Knuth TwoSum).
inline DD two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  double e = (a - (s - bb)) + (b - bb);
  return DD{s, e};
}

/// Error-free sum when |a| >= |b| (Dekker FastTwoSum).
inline DD fast_two_sum(double a, double b) {
  double s = a + b;
  double e = b - (s - a);
  return DD{s, e};
}

/// Error-free product via FMA: a * b = p + e exactly.
inline DD two_prod(double a, double b) {
  double p = a * b;
  double e = std::fma(a, b, -p);
  return DD{p, e};
}

inline DD dd_add(DD a, DD b) {
  DD s = two_sum(a.hi, b.hi);
  double lo = s.lo + a.lo + b.lo;
  return fast_two_sum(s.hi, lo);
}

inline DD dd_add(DD a, double b) {
  DD s = two_sum(a.hi, b);
  double lo = s.lo + a.lo;
  return fast_two_sum(s.hi, lo);
}

inline DD dd_neg(DD a) { return DD{-a.hi, -a.lo}; }

inline DD dd_sub(DD a, DD b) { return dd_add(a, dd_neg(b)); }

/// DD * double.
inline DD dd_mul(DD a, double b) {
  DD p = two_prod(a.hi, b);
  double lo = p.lo + a.lo * b;
  return fast_two_sum(p.hi, lo);
}

inline DD dd_mul(DD a, DD b) {
  DD p = two_prod(a.hi, b.hi);
  double lo = p.lo + a.hi * b.lo + a.lo * b.hi;
  return fast_two_sum(p.hi, lo);
}

inline DD dd_div(DD a, double b) {
  double q1 = a.hi / b;
  DD p = two_prod(q1, b);
  double r = ((a.hi - p.hi) - p.lo) + a.lo;
  double q2 = r / b;
  return fast_two_sum(q1, q2);
}

/// Fused multiply-add accumulate: acc + w * x.
inline DD dd_fma(DD acc, double w, DD x) { return dd_add(acc, dd_mul(x, w)); }

}  // namespace sperturb
