#pragma once

#include <cmath>
#include <utility>

namespace coalition {

struct ScalarOptimum {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
};

/// Golden-section search for the maximum of a unimodal `f` on [a, b]. Stops
/// once the bracket is narrower than `tol`.
template <class F>
ScalarOptimum golden_section_maximize(F&& f, double a, double b, double tol, int max_iter = 200) {
  constexpr double inv_phi = 0.6180339887498949;  // (sqrt(5) - 1) / 2
  if (a > b) std::swap(a, b);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  int evals = 2;
  for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++evals;
  }
  return fc >= fd ? ScalarOptimum{c, fc, evals} : ScalarOptimum{d, fd, evals};
}

template <class F>
ScalarOptimum golden_section_minimize(F&& f, double a, double b, double tol, int max_iter = 200) {
  auto r = golden_section_maximize([&](double x) { return -f(x); }, a, b, tol, max_iter);
  r.fx = -r.fx;
  return r;
}

}  // namespace coalition
