#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gcp/errors.hpp"

namespace gcp {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;
};

namespace detail {

inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights at the odd Kronrod nodes 1, 3, 5, 7.
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kKronrodWeights[7];
  double g = fc * kGaussWeights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kKronrodNodes[i];
    const double s = f(c - dx) + f(c + dx);
    k += kKronrodWeights[i] * s;
    if (i % 2 == 1) g += kGaussWeights[i / 2] * s;
  }
  return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace detail

// Adaptive 7/15-point Gauss-Kronrod on [a, b]. The interval with the largest
// error estimate is bisected until the summed estimate meets
// max(abs_tol, rel_tol * |value|).
template <class F>
QuadratureResult integrate_gk(F f, double a, double b, double abs_tol = 1e-14,
                              double rel_tol = 1e-13,
                              int max_intervals = 4000) {
  std::vector<detail::Segment> heap{detail::gk15(f, a, b)};
  double value = heap[0].value, error = heap[0].error;
  while (error > std::max(abs_tol, rel_tol * std::abs(value))) {
    if (static_cast<int>(heap.size()) >= max_intervals) {
      throw NumericalError("adaptive quadrature did not converge", error);
    }
    std::pop_heap(heap.begin(), heap.end());
    const detail::Segment s = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (s.a + s.b);
    for (const auto& half : {detail::gk15(f, s.a, mid), detail::gk15(f, mid, s.b)}) {
      heap.push_back(half);
      std::push_heap(heap.begin(), heap.end());
    }
    // Resummed each round so rounding does not drift into the stopping test.
    value = 0.0;
    error = 0.0;
    for (const auto& seg : heap) {
      value += seg.value;
      error += seg.error;
    }
  }
  const int n = static_cast<int>(heap.size());
  return {value, error, n};
}

}  // namespace gcp
