#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "gcp/errors.hpp"
#include "gcp/quadrature.hpp"

namespace gcp {

enum class PhiEvalPath { Series, Integral, ClosedOdd, Asymptotic };

inline constexpr double kEulerGamma = std::numbers::egamma;

inline double digamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError("digamma: argument must be positive and finite");
  }
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // Bernoulli tail B_2k / (2k x^2k), k = 1..7.
  const double tail =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 -
                     r * (1.0 / 240 -
                          r * (1.0 / 132 - r * (691.0 / 32760 - r / 12.0))))));
  return shift + std::log(x) - 0.5 / x - tail;
}

inline double exp_integral_e1(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError("exp_integral_e1: argument must be positive and finite");
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (x <= 1.0) {
    double sum = 0.0, term = 1.0;
    for (int k = 1; k < 100; ++k) {
      term *= -x / k;
      const double add = term / k;
      sum += add;
      if (std::abs(add) < eps * std::abs(sum)) break;
    }
    return -kEulerGamma - std::log(x) - sum;
  }
  // Modified Lentz evaluation of the continued fraction.
  constexpr double tiny = 1e-300;
  double b = x + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h * std::exp(-x);
  }
  throw NumericalError("exp_integral_e1: continued fraction did not converge");
}

struct SeriesResult {
  double value = 0.0;
  // Bound on the truncation error of value.
  double tail_bound = 0.0;
  long terms = 0;
};

namespace detail {

inline void check_phi_args(double m, double x) {
  if (!std::isfinite(m) || m <= 0.0) throw DomainError("phi: m must be > 0");
  if (!std::isfinite(x) || x < 0.0) throw DomainError("phi: x must be >= 0");
}

// Sum_j P(J = j) f(j) for J ~ Poisson(x), walking outward from the mode.
// Weights are kept relative to the mode and normalised by their running sum,
// which avoids underflow of e^{-x} for large x.
//
// upper_tail(j, r): bound on sum_{k>j} w_k |f(k)| / w_{j+1}, given
//   w_{k+1} / w_k <= r for k > j.
// lower_tail(j, r): same for sum_{k<j} relative to w_{j-1}.
template <class F, class Up, class Down>
SeriesResult poisson_mixture(double x, double rel_tol, long max_terms, F f,
                             Up upper_tail, Down lower_tail) {
  if (x == 0.0) return {f(0), 0.0, 1};
  const long mode = static_cast<long>(std::floor(x));
  double weight_sum = 1.0, sum = f(mode);
  long terms = 1;

  double lo_bound = 0.0, lo_weight_bound = 0.0;
  double w = 1.0;
  for (long j = mode; j > 0; --j) {
    const double r = (j - 1.0) / x;
    const double next = w * j / x;  // w_{j-1}
    lo_bound = next / (1.0 - r) * lower_tail(j);
    lo_weight_bound = next / (1.0 - r);
    if (lo_bound <= rel_tol * std::abs(sum) && lo_weight_bound <= rel_tol) break;
    w = next;
    sum += w * f(j - 1);
    weight_sum += w;
    lo_bound = lo_weight_bound = 0.0;
    if (++terms > max_terms) {
      throw NumericalError("poisson series: term cap reached", next);
    }
  }

  double hi_bound = 0.0, hi_weight_bound = 0.0;
  w = 1.0;
  for (long j = mode;; ++j) {
    const double r = x / (j + 2.0);
    const double next = w * x / (j + 1.0);  // w_{j+1}
    hi_bound = next * upper_tail(j, r);
    hi_weight_bound = next / (1.0 - r);
    if (hi_bound <= rel_tol * std::abs(sum) && hi_weight_bound <= rel_tol) break;
    w = next;
    sum += w * f(j + 1);
    weight_sum += w;
    if (++terms > max_terms) {
      throw NumericalError("poisson series: term cap reached",
                           hi_bound / weight_sum);
    }
  }
  const double value = sum / weight_sum;
  const double bound =
      (lo_bound + hi_bound + std::abs(value) * (lo_weight_bound + hi_weight_bound)) /
      weight_sum;
  return {value, bound, terms};
}

}  // namespace detail

inline SeriesResult phi_series(double m, double x, double rel_tol = 1e-13,
                               long max_terms = 1000000) {
  detail::check_phi_args(m, x);
  auto f = [m](long j) { return digamma(static_cast<double>(j) + m); };
  // |psi(y0 + i)| <= |psi(y0)| + i / y0.
  auto up = [m](long j, double r) {
    const double y0 = static_cast<double>(j) + 1.0 + m;
    return std::abs(digamma(y0)) / (1.0 - r) + r / ((1.0 - r) * (1.0 - r) * y0);
  };
  // psi is increasing, so below j it is bracketed by psi(m) and psi(j-1+m).
  auto down = [m](long j) {
    return std::max(std::abs(digamma(m)),
                    std::abs(digamma(static_cast<double>(j) - 1.0 + m)));
  };
  return detail::poisson_mixture(x, rel_tol, max_terms, f, up, down);
}

inline SeriesResult phi_prime_series(double m, double x,
                                     double rel_tol = 1e-13,
                                     long max_terms = 1000000) {
  detail::check_phi_args(m, x);
  auto f = [m](long j) { return 1.0 / (static_cast<double>(j) + m); };
  auto up = [m](long j, double r) {
    return 1.0 / ((1.0 - r) * (static_cast<double>(j) + 1.0 + m));
  };
  auto down = [m](long) { return 1.0 / m; };
  return detail::poisson_mixture(x, rel_tol, max_terms, f, up, down);
}

// psi(m) + int_0^1 (1 - e^{-xs}) (1 - s)^{m-1} / s ds. For large x the
// integrand has a layer of width 1/x at s = 0, so [0, 1/2] is cut at
// s = 2^k / x and integrated in s. The last piece uses u = sqrt(1 - s),
// where the endpoint factor becomes the smooth 2 u^{2m-1}.
inline QuadratureResult phi_integral(double m, double x) {
  detail::check_phi_args(m, x);
  auto core = [x](double s) { return s == 0.0 ? x : -std::expm1(-x * s) / s; };
  auto in_s = [&](double s) { return core(s) * std::pow(1.0 - s, m - 1.0); };
  auto in_u = [&](double u) {
    return core((1.0 - u) * (1.0 + u)) * 2.0 * std::pow(u, 2.0 * m - 1.0);
  };
  QuadratureResult total{digamma(m), 0.0, 0};
  auto add = [&total](const QuadratureResult& q) {
    total.value += q.value;
    total.error_estimate += q.error_estimate;
    total.intervals += q.intervals;
  };
  double lo = 0.0;
  for (double s = 1.0 / x; s < 0.5; s *= 2.0) {
    add(integrate_gk(in_s, lo, s, 1e-15, 1e-14));
    lo = s;
  }
  add(integrate_gk(in_u, 0.0, std::sqrt(1.0 - lo), 1e-15, 1e-14));
  return total;
}

inline double phi_closed_odd(int m, double x) {
  if (m < 1) throw DomainError("phi_closed_odd: m must be a positive integer");
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError("phi_closed_odd: x must be > 0");
  }
  // The finite sum cancels heavily for small x; extended precision buys the
  // digits back.
  const long double e = std::exp(-static_cast<long double>(x));
  const long double xl = x;
  long double sum = 0.0L, fact = 1.0L, binom = 1.0L, xpow = 1.0L;
  for (int i = 1; i <= m - 1; ++i) {
    if (i > 1) fact *= (i - 1);
    binom = binom * (m - i) / i;  // C(m-1, i)
    xpow *= -xl;
    sum += fact / xpow * (e - binom);
  }
  return std::log(x) + exp_integral_e1(x) + static_cast<double>(sum);
}

inline double phi_asymptotic(double m, double x) {
  if (!std::isfinite(m) || m < 1.0) {
    throw DomainError("phi_asymptotic: m must be >= 1");
  }
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError("phi_asymptotic: x must be > 0");
  }
  return std::log(x) + (m - 1.0) / x;
}

inline double phi(double m, double x, PhiEvalPath path = PhiEvalPath::Series) {
  switch (path) {
    case PhiEvalPath::Series:
      return phi_series(m, x).value;
    case PhiEvalPath::Integral:
      return phi_integral(m, x).value;
    case PhiEvalPath::ClosedOdd:
      if (m != std::floor(m) || m < 1.0 || m > 1e6) {
        throw UsageError("phi: closed form needs a positive integer m");
      }
      return phi_closed_odd(static_cast<int>(m), x);
    case PhiEvalPath::Asymptotic:
      return phi_asymptotic(m, x);
  }
  throw UsageError("phi: unknown evaluation path");
}

inline double phi_prime(double m, double x) {
  return phi_prime_series(m, x).value;
}

}  // namespace gcp
