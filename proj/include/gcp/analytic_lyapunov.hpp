#pragma once

#include <cmath>
#include <string>

#include "gcp/errors.hpp"
#include "gcp/special_functions.hpp"

namespace gcp {

// Parameters of the discrete-time consensus model: N agents, d topics,
// sampling scale alpha and inertia beta.
struct ModelParams {
  int N;
  int d;
  double alpha;
  double beta;

  ModelParams(int N_, int d_, double alpha_, double beta_)
      : N(N_), d(d_), alpha(alpha_), beta(beta_) {
    if (N < 2) throw DomainError("N must be >= 2");
    if (d < 1) throw DomainError("d must be >= 1");
    if (N < d + 1) throw DomainError("N must be >= d + 1");
    if (!std::isfinite(alpha) || alpha <= 0.0) {
      throw DomainError("alpha must be positive and finite");
    }
    if (!std::isfinite(beta) || beta < 0.0 || beta >= 1.0) {
      throw DomainError("beta must lie in [0, 1)");
    }
  }

  double rho() const { return alpha * (1.0 - beta) * (1.0 - beta); }
  double z() const { return N * beta * beta / (2.0 * rho()); }
};

enum class RegimeTag { Subcritical, Critical, Supercritical };

inline const char* to_string(RegimeTag t) {
  switch (t) {
    case RegimeTag::Subcritical: return "subcritical";
    case RegimeTag::Critical: return "critical";
    case RegimeTag::Supercritical: return "supercritical";
  }
  return "unknown";
}

struct Regime {
  RegimeTag tag;
  double lambda1;
  double tolerance;
};

// Top exponent through an explicit evaluation path for phi.
inline double lambda1_via(const ModelParams& p, PhiEvalPath path) {
  const double m = 0.5 * (p.N - 1);
  if (p.beta == 0.0) {
    return 0.5 * (std::log(2.0 * p.alpha / p.N) + digamma(m));
  }
  const double z = p.z();
  return std::log(p.beta) + 0.5 * (phi(m, z, path) - std::log(z));
}

// Top Lyapunov exponent. Odd N uses the closed form once z is past the
// region where its finite sum cancels; very large z goes to quadrature
// because the Poisson series would need O(sqrt z) terms.
inline double lambda1(const ModelParams& p) {
  if (p.beta == 0.0) return lambda1_via(p, PhiEvalPath::Series);
  const double m = 0.5 * (p.N - 1);
  const double z = p.z();
  if (p.N % 2 == 1 && z >= std::max(1.0, m)) {
    return lambda1_via(p, PhiEvalPath::ClosedOdd);
  }
  if (z <= 1e4) return lambda1_via(p, PhiEvalPath::Series);
  return lambda1_via(p, PhiEvalPath::Integral);
}

inline double lambda1_large_N(double alpha, double beta) {
  return 0.5 * std::log(alpha * (1.0 - beta) * (1.0 - beta) + beta * beta);
}

inline double lambda_k_beta0(double alpha, int N, int k) {
  if (N < 2) throw DomainError("N must be >= 2");
  if (k < 1 || k > N - 1) throw UsageError("k must lie in [1, N-1]");
  return 0.5 * (std::log(2.0 * alpha / N) + digamma(0.5 * (N - k)));
}

inline double gap_lower_bound(const ModelParams& p, int k) {
  if (k < 1 || k > p.N - 2) throw UsageError("k must lie in [1, N-2]");
  const double nk = p.N - k;
  return 0.15 / (nk * (p.N * p.beta * p.beta / p.rho() + nk));
}

// Large-N gap between the two top exponents, evaluated in the factored form
// rho (rho + 2 beta^2) / (2N (rho + beta^2)^2), which stays accurate as
// beta -> 1.
inline double gap12_large_N(const ModelParams& p) {
  const double rho = p.rho(), b2 = p.beta * p.beta;
  return rho * (rho + 2.0 * b2) / (2.0 * p.N * (rho + b2) * (rho + b2));
}

// (1 - q^2) / (2N) with q = beta^2 / (rho + beta^2).
inline double gap12_large_N_difference_form(const ModelParams& p) {
  const double q = p.beta * p.beta / (p.rho() + p.beta * p.beta);
  return (1.0 - q * q) / (2.0 * p.N);
}

inline double critical_alpha_beta0(int N) {
  if (N < 2) throw DomainError("N must be >= 2");
  return 0.5 * N * std::exp(-digamma(0.5 * (N - 1)));
}

// Root of lambda1 in alpha by bisection on log(alpha). Stops when
// |lambda1| <= tol or the bracket is at floating-point resolution.
inline double critical_alpha_bisect(double beta, int N, double tol = 1e-12) {
  if (!std::isfinite(beta) || beta < 0.0 || beta >= 1.0) {
    throw DomainError("beta must lie in [0, 1)");
  }
  if (!(tol > 0.0)) throw UsageError("tol must be positive");
  auto f = [&](double a) { return lambda1(ModelParams(N, 1, a, beta)); };
  double lo = std::log(1e-12);
  double hi = std::log(critical_alpha_beta0(N) / ((1.0 - beta) * (1.0 - beta)));
  // At beta = 0 the root sits on the upper end; nudge it inside.
  while (f(std::exp(hi)) <= 0.0) hi += std::log(2.0);
  if (f(std::exp(lo)) >= 0.0) {
    throw NumericalError("critical_alpha: lower bracket is not subcritical");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = f(std::exp(mid));
    if (std::abs(v) <= tol || hi - lo < 4e-16 * std::max(1.0, std::abs(mid))) {
      return std::exp(mid);
    }
    (v < 0.0 ? lo : hi) = mid;
  }
  throw NumericalError("critical_alpha: bisection did not converge",
                       std::abs(f(std::exp(0.5 * (lo + hi)))));
}

inline double critical_alpha(double beta, int N, double tol = 1e-12) {
  if (beta == 0.0) return critical_alpha_beta0(N);
  return critical_alpha_bisect(beta, N, tol);
}

inline double critical_alpha_asymptotic(double beta, int N) {
  if (N < 4) throw UsageError("asymptotic critical alpha needs N >= 4");
  if (!std::isfinite(beta) || beta < 0.0 || beta >= 1.0) {
    throw DomainError("beta must lie in [0, 1)");
  }
  return 2.0 * N / ((N - 3.0) * (1.0 - beta));
}

inline double rho_critical(double beta, int N, double tol = 1e-12) {
  return (1.0 - beta) * (1.0 - beta) * critical_alpha(beta, N, tol);
}

inline Regime classify_regime(const ModelParams& p, double tol = 1e-9) {
  const double l = lambda1(p);
  RegimeTag tag = RegimeTag::Critical;
  if (l < -tol) tag = RegimeTag::Subcritical;
  if (l > tol) tag = RegimeTag::Supercritical;
  return {tag, l, tol};
}

inline double model_b_critical_gamma(int N) {
  if (N < 2) throw DomainError("N must be >= 2");
  return 0.5 - 1.5 / N;
}

}  // namespace gcp
