#pragma once

#include <cmath>
#include <vector>

#include "gcp/analytic_lyapunov.hpp"
#include "gcp/errors.hpp"
#include "gcp/linalg.hpp"
#include "gcp/rng.hpp"
#include "gcp/special_functions.hpp"
#include "gcp/stats.hpp"

namespace gcp {

struct LyapunovSpectrumEstimate {
  std::vector<double> exponents;   // in QR order, i.e. descending in the limit
  std::vector<double> std_errors;  // batch-means standard errors
  long steps = 0;
  ModelParams params;
};

struct WkSample {
  int k;
  double value;
};

struct ScalarEstimate {
  double value = 0.0;
  double se = 0.0;
  long samples = 0;
};

// Independent standard normal entries, filled row by row.
inline Matrix sample_gaussian_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  Matrix G(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) G(i, j) = rng.normal();
  }
  return G;
}

// One factor of the product: sqrt(rho/N) G + beta I, of size (N-1) x (N-1).
inline Matrix sample_M(const ModelParams& p, RngStream& rng) {
  const int n = p.N - 1;
  Matrix M = std::sqrt(p.rho() / p.N) * sample_gaussian_matrix(n, n, rng);
  M.diagonal().array() += p.beta;
  return M;
}

struct MSampler {
  Matrix operator()(const ModelParams& p, RngStream& rng) const { return sample_M(p, rng); }
};

// Benettin QR flow: Q <- I, then A = M Q = Q' R' each step, accumulating
// log R'_ii. Standard errors come from 50 contiguous batch means.
template <class Sampler = MSampler>
LyapunovSpectrumEstimate estimate_spectrum_qr(const ModelParams& p, long steps, RngStream& rng,
                                              Sampler sampler = {}) {
  if (steps < 100) throw UsageError("estimate_spectrum_qr: steps must be >= 100");
  constexpr int kBatches = 50;
  const int n = p.N - 1;
  Matrix Q = Matrix::Identity(n, n);
  std::vector<double> total(n, 0.0);
  std::vector<std::vector<double>> batch_means(n, std::vector<double>(kBatches, 0.0));
  for (int b = 0; b < kBatches; ++b) {
    const long lo = steps * b / kBatches, hi = steps * (b + 1) / kBatches;
    std::vector<double> acc(n, 0.0);
    for (long t = lo; t < hi; ++t) {
      QrFactors f = qr_positive(sampler(p, rng) * Q);
      for (int i = 0; i < n; ++i) {
        const double r = f.R(i, i);
        if (!(r > 0.0) || !std::isfinite(r)) {
          throw NumericalError("estimate_spectrum_qr: R diagonal underflow", r, t);
        }
        acc[i] += std::log(r);
      }
      Q = std::move(f.Q);
    }
    for (int i = 0; i < n; ++i) {
      total[i] += acc[i];
      batch_means[i][b] = acc[i] / static_cast<double>(hi - lo);
    }
  }
  LyapunovSpectrumEstimate est{{}, {}, steps, p};
  for (int i = 0; i < n; ++i) {
    est.exponents.push_back(total[i] / steps);
    est.std_errors.push_back(mean_se(batch_means[i]).se);
  }
  return est;
}

// Distance from e_k to the span of the first k-1 rows of a fresh M.
// The rows are orthonormalised by modified Gram-Schmidt with one
// re-orthogonalisation pass.
inline WkSample sample_Wk(const ModelParams& p, int k, RngStream& rng) {
  const int n = p.N - 1;
  if (k < 1 || k > n) throw UsageError("sample_Wk: k must lie in [1, N-1]");
  const Matrix M = sample_M(p, rng);
  if (k == 1) return {1, 1.0};
  std::vector<Vector> basis;
  for (int r = 0; r < k - 1; ++r) {
    Vector v = M.row(r).transpose();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : basis) v -= u.dot(v) * u;
    }
    const double nv = v.norm();
    if (!(nv > 0.0)) throw NumericalError("sample_Wk: rows are linearly dependent");
    basis.push_back(v / nv);
  }
  Vector e = Vector::Unit(n, k - 1);
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& u : basis) e -= u.dot(e) * u;
  }
  return {k, e.norm()};
}

// Mean of 1/2 log[(beta W_k + c X_1)^2 + c^2 sum_{i=2}^{N-k} X_i^2] with
// c = sqrt(rho/N); estimates the k-th exponent.
inline ScalarEstimate estimate_lambda_k_formula(const ModelParams& p, int k, long nsamples,
                                                RngStream& rng) {
  if (k < 1 || k > p.N - 1) throw UsageError("estimate_lambda_k_formula: k out of range");
  if (nsamples < 1000) throw UsageError("estimate_lambda_k_formula: nsamples must be >= 1000");
  const double c = std::sqrt(p.rho() / p.N);
  std::vector<double> vals(nsamples);
  for (long s = 0; s < nsamples; ++s) {
    const double w = sample_Wk(p, k, rng).value;
    const double head = p.beta * w + c * rng.normal();
    double rest = 0.0;
    for (int i = 2; i <= p.N - k; ++i) {
      const double x = rng.normal();
      rest += x * x;
    }
    vals[s] = 0.5 * std::log(head * head + c * c * rest);
  }
  const MeanSe ms = mean_se(vals);
  return {ms.mean, ms.se, nsamples};
}

// E log Y for Y non-central chi-square with nu degrees of freedom and
// non-centrality kappa: log 2 + phi_{nu/2}(kappa/2).
inline double log_noncentral_chisq_mean(double nu, double kappa) {
  if (!std::isfinite(nu) || nu <= 0.0) throw DomainError("nu must be positive");
  if (!std::isfinite(kappa) || kappa < 0.0) throw DomainError("kappa must be >= 0");
  return std::log(2.0) + phi(0.5 * nu, 0.5 * kappa);
}

struct ProjectiveContraction {
  std::vector<double> log_sin;  // log sin of the angle after each step
  bool truncated = false;
};

// Two random directions pushed through the same product. The pair is kept
// as an orthonormal frame Q and a triangular factor stored as
// diag(e^{l1}, e^{l2}) [[1, a], [0, 1]], so the angle is resolved far below
// machine epsilon.
inline ProjectiveContraction track_projective_contraction(const ModelParams& p, long steps,
                                                          RngStream& rng) {
  const int n = p.N - 1;
  if (n < 2) throw UsageError("track_projective_contraction: needs N >= 3");
  if (steps < 1) throw UsageError("track_projective_contraction: steps must be >= 1");
  QrFactors f = qr_positive(sample_gaussian_matrix(n, 2, rng));
  Matrix Q = f.Q;
  double l1 = std::log(f.R(0, 0)), l2 = std::log(f.R(1, 1));
  double a = f.R(0, 1) / f.R(0, 0);
  ProjectiveContraction out;
  out.log_sin.reserve(steps);
  for (long t = 0; t < steps; ++t) {
    f = qr_positive(sample_M(p, rng) * Q);
    a += f.R(0, 1) / f.R(0, 0) * std::exp(l2 - l1);
    l1 += std::log(f.R(0, 0));
    l2 += std::log(f.R(1, 1));
    Q = f.Q;
    const double gap = l2 - l1;
    const double v = gap - 0.5 * std::log(a * a + std::exp(2.0 * gap));
    if (!std::isfinite(v)) {
      out.truncated = true;
      break;
    }
    out.log_sin.push_back(v);
  }
  return out;
}

}  // namespace gcp
