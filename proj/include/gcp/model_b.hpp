#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gcp/analytic_lyapunov.hpp"
#include "gcp/errors.hpp"
#include "gcp/linalg.hpp"
#include "gcp/parallel.hpp"
#include "gcp/random_matrix_mc.hpp"
#include "gcp/rng.hpp"
#include "gcp/stats.hpp"

namespace gcp {

struct ModelBParams {
  int N;
  int d;
  double gamma;
  double dt;

  ModelBParams(int N_, int d_, double gamma_, double dt_ = 1e-3)
      : N(N_), d(d_), gamma(gamma_), dt(dt_) {
    if (N < 2) throw DomainError("N must be >= 2");
    if (d < 1) throw DomainError("d must be >= 1");
    if (N < d + 1) throw DomainError("need N >= d + 1");
    if (!std::isfinite(gamma)) throw DomainError("gamma must be finite");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  }

  double gamma_prime() const { return gamma + 0.5 / N; }
};

// Almost-sure growth rate of tr Cov^Z.
inline double model_b_growth_rate(int N, double gamma) { return 1.0 - 3.0 / N - 2.0 * gamma; }

struct GlState {
  Matrix G;
  double t = 0.0;

  static GlState identity(int n) { return {Matrix::Identity(n, n), 0.0}; }
};

struct DiffusionState {
  Matrix Z;
  double t = 0.0;

  DiffusionState(Matrix Z_, double t_ = 0.0) : Z(std::move(Z_)), t(t_) {
    if (Z.rows() < Z.cols() + 1) throw DomainError("need N >= d + 1");
    if (!Z.allFinite()) throw DomainError("state has non-finite entries");
  }

  int N() const { return static_cast<int>(Z.rows()); }
  int d() const { return static_cast<int>(Z.cols()); }
  RowVector mean() const { return Z.colwise().mean(); }
  Matrix centered() const { return Z.rowwise() - mean(); }
  Matrix cov() const {
    const Matrix Zb = centered();
    return Zb.transpose() * Zb / N();
  }
  double tr_cov() const { return centered().squaredNorm() / N(); }
};

inline DiffusionState em_step(const DiffusionState& s, const ModelBParams& p, RngStream& rng,
                              bool* clamped = nullptr) {
  const Matrix Zb = s.centered();
  const Matrix T = psd_sqrt_clamped(Zb.transpose() * Zb / s.N(), clamped);
  const Matrix dB = std::sqrt(p.dt) * sample_gaussian_matrix(s.N(), s.d(), rng);
  DiffusionState next = s;
  next.Z += -p.gamma * p.dt * Zb + dB * T;
  next.t = s.t + p.dt;
  return next;
}

// Ito form of the right-invariant GL Brownian motion.
inline GlState gl_step(const GlState& g, double dt, RngStream& rng) {
  const auto n = g.G.rows();
  const Matrix dB = std::sqrt(dt) * sample_gaussian_matrix(n, n, rng);
  return {g.G + dB * g.G + 0.5 * dt * g.G, g.t + dt};
}

// (1/t) log of the eigenvalues of Y(t) = G(t)^T G(t), descending.
//
// G is carried as Q R e^s with R rescaled each step, the same Ito step
// applied to Q; the eigenvalues of Y are the squared singular values of R,
// which keeps eigenvalues e^{+-90} apart resolved at n = 4, t = 30.
struct GlExponents {
  Vector y_rates;
  double t = 0.0;
  long steps = 0;
};

inline GlExponents gl_exponents(int n, double t_end, double dt, RngStream& rng) {
  if (n < 1) throw DomainError("gl_exponents: n must be >= 1");
  if (!(t_end > 0.0) || !(dt > 0.0)) throw DomainError("gl_exponents: t_end and dt must be positive");
  const long steps = std::lround(t_end / dt);
  Matrix Q = Matrix::Identity(n, n);
  Matrix R = Matrix::Identity(n, n);
  double log_scale = 0.0;
  const double sq = std::sqrt(dt);
  for (long k = 0; k < steps; ++k) {
    Matrix M = sq * sample_gaussian_matrix(n, n, rng);
    M.diagonal().array() += 1.0 + 0.5 * dt;
    QrFactors f = qr_positive(M * Q);
    Q = std::move(f.Q);
    R = f.R * R;
    const double c = R.cwiseAbs().maxCoeff();
    R /= c;
    log_scale += std::log(c);
  }
  const LogSvd sv = log_singular_values(R);
  const double t = steps * dt;
  GlExponents out;
  out.t = t;
  out.steps = steps;
  out.y_rates = 2.0 * (sv.log_sigma.array() + log_scale) / t;
  return out;
}

struct GlExponentEstimate {
  Vector mean;
  Vector se;
  int paths = 0;
};

inline GlExponentEstimate estimate_gl_exponents(int n, double t_end, double dt, int paths,
                                                RngStream& rng) {
  if (paths < 2) throw UsageError("estimate_gl_exponents: paths must be >= 2");
  std::vector<std::uint64_t> seeds(paths);
  for (auto& s : seeds) s = rng.next_u64();
  std::vector<Vector> rates(paths);
  parallel_for(paths, [&](std::size_t r) {
    RngStream rr(seeds[r], r);
    rates[r] = gl_exponents(n, t_end, dt, rr).y_rates;
  });
  GlExponentEstimate est;
  est.paths = paths;
  est.mean.resize(n);
  est.se.resize(n);
  std::vector<double> col(paths);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < paths; ++r) col[r] = rates[r](i);
    const MeanSe m = mean_se(col);
    est.mean(i) = m.mean;
    est.se(i) = m.se;
  }
  return est;
}

// Exact construction: Z_bar(t) = e^{-gamma' t} V^T G(t/N) V Z_bar(0), plus
// the mean row, which moves by (1/sqrt N) dF T(t) (left-point sums).
struct ExactTrajectory {
  std::vector<DiffusionState> states;
  std::vector<Matrix> gl;  // G(t/N) at each output time
  // From the factored form; stays accurate when Z_bar is far below the mean.
  std::vector<double> log_tr_cov;
};

inline ExactTrajectory exact_trajectory(const Matrix& Z0, const ModelBParams& p, double t_end,
                                        RngStream& rng, long stride = 1) {
  if (Z0.rows() != p.N || Z0.cols() != p.d) throw DomainError("Z0 shape does not match N x d");
  if (stride < 1) throw UsageError("stride must be >= 1");
  if (!(t_end >= 0.0)) throw DomainError("t_end must be non-negative");
  const DiffusionState start(Z0);
  const Matrix V = build_projection(p.N).V;
  const Matrix U0 = V * Z0;
  const QrFactors f = qr_positive(U0);
  const double rmax = f.R.diagonal().cwiseAbs().maxCoeff();
  if (!(f.R.diagonal().cwiseAbs().minCoeff() > 1e-12 * rmax)) {
    throw DomainError("V Z(0) must have rank d");
  }
  const int n = p.N - 1;
  const long steps = std::lround(t_end / p.dt);
  const double gp = p.gamma_prime();
  const double sq_dt = std::sqrt(p.dt);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(p.N));
  const RowVector mu0 = start.mean();
  RowVector drift = RowVector::Zero(p.d);
  GlState g = GlState::identity(n);

  const auto log_tr = [&](double t) {
    return -2.0 * gp * t + 2.0 * std::log((g.G * U0).norm()) - std::log(p.N);
  };
  ExactTrajectory out;
  out.states.push_back(start);
  out.gl.push_back(g.G);
  out.log_tr_cov.push_back(log_tr(0.0));
  for (long k = 0; k < steps; ++k) {
    const double t = k * p.dt;
    const Matrix W = g.G * U0;
    const Matrix cov = std::exp(-2.0 * gp * t) * (W.transpose() * W) / p.N;
    const Matrix T = psd_sqrt_clamped(cov);
    RowVector dF(p.d);
    for (int j = 0; j < p.d; ++j) dF(j) = sq_dt * rng.normal();
    drift += inv_sqrt_n * dF * T;
    g = gl_step(g, p.dt / p.N, rng);
    if ((k + 1) % stride == 0) {
      const double t1 = (k + 1) * p.dt;
      Matrix Z = std::exp(-gp * t1) * (V.transpose() * (g.G * U0));
      Z.rowwise() += mu0 + drift;
      if (!Z.allFinite()) break;
      out.states.emplace_back(std::move(Z), t1);
      out.gl.push_back(g.G);
      out.log_tr_cov.push_back(log_tr(t1));
    }
  }
  return out;
}

struct EmTrajectory {
  std::vector<DiffusionState> states;
  bool clamped = false;
};

inline EmTrajectory em_trajectory(const Matrix& Z0, const ModelBParams& p, double t_end,
                                  RngStream& rng, long stride = 1) {
  if (Z0.rows() != p.N || Z0.cols() != p.d) throw DomainError("Z0 shape does not match N x d");
  if (stride < 1) throw UsageError("stride must be >= 1");
  const long steps = std::lround(t_end / p.dt);
  EmTrajectory out;
  DiffusionState s(Z0);
  out.states.push_back(s);
  for (long k = 0; k < steps; ++k) {
    bool c = false;
    s = em_step(s, p, rng, &c);
    s.t = (k + 1) * p.dt;
    out.clamped = out.clamped || c;
    if ((k + 1) % stride == 0) out.states.push_back(s);
  }
  return out;
}

enum class Scheme { EulerMaruyama, Exact };

// tr Cov^Z(t_end) from independent paths started at Z0.
inline std::vector<double> tr_cov_samples(Scheme scheme, const Matrix& Z0, const ModelBParams& p,
                                          double t_end, int paths, RngStream& rng) {
  if (paths < 2) throw UsageError("tr_cov_samples: paths must be >= 2");
  std::vector<std::uint64_t> seeds(paths);
  for (auto& s : seeds) s = rng.next_u64();
  const long steps = std::lround(t_end / p.dt);
  std::vector<double> out(paths);
  parallel_for(paths, [&](std::size_t r) {
    RngStream rr(seeds[r], r);
    if (scheme == Scheme::Exact) {
      out[r] = std::exp(exact_trajectory(Z0, p, t_end, rr, std::max(1L, steps)).log_tr_cov.back());
    } else {
      out[r] = em_trajectory(Z0, p, t_end, rr, std::max(1L, steps)).states.back().tr_cov();
    }
  });
  return out;
}

struct GrowthFit {
  double slope = 0.0;
  double se = 0.0;
  int paths = 0;
};

// Per-path least-squares slope of log tr Cov^Z on [t0, t1] under the exact
// construction, each path from its own standard normal Z0; mean and SE.
inline GrowthFit estimate_tr_cov_growth(const ModelBParams& p, double t0, double t1, int paths,
                                        RngStream& rng, double sample_every = 0.5) {
  if (paths < 2) throw UsageError("estimate_tr_cov_growth: paths must be >= 2");
  if (!(t1 > t0) || t0 < 0.0) throw UsageError("estimate_tr_cov_growth: need 0 <= t0 < t1");
  const long stride = std::max(1L, std::lround(sample_every / p.dt));
  std::vector<std::uint64_t> seeds(paths);
  for (auto& s : seeds) s = rng.next_u64();
  std::vector<double> slopes(paths);
  parallel_for(paths, [&](std::size_t r) {
    RngStream rr(seeds[r], r);
    const ExactTrajectory tr = exact_trajectory(sample_gaussian_matrix(p.N, p.d, rr), p, t1, rr, stride);
    std::vector<double> ts, ys;
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
      if (tr.states[i].t < t0 - 1e-9) continue;
      ts.push_back(tr.states[i].t);
      ys.push_back(tr.log_tr_cov[i]);
    }
    slopes[r] = fit_line(ts, ys).slope;
  });
  const MeanSe m = mean_se(slopes);
  return {m.mean, m.se, paths};
}

struct DriftReport {
  Matrix expected;   // ((N - 1 - 2 gamma N) / N) Cov^Z
  Matrix empirical;  // mean of Delta Cov^Z / dt
  Matrix se;
  Matrix z;
  int samples = 0;
};

inline double model_b_cov_drift_factor(int N, double gamma) {
  return (N - 1 - 2.0 * gamma * N) / N;
}

inline DriftReport cov_drift_check(const DiffusionState& s, const ModelBParams& p, int nsamples,
                                   RngStream& rng) {
  if (nsamples < 10000) throw UsageError("cov_drift_check: nsamples must be >= 10000");
  const int d = s.d();
  const Matrix c0 = s.cov();
  std::vector<std::vector<double>> draws(d * d, std::vector<double>(nsamples));
  for (int r = 0; r < nsamples; ++r) {
    const Matrix dc = (em_step(s, p, rng).cov() - c0) / p.dt;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) draws[i * d + j][r] = dc(i, j);
    }
  }
  DriftReport rep;
  rep.samples = nsamples;
  rep.expected = model_b_cov_drift_factor(p.N, p.gamma) * c0;
  rep.empirical.resize(d, d);
  rep.se.resize(d, d);
  rep.z.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const MeanSe m = mean_se(draws[i * d + j]);
      rep.empirical(i, j) = m.mean;
      rep.se(i, j) = m.se;
      rep.z(i, j) = (m.mean - rep.expected(i, j)) / m.se;
    }
  }
  return rep;
}

inline Regime classify_model_b(double gamma, int N, double tol = 1e-9) {
  const double gc = model_b_critical_gamma(N);
  const double rate = model_b_growth_rate(N, gamma);
  if (gamma > gc + tol) return {RegimeTag::Subcritical, rate, tol};
  if (gamma < gc - tol) return {RegimeTag::Supercritical, rate, tol};
  return {RegimeTag::Critical, rate, tol};
}

// e_2 / e_1 of Cov^Z; the analogue of the Model A alignment diagnostic.
inline double model_b_eig_ratio(const DiffusionState& s) {
  if (s.d() < 2) throw UsageError("eigenvalue ratio needs d >= 2");
  const LogSvd sv = log_singular_values(qr_positive(s.centered()).R);
  return std::exp(2.0 * (sv.log_sigma(1) - sv.log_sigma(0)));
}

}  // namespace gcp
