#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gcp/analytic_lyapunov.hpp"
#include "gcp/errors.hpp"
#include "gcp/linalg.hpp"
#include "gcp/parallel.hpp"
#include "gcp/random_matrix_mc.hpp"
#include "gcp/rng.hpp"
#include "gcp/stats.hpp"

namespace gcp {

enum class RankCheck { RequireFullRank, AllowDegenerate };
enum class StepMethod { Matrix, Direct };

// Opinions of N agents on d topics at time t.
//
// The centred part is held as X_bar = e^s Q R (Q: N x d with orthonormal,
// zero-sum columns; R: d x d upper triangular, max |R_ij| = 1) and the mean
// separately. The dynamics act linearly on X_bar from the left, so updates
// touch only Q, R and s. This keeps X_bar exact relative to its own size
// when it is e^{+-700} away from the mean, and keeps the small singular
// values of X_bar resolved long after they fall below epsilon times the
// largest.
class OpinionState {
 public:
  explicit OpinionState(const Matrix& X, long t = 0,
                        RankCheck check = RankCheck::RequireFullRank)
      : t_(t) {
    if (X.cols() < 1 || X.rows() < X.cols() + 1) {
      throw DomainError("OpinionState: need N >= d + 1 rows");
    }
    if (!X.allFinite()) throw DomainError("OpinionState: non-finite opinions");
    mean_ = X.colwise().mean();
    set_centered(X.rowwise() - mean_, 0.0);
    if (check == RankCheck::RequireFullRank) {
      const Vector diag = factor_.diagonal().cwiseAbs();
      if (!(diag.minCoeff() > 1e-12 * diag.maxCoeff())) {
        throw DomainError("OpinionState: initial covariance is not positive definite");
      }
    }
  }

  int N() const { return static_cast<int>(basis_.rows()); }
  int d() const { return static_cast<int>(basis_.cols()); }
  long t() const { return t_; }
  const RowVector& mean() const { return mean_; }
  double log_scale() const { return log_scale_; }
  const Matrix& basis() const { return basis_; }
  const Matrix& factor() const { return factor_; }

  Matrix centered() const { return std::exp(log_scale_) * (basis_ * factor_); }
  Matrix X() const { return centered().rowwise() + mean_; }
  Matrix cov() const {
    return std::exp(2.0 * log_scale_) * (factor_.transpose() * factor_) / N();
  }

  bool is_consensus() const { return factor_.cwiseAbs().maxCoeff() == 0.0; }

  // Descending; -inf for exactly zero eigenvalues.
  Vector log_cov_eigenvalues() const {
    const LogSvd sv = log_singular_values(factor_);
    return (2.0 * (sv.log_sigma.array() + log_scale_) - std::log(N())).matrix();
  }
  Vector cov_eigenvalues() const { return log_cov_eigenvalues().array().exp().matrix(); }

  // log max_i |X_i - mu|.
  double log_diameter() const {
    const Matrix Y = basis_ * factor_;
    double best = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) best = std::max(best, Y.row(i).stableNorm());
    return std::log(best) + log_scale_;
  }

  double log_var(int j) const {
    return 2.0 * (std::log(factor_.col(j).stableNorm()) + log_scale_) - std::log(N());
  }

  // Pearson correlations between topic columns; NaN where a column has
  // zero variance.
  Matrix correlations() const {
    const Matrix K = factor_.transpose() * factor_;
    Matrix C(d(), d());
    for (int i = 0; i < d(); ++i) {
      for (int j = 0; j < d(); ++j) {
        const double den = std::sqrt(K(i, i) * K(j, j));
        C(i, j) = den > 0.0 ? K(i, j) / den : std::numeric_limits<double>::quiet_NaN();
      }
    }
    return C;
  }

  bool finite() const {
    return mean_.allFinite() && factor_.allFinite() && basis_.allFinite() &&
           std::isfinite(log_scale_);
  }

 private:
  OpinionState() = default;

  // A: centred opinions in units of e^{log_scale}.
  void set_centered(const Matrix& A, double log_scale) {
    QrFactors f = qr_positive(A);
    // Near alignment the trailing columns of Q come from tiny residuals and
    // inherit an amplified column-sum error; project it out and re-orthonormalise.
    QrFactors g = qr_positive(f.Q.rowwise() - f.Q.colwise().mean());
    basis_ = std::move(g.Q);
    factor_ = g.R * f.R;
    log_scale_ = log_scale;
    rescale();
  }

  void rescale() {
    const double c = factor_.cwiseAbs().maxCoeff();
    if (c > 0.0 && std::isfinite(c)) {
      factor_ /= c;
      log_scale_ += std::log(c);
    }
  }

  friend OpinionState step_matrix_with(const OpinionState&, const ModelParams&, const Matrix&);
  friend OpinionState step_direct_raw(const OpinionState&, double, double, RngStream&, bool*);
  friend OpinionState normalize_state(const OpinionState&);

  RowVector mean_;
  Matrix basis_;
  Matrix factor_;
  double log_scale_ = 0.0;
  long t_ = 0;
};

// X <- S X with S = (1/N) 1 1^T + [beta I + sqrt(rho/N) G] V^T V, for a
// given N x N draw G. Since V^T V X = X_bar, S X = 1 mu + (beta I + c G) X_bar,
// which is applied directly on the factored form.
inline OpinionState step_matrix_with(const OpinionState& s, const ModelParams& p,
                                     const Matrix& G) {
  const double c = std::sqrt(p.rho() / p.N);
  const Matrix B = p.beta * s.basis_ + c * (G * s.basis_);
  const RowVector shift = B.colwise().mean();
  OpinionState next;
  next.t_ = s.t_ + 1;
  next.mean_ = s.mean_ + std::exp(s.log_scale_) * (shift * s.factor_);
  QrFactors f = qr_positive(B.rowwise() - shift);
  next.basis_ = std::move(f.Q);
  next.factor_ = f.R * s.factor_;
  next.log_scale_ = s.log_scale_;
  next.rescale();
  return next;
}

inline OpinionState step_matrix(const OpinionState& s, const ModelParams& p, RngStream& rng) {
  if (s.N() != p.N || s.d() != p.d) throw UsageError("step_matrix: state shape mismatch");
  return step_matrix_with(s, p, sample_gaussian_matrix(p.N, p.N, rng));
}

// The explicit S(t), for checking step_matrix_with against S X.
inline Matrix build_S(const ModelParams& p, const Matrix& G) {
  const Matrix V = build_projection(p.N).V;
  Matrix core = std::sqrt(p.rho() / p.N) * G;
  core.diagonal().array() += p.beta;
  return Matrix::Constant(p.N, p.N, 1.0 / p.N) + core * V.transpose() * V;
}

// X_i <- beta X_i + (1 - beta) Y_i with Y_i ~ N(mu, alpha Cov). alpha = 0 is
// accepted here (noiseless contraction). *clamped reports a materially
// negative covariance eigenvalue that was clamped to 0.
inline OpinionState step_direct_raw(const OpinionState& s, double alpha, double beta,
                                    RngStream& rng, bool* clamped = nullptr) {
  const Matrix T = psd_sqrt_clamped(s.factor_.transpose() * s.factor_ / s.N(), clamped);
  const Matrix Z = sample_gaussian_matrix(s.N(), s.d(), rng);
  const Matrix A = beta * (s.basis_ * s.factor_) + (1.0 - beta) * std::sqrt(alpha) * (Z * T);
  const RowVector shift = A.colwise().mean();
  OpinionState next;
  next.t_ = s.t_ + 1;
  next.mean_ = s.mean_ + std::exp(s.log_scale_) * shift;
  next.set_centered(A.rowwise() - shift, s.log_scale_);
  return next;
}

inline OpinionState step_direct(const OpinionState& s, const ModelParams& p, RngStream& rng,
                                bool* clamped = nullptr) {
  if (s.N() != p.N || s.d() != p.d) throw UsageError("step_direct: state shape mismatch");
  return step_direct_raw(s, p.alpha, p.beta, rng, clamped);
}

inline OpinionState step(const OpinionState& s, const ModelParams& p, RngStream& rng,
                         StepMethod method) {
  return method == StepMethod::Matrix ? step_matrix(s, p, rng) : step_direct(s, p, rng);
}

// Centred state scaled so the top covariance eigenvalue is 1.
inline OpinionState normalize_state(const OpinionState& s) {
  if (s.is_consensus()) throw DomainError("normalize_state: covariance is zero");
  OpinionState out = s;
  out.mean_.setZero();
  out.log_scale_ = 0.5 * std::log(s.N()) - log_singular_values(s.factor_).log_sigma(0);
  return out;
}

struct TrajectoryRecord {
  std::vector<long> times;
  std::vector<RowVector> means;
  std::vector<Vector> cov_eigenvalues;      // descending
  std::vector<Vector> log_cov_eigenvalues;  // descending
  std::vector<Matrix> topic_correlations;
  std::vector<Vector> log_var_topic;        // log Cov_jj for each topic j
  std::vector<double> diameters;
  std::vector<double> log_diameters;
  bool truncated = false;

  void record(const OpinionState& s) {
    times.push_back(s.t());
    means.push_back(s.mean());
    log_cov_eigenvalues.push_back(s.log_cov_eigenvalues());
    cov_eigenvalues.push_back(log_cov_eigenvalues.back().array().exp().matrix());
    topic_correlations.push_back(s.correlations());
    Vector lv(s.d());
    for (int j = 0; j < s.d(); ++j) lv(j) = s.log_var(j);
    log_var_topic.push_back(lv);
    log_diameters.push_back(s.log_diameter());
    diameters.push_back(std::exp(log_diameters.back()));
  }
};

// Iterates T steps, recording every `stride` steps (and at t = 0). If the
// mean overflows, recording stops there and `truncated` is set.
inline TrajectoryRecord run_trajectory(const ModelParams& p, const Matrix& X0, long T,
                                       RngStream& rng, long stride = 1,
                                       StepMethod method = StepMethod::Matrix) {
  if (T < 1) throw UsageError("run_trajectory: T must be >= 1");
  if (stride < 1) throw UsageError("run_trajectory: stride must be >= 1");
  if (X0.rows() != p.N || X0.cols() != p.d) throw UsageError("run_trajectory: X0 shape mismatch");
  OpinionState s(X0);
  TrajectoryRecord rec;
  rec.record(s);
  for (long t = 1; t <= T; ++t) {
    s = step(s, p, rng, method);
    if (!s.finite()) {
      rec.truncated = true;
      break;
    }
    if (t % stride == 0) rec.record(s);
  }
  return rec;
}

inline OpinionState advance(OpinionState s, const ModelParams& p, long steps, RngStream& rng,
                            StepMethod method = StepMethod::Matrix) {
  for (long t = 0; t < steps; ++t) s = step(s, p, rng, method);
  return s;
}

struct AlignmentDiagnostics {
  double eig_ratio = 0.0;      // e2 / e1
  double log_eig_ratio = 0.0;
  Matrix correlations;
  bool undefined_correlation = false;
};

inline AlignmentDiagnostics alignment_diagnostics(const OpinionState& s) {
  if (s.d() < 2) throw UsageError("alignment_diagnostics: needs d >= 2");
  if (s.is_consensus()) throw DomainError("alignment_diagnostics: covariance is zero");
  AlignmentDiagnostics a;
  const Vector le = s.log_cov_eigenvalues();
  a.log_eig_ratio = le(1) - le(0);
  a.eig_ratio = std::exp(a.log_eig_ratio);
  a.correlations = s.correlations();
  a.undefined_correlation = a.correlations.hasNaN();
  return a;
}

// Coefficient of 2 rho / N in the conditional variance of a covariance entry.
enum class VarianceCoefficient { BetaSquared, OneMinusBetaSquared };

// Var[Cov_ij(t) | X(t-1)] = (rho^2 (N-1)/N^2 + 2 b rho/N)(C_ii C_jj + C_ij^2),
// with b selected by `form`.
inline double cov_conditional_variance_factor(const ModelParams& p, VarianceCoefficient form) {
  const double rho = p.rho(), n = p.N;
  const double b = form == VarianceCoefficient::BetaSquared
                       ? p.beta * p.beta
                       : (1.0 - p.beta) * (1.0 - p.beta);
  return rho * rho * (n - 1.0) / (n * n) + 2.0 * b * rho / n;
}

inline double cov_conditional_mean_factor(const ModelParams& p) {
  return (p.N - 1.0) * p.rho() / p.N + p.beta * p.beta;
}

struct CovMomentReport {
  double mean_factor = 0.0;
  Matrix mean_z;                      // per entry of Cov(t)
  Matrix variance_z_beta_sq;          // against the beta^2 coefficient
  Matrix variance_z_one_minus_beta_sq;
  long samples = 0;
};

inline CovMomentReport cov_conditional_moment_check(const OpinionState& s, const ModelParams& p,
                                                    long nsamples, RngStream& rng,
                                                    StepMethod method = StepMethod::Matrix) {
  if (nsamples < 10000) throw UsageError("cov_conditional_moment_check: nsamples must be >= 1e4");
  const int d = s.d();
  const Matrix C = s.cov();
  std::vector<std::vector<double>> entries(d * d, std::vector<double>(nsamples));
  for (long r = 0; r < nsamples; ++r) {
    const Matrix Cn = step(s, p, rng, method).cov();
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) entries[i * d + j][r] = Cn(i, j);
    }
  }
  CovMomentReport rep;
  rep.samples = nsamples;
  rep.mean_factor = cov_conditional_mean_factor(p);
  rep.mean_z.resize(d, d);
  rep.variance_z_beta_sq.resize(d, d);
  rep.variance_z_one_minus_beta_sq.resize(d, d);
  const double vb = cov_conditional_variance_factor(p, VarianceCoefficient::BetaSquared);
  const double v1b = cov_conditional_variance_factor(p, VarianceCoefficient::OneMinusBetaSquared);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const MeanSe m = mean_se(entries[i * d + j]);
      const double shape = C(i, i) * C(j, j) + C(i, j) * C(i, j);
      rep.mean_z(i, j) = (m.mean - rep.mean_factor * C(i, j)) / m.se;
      rep.variance_z_beta_sq(i, j) = (m.variance - vb * shape) / m.variance_se;
      rep.variance_z_one_minus_beta_sq(i, j) = (m.variance - v1b * shape) / m.variance_se;
    }
  }
  return rep;
}

struct LogVarWalkReport {
  double mean_increment = 0.0;
  double se = 0.0;
  double expected = 0.0;  // 2 lambda1
  double z = 0.0;
  double lag1_autocorrelation = 0.0;
  double lag1_z = 0.0;
  long increments = 0;
};

// log Cov_jj moves as a random walk with i.i.d. increments of mean 2 lambda1.
inline LogVarWalkReport logvar_random_walk_check(const TrajectoryRecord& rec, const ModelParams& p,
                                                 int j = 0) {
  const std::size_t n = rec.log_var_topic.size();
  if (n < 3) throw UsageError("logvar_random_walk_check: trajectory too short");
  if (j < 0 || j >= rec.log_var_topic.front().size()) {
    throw UsageError("logvar_random_walk_check: topic out of range");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (rec.times[i] != rec.times[i - 1] + 1) {
      throw UsageError("logvar_random_walk_check: needs a stride-1 trajectory");
    }
  }
  std::vector<double> inc(n - 1);
  for (std::size_t i = 1; i < n; ++i) inc[i - 1] = rec.log_var_topic[i](j) - rec.log_var_topic[i - 1](j);
  const MeanSe m = mean_se(inc);
  LogVarWalkReport r;
  r.increments = static_cast<long>(inc.size());
  r.mean_increment = m.mean;
  r.se = m.se;
  r.expected = 2.0 * lambda1(p);
  r.z = (m.mean - r.expected) / m.se;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < inc.size(); ++i) {
    den += (inc[i] - m.mean) * (inc[i] - m.mean);
    if (i > 0) num += (inc[i] - m.mean) * (inc[i - 1] - m.mean);
  }
  r.lag1_autocorrelation = num / den;
  r.lag1_z = r.lag1_autocorrelation * std::sqrt(static_cast<double>(inc.size()));
  return r;
}

// E[x_1^4] for x uniform on the unit sphere of the zero-sum hyperplane of R^N.
inline double uniform_sphere_fourth_moment(int N) {
  return 3.0 * (N - 1.0) / (static_cast<double>(N) * N * (N + 1.0));
}

struct SphereLimitReport {
  int replicas = 0;
  std::vector<double> mean_sq;  // E[x_i^2] per coordinate
  std::vector<double> se_sq;
  std::vector<double> z_sq;     // against 1/N
  double max_abs_coordinate_sum = 0.0;
  double fourth_moment = 0.0;   // E[x_1^4]; the coordinate average is constant at N = 3
  double fourth_se = 0.0;
  double fourth_expected = 0.0;
  double max_eig_ratio = 0.0;
  bool inconclusive = false;
};

// Unit vector (X_hat_1 . v, ..., X_hat_N . v) along the dominant direction v
// of the normalised state.
inline Vector dominant_profile(const OpinionState& s) {
  const OpinionState n = normalize_state(s);
  const LogSvd sv = log_singular_values(n.factor());
  const Vector y = n.basis() * (n.factor() * sv.right_vectors.col(0));
  return y / y.norm();
}

inline SphereLimitReport sphere_limit_check(const ModelParams& p, long T, int replicas,
                                            RngStream& rng, double eig_ratio_threshold = 1e-8) {
  if (replicas < 2) throw UsageError("sphere_limit_check: replicas must be >= 2");
  std::vector<std::uint64_t> seeds(replicas);
  for (auto& s : seeds) s = rng.next_u64();
  std::vector<Vector> profiles(replicas);
  std::vector<double> ratios(replicas, 0.0);
  parallel_for(replicas, [&](std::size_t r) {
    RngStream rr(seeds[r], r);
    OpinionState s(sample_gaussian_matrix(p.N, p.d, rr));
    s = advance(s, p, T, rr);
    profiles[r] = dominant_profile(s);
    if (p.d >= 2) ratios[r] = alignment_diagnostics(s).eig_ratio;
  });
  SphereLimitReport rep;
  rep.replicas = replicas;
  rep.fourth_expected = uniform_sphere_fourth_moment(p.N);
  std::vector<double> col(replicas), fourth(replicas);
  for (int i = 0; i < p.N; ++i) {
    for (int r = 0; r < replicas; ++r) col[r] = profiles[r](i) * profiles[r](i);
    const MeanSe m = mean_se(col);
    rep.mean_sq.push_back(m.mean);
    rep.se_sq.push_back(m.se);
    rep.z_sq.push_back((m.mean - 1.0 / p.N) / m.se);
  }
  for (int r = 0; r < replicas; ++r) {
    rep.max_abs_coordinate_sum = std::max(rep.max_abs_coordinate_sum, std::abs(profiles[r].sum()));
    fourth[r] = std::pow(profiles[r](0), 4);
    rep.max_eig_ratio = std::max(rep.max_eig_ratio, ratios[r]);
  }
  const MeanSe f = mean_se(fourth);
  rep.fourth_moment = f.mean;
  rep.fourth_se = f.se;
  rep.inconclusive = rep.max_eig_ratio > eig_ratio_threshold;
  return rep;
}

}  // namespace gcp
