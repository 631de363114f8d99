#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "irlobs/estimator.hpp"
#include "irlobs/irl.hpp"
#include "irlobs/numerics.hpp"

namespace irlobs::purge {

struct QualityConfig {
  double T = 1.0;         // smoothing / rollout horizon, seconds
  Matrix S1;              // 2n x 2n PSD
  Matrix S2;              // n x n PSD
  std::size_t half_width = 5;  // smoothing window half-width, samples

  static QualityConfig defaults(Eigen::Index n) {
    return {1.0, Matrix::Identity(2 * n, 2 * n), Matrix::Identity(n, n), 5};
  }

  void validate(Eigen::Index n, double dt) const {
    auto psd = [](const Matrix& S, Eigen::Index dim, const char* field) {
      if (S.rows() != dim || S.cols() != dim) throw ConfigError(field, "wrong dimensions");
      if ((S - S.transpose()).norm() > 1e-12 * std::max(1.0, S.norm())) {
        throw ConfigError(field, "must be symmetric");
      }
      if (numerics::min_eigenvalue(S) < -1e-12 * std::max(1.0, S.norm())) {
        throw ConfigError(field, "must be positive semidefinite");
      }
    };
    psd(S1, 2 * n, "purge.S1");
    psd(S2, n, "purge.S2");
    if (half_width == 0) throw ConfigError("purge.w", "must be at least 1");
    if (!(T >= static_cast<double>(2 * half_width + 1) * dt)) {
      throw ConfigError("purge.T", "must cover the smoothing window (2w+1) dt");
    }
  }
};

/// Derivative at the center of a least-squares quadratic fitted, per
/// coordinate, to the 2w+1 samples centred at t_center (noncausal).
inline Vector smooth_velocity(const numerics::SampledSignal& p_log, double t_center, std::size_t w) {
  if (w == 0) throw DomainError("smooth_velocity: half-width must be positive");
  const std::size_t c = p_log.index_of(t_center);
  if (c < w || c < p_log.first_index() + w || c + w >= p_log.count()) {
    throw WindowUnderflow("smooth_velocity: insufficient samples around t - T");
  }
  const Eigen::Index len = static_cast<Eigen::Index>(2 * w + 1);
  const double h = p_log.dt();
  Matrix V(len, 3);
  Matrix Y(len, p_log.dim());
  for (Eigen::Index j = 0; j < len; ++j) {
    const double s = static_cast<double>(j - static_cast<Eigen::Index>(w));
    V.row(j) << 1.0, s, s * s;
    Y.row(j) = p_log.at_index(c - w + static_cast<std::size_t>(j)).transpose();
  }
  Vector v(p_log.dim());
  for (Eigen::Index i = 0; i < p_log.dim(); ++i) {
    v(i) = numerics::least_squares(V, Y.col(i))(1) / h;
  }
  return v;
}

/// x_bar^T S1 x_bar with x_bar = [p~(t); q^(t-T) - smoothed velocity(t-T)].
inline double quality_eta1(const Vector& p_tilde_now, const Vector& q_hat_past,
                           const Vector& smoothed_v, const Matrix& S1) {
  numerics::require_dims(p_tilde_now.size() == q_hat_past.size() &&
                             smoothed_v.size() == q_hat_past.size() &&
                             S1.rows() == 2 * p_tilde_now.size(),
                         "quality_eta1: dimension");
  Vector xbar(S1.rows());
  xbar << p_tilde_now, q_hat_past - smoothed_v;
  return std::max(0.0, xbar.dot(S1 * xbar));
}

namespace detail {

/// One RK4 step of xdot = A' x + B' u(tau) with u linear across the step,
/// as a matrix acting on [x; u0; u1 - u0]. RK4 on the augmented autonomous
/// system (x, u, du) reproduces the stage inputs exactly.
inline Matrix rk4_step_matrix(const Matrix& Ap, const Matrix& Bp, double dt) {
  const Eigen::Index d = Ap.rows();
  const Eigen::Index m = Bp.cols();
  Matrix F = Matrix::Zero(d + 2 * m, d + 2 * m);
  F.topLeftCorner(d, d) = dt * Ap;
  F.block(0, d, d, m) = dt * Bp;
  F.block(d, d + m, m, m).setIdentity();
  Matrix step = Matrix::Identity(F.rows(), F.cols());
  Matrix term = step;
  for (int k = 1; k <= 4; ++k) {
    term = term * F / static_cast<double>(k);
    step += term;
  }
  return step.topRows(d);
}

}  // namespace detail

/// Integral over [t-T, t] of e^T S2 e, where e is the gap between the
/// estimated model's position rollout (from [p(t-T); smoothed velocity])
/// and the measured positions. +inf if the rollout blows up.
inline double quality_eta2(const numerics::SampledSignal& p_log, const numerics::SampledSignal& u_log,
                           const estimator::ThetaVector& theta_hat, double t, double T,
                           const Matrix& S2, std::size_t w) {
  const Eigen::Index n = p_log.dim();
  const Eigen::Index m = u_log.dim();
  numerics::require_dims(S2.rows() == n && S2.cols() == n, "quality_eta2: S2 dimension");
  const double dt = p_log.dt();
  const std::size_t k_end = p_log.index_of(t);
  const std::size_t k_start = p_log.index_of(t - T);
  const Matrix step = detail::rk4_step_matrix(theta_hat.a_prime(), theta_hat.b_prime(), dt);
  const Matrix Phi = step.leftCols(2 * n);
  const Matrix G0 = step.middleCols(2 * n, m);
  const Matrix G1 = step.rightCols(m);
  Vector x(2 * n);
  x << p_log.at_index(k_start), smooth_velocity(p_log, t - T, w);
  Vector next(2 * n);
  Vector e(n);
  auto err_cost = [&](std::size_t k) {
    e = x.head(n) - p_log.at_index(k);
    return e.dot(S2 * e);
  };
  double acc = 0.0;
  double prev = err_cost(k_start);
  for (std::size_t k = k_start; k < k_end; ++k) {
    const Vector& u0 = u_log.at_index(k);
    const Vector& u1 = u_log.at_index(k + 1);
    next.noalias() = Phi * x;
    next.noalias() += G0 * u0;
    next.noalias() += G1 * (u1 - u0);
    x.swap(next);
    const double cur = err_cost(k + 1);
    acc += 0.5 * dt * (prev + cur);
    prev = cur;
    if (!std::isfinite(acc)) return std::numeric_limits<double>::infinity();
  }
  return std::max(0.0, acc);
}

struct PurgeState {
  std::size_t s = 0;  // purge count
  double kappa1_bar = 1e6;
  double kappa2_bar = 1e6;
  double eta_bar = std::numeric_limits<double>::infinity();
  irl::WeightVector W_current;
  bool varpi = false;
  /// Hold W until the stack has been filled (as well as the kappa/varpi gate).
  bool require_full_stack = true;
};

struct PurgeOutcome {
  bool weights_updated = false;
  bool purged = false;
  double kappa_gram = std::numeric_limits<double>::infinity();
};

/// Weight update and purge decision for one sample.
///
/// (a) kappa(Sigma^T Sigma) < kappa1_bar and varpi = 1: re-solve W (a
///     refused solve holds the previous value).
/// (b) kappa(Sigma^T Sigma) < kappa2_bar and eta_now < eta_bar: empty the
///     stack and count the purge. W survives.
inline PurgeOutcome purge_policy(PurgeState& ps, irl::IrlHistoryStack& stack, double eta_now,
                                 const irl::FeatureBasis& basis, double xi2) {
  PurgeOutcome out;
  out.kappa_gram = stack.kappa_gram();
  ps.eta_bar = stack.min_quality();
  const bool stack_ready = !ps.require_full_stack || stack.full();
  if (out.kappa_gram < ps.kappa1_bar && ps.varpi && stack_ready) {
    try {
      ps.W_current = irl::solve_weights(stack, basis, ps.W_current.r1, xi2);
      out.weights_updated = true;
    } catch (const RankDeficient&) {
    } catch (const DomainError&) {
    }
  }
  if (out.kappa_gram < ps.kappa2_bar && eta_now < ps.eta_bar) {
    stack.clear();
    ++ps.s;
    out.purged = true;
    ps.eta_bar = stack.min_quality();
  }
  return out;
}

}  // namespace irlobs::purge
