#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "irlobs/monomials.hpp"
#include "irlobs/numerics.hpp"

namespace irlobs::plant {

/// Second-order linear plant pdot = q, qdot = A [p; q] + B u with
/// A = [A1, A2] (n x 2n) and B (n x m).
class LinearPlant {
 public:
  LinearPlant(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
    n_ = A_.rows();
    m_ = B_.cols();
    numerics::require_dims(n_ > 0 && m_ > 0, "LinearPlant: empty A or B");
    numerics::require_dims(A_.cols() == 2 * n_, "LinearPlant: A must be n x 2n");
    numerics::require_dims(B_.rows() == n_, "LinearPlant: B must be n x m");
    numerics::require_finite(A_, "LinearPlant: A");
    numerics::require_finite(B_, "LinearPlant: B");
    if (numerics::controllability_rank(a_prime(), b_prime()) != 2 * n_) {
      throw DomainError("LinearPlant: (A', B') is not controllable");
    }
  }

  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index m() const noexcept { return m_; }
  Eigen::Index state_dim() const noexcept { return 2 * n_; }
  const Matrix& A() const noexcept { return A_; }
  const Matrix& B() const noexcept { return B_; }
  Matrix A1() const { return A_.leftCols(n_); }
  Matrix A2() const { return A_.rightCols(n_); }

  /// [[0, I], [A1, A2]]
  Matrix a_prime() const { return assemble_a_prime(A_); }
  /// [0; B]
  Matrix b_prime() const { return assemble_b_prime(B_); }

  static Matrix assemble_a_prime(const Matrix& A) {
    const Eigen::Index n = A.rows();
    Matrix Ap = Matrix::Zero(2 * n, 2 * n);
    Ap.topRightCorner(n, n).setIdentity();
    Ap.bottomRows(n) = A;
    return Ap;
  }

  static Matrix assemble_b_prime(const Matrix& B) {
    Matrix Bp = Matrix::Zero(2 * B.rows(), B.cols());
    Bp.bottomRows(B.rows()) = B;
    return Bp;
  }

  Vector dynamics(const Vector& x, const Vector& u) const {
    Vector xdot(2 * n_);
    xdot.head(n_) = x.tail(n_);
    xdot.tail(n_) = A_ * x + B_ * u;
    return xdot;
  }

 private:
  Matrix A_;
  Matrix B_;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
};

/// r(x, u) = W_Q^T sigma_Q(x) + u^T diag(R) u with a quadratic sigma_Q.
struct CostFunction {
  QuadraticMonomials q_basis;
  Vector q_weights;  // W_Q*
  Vector r_diag;     // [r1, ..., rm]
  double r1_known = 0.0;

  CostFunction(QuadraticMonomials basis, Vector w_q, Vector r)
      : q_basis(std::move(basis)), q_weights(std::move(w_q)), r_diag(std::move(r)) {
    numerics::require_dims(q_weights.size() == q_basis.size(),
                           "CostFunction: W_Q length differs from basis size");
    numerics::require_dims(r_diag.size() > 0, "CostFunction: empty R");
    if ((r_diag.array() <= 0.0).any() || !r_diag.allFinite()) {
      throw DomainError("CostFunction: R entries must be positive");
    }
    r1_known = r_diag(0);
    const Matrix Q = q_matrix();
    if (numerics::min_eigenvalue(Q) < -1e-12 * std::max(1.0, Q.norm())) {
      throw DomainError("CostFunction: Q(x) is not positive semidefinite");
    }
  }

  Matrix q_matrix() const { return q_basis.to_symmetric(q_weights); }
  Matrix r_matrix() const { return r_diag.asDiagonal(); }
  double state_cost(const Vector& x) const { return q_weights.dot(q_basis.eval(x)); }
  double operator()(const Vector& x, const Vector& u) const {
    return state_cost(x) + u.dot(r_diag.cwiseProduct(u));
  }
};

/// The observed agent: plant, true cost, and the LQR policy u = -K x.
struct Demonstrator {
  LinearPlant plant;
  CostFunction cost;
  Matrix riccati_P;
  Matrix feedback_gain;

  double value(const Vector& x) const { return x.dot(riccati_P * x); }
  Matrix closed_loop() const { return plant.a_prime() - plant.b_prime() * feedback_gain; }
};

/// Solves the ARE for the true cost and checks the closed loop.
///
/// The Riccati equation is solved on (Q, R) divided by r1, so scaling the
/// whole cost by K > 0 reproduces the same gain bit-for-bit whenever the
/// scaled entries are exact in floating point.
inline Demonstrator make_demonstrator(LinearPlant plant, CostFunction cost) {
  numerics::require_dims(cost.q_basis.dim() == plant.state_dim(),
                         "make_demonstrator: cost basis dimension differs from 2n");
  numerics::require_dims(cost.r_diag.size() == plant.m(),
                         "make_demonstrator: R length differs from m");
  const double scale = cost.r_diag(0);
  const Matrix Qn = cost.q_matrix() / scale;
  const Vector rn = cost.r_diag / scale;
  const Matrix Ap = plant.a_prime();
  const Matrix Bp = plant.b_prime();
  const Matrix Pn = numerics::solve_are(Ap, Bp, Qn, rn.asDiagonal());
  Matrix K = Bp.transpose() * Pn;
  for (Eigen::Index i = 0; i < K.rows(); ++i) K.row(i) /= rn(i);
  if (!numerics::is_hurwitz(Ap - Bp * K)) {
    throw SolverFailure("make_demonstrator: closed loop is not Hurwitz",
                        numerics::are_residual(Ap, Bp, Qn, rn.asDiagonal(), Pn));
  }
  Matrix P = scale * Pn;
  return Demonstrator{std::move(plant), std::move(cost), std::move(P), std::move(K)};
}

inline Vector optimal_action(const Demonstrator& d, const Vector& x) {
  numerics::require_dims(x.size() == d.plant.state_dim(), "optimal_action: state dimension");
  return -d.feedback_gain * x;
}

/// Oracle entry point: the demonstrator's action at an arbitrary state.
inline Vector query(const Demonstrator& d, const Vector& x_star) { return optimal_action(d, x_star); }

/// dV*/dx (A'x + B'u) + r(x, u); zero along optimal behaviour.
inline double hjb_residual(const Demonstrator& d, const Vector& x, const Vector& u) {
  const Vector xdot = d.plant.dynamics(x, u);
  return 2.0 * x.dot(d.riccati_P * xdot) + d.cost(x, u);
}

/// Full-state trajectory on a uniform grid (ground truth; never handed to
/// the estimator).
struct Trajectory {
  double dt = 0.0;
  std::vector<Vector> states;
  std::vector<Vector> inputs;

  std::size_t size() const noexcept { return states.size(); }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
};

using Policy = std::function<Vector(double, const Vector&)>;

inline std::size_t step_count(double duration, double dt) {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (!(duration >= 0.0)) throw DomainError("duration must be nonnegative");
  return static_cast<std::size_t>(std::llround(duration / dt));
}

/// RK4 under a (possibly time-varying) feedback policy; the policy is
/// re-evaluated at every stage.
inline Trajectory simulate_plant(const LinearPlant& plant, const Vector& x0, double duration,
                                 double dt, const Policy& policy) {
  numerics::require_dims(x0.size() == plant.state_dim(), "simulate_plant: x0 dimension");
  const std::size_t steps = step_count(duration, dt);
  Trajectory traj;
  traj.dt = dt;
  traj.states.reserve(steps + 1);
  traj.inputs.reserve(steps + 1);
  auto field = [&](double t, const Vector& x) { return plant.dynamics(x, policy(t, x)); };
  Vector x = x0;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    traj.states.push_back(x);
    traj.inputs.push_back(policy(t, x));
    if (k == steps) break;
    x = numerics::rk4_step(field, t, x, dt);
  }
  return traj;
}

inline Trajectory simulate_demonstrator_trajectory(const Demonstrator& d, const Vector& x0,
                                                   double duration, double dt) {
  return simulate_plant(d.plant, x0, duration, dt,
                        [&d](double, const Vector& x) { return optimal_action(d, x); });
}

struct MeasuredLogs {
  numerics::SampledSignal position;
  numerics::SampledSignal input;
};

/// Position and input logs only; the velocity stays internal.
inline MeasuredLogs measured_logs(const Trajectory& traj, Eigen::Index n) {
  const Eigen::Index m = traj.inputs.empty() ? 1 : traj.inputs.front().size();
  MeasuredLogs logs{numerics::SampledSignal(traj.dt, n), numerics::SampledSignal(traj.dt, m)};
  for (std::size_t k = 0; k < traj.size(); ++k) {
    logs.position.push(traj.states[k].head(n));
    logs.input.push(traj.inputs[k]);
  }
  return logs;
}

inline MeasuredLogs simulate_demonstrator(const Demonstrator& d, const Vector& x0, double duration,
                                          double dt) {
  if (!(duration > 0.0)) throw DomainError("simulate_demonstrator: duration must be positive");
  return measured_logs(simulate_demonstrator_trajectory(d, x0, duration, dt), d.plant.n());
}

}  // namespace irlobs::plant
