#pragma once

#include <cmath>
#include <optional>

#include "irlobs/numerics/linalg.hpp"

namespace irlobs::numerics {

/// Frobenius norm of A^T P + P A - P B R^{-1} B^T P + Q.
inline double are_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                           const Matrix& P) {
  const Matrix BtP = B.transpose() * P;
  return (A.transpose() * P + P * A - BtP.transpose() * R.ldlt().solve(BtP) + Q).norm();
}

namespace detail {

/// Stabilizing gain for a plant in second-order companion form
/// A = [[0, I], [A1, A2]], B = [0; Bq] with Bq of full row rank: cancel
/// A1, A2 and place every position/velocity pair at a double pole -omega.
inline std::optional<Matrix> companion_gain(const Matrix& A, const Matrix& B) {
  if (A.rows() % 2 != 0) return std::nullopt;
  const Eigen::Index n = A.rows() / 2;
  const bool shaped = A.topLeftCorner(n, n).isZero(0.0) &&
                      A.topRightCorner(n, n).isIdentity(0.0) && B.topRows(n).isZero(0.0);
  if (!shaped) return std::nullopt;
  const Matrix Bq = B.bottomRows(n);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Bq);
  if (cod.rank() < n) return std::nullopt;
  const double omega = 1.0 + A.bottomRows(n).norm();
  Matrix target(n, 2 * n);
  target << A.bottomLeftCorner(n, n) + omega * omega * Matrix::Identity(n, n),
      A.bottomRightCorner(n, n) + 2.0 * omega * Matrix::Identity(n, n);
  return cod.solve(target);
}

/// Bass's method: with -(A + beta I) Hurwitz, Z solving
/// (A + beta I) Z + Z (A + beta I)^T = 2 B B^T is positive definite for a
/// controllable pair and K = B^T Z^{-1} is stabilizing.
inline Matrix bass_gain(const Matrix& A, const Matrix& B) {
  const Eigen::Index k = A.rows();
  const double beta = 1.0 + A.norm();
  const Matrix shifted = A + beta * Matrix::Identity(k, k);
  const Matrix Z = solve_lyapunov(shifted.transpose(), -2.0 * B * B.transpose());
  return B.transpose() * Z.ldlt().solve(Matrix::Identity(k, k));
}

}  // namespace detail

/// Stabilizing solution of A^T P + P A - P B R^{-1} B^T P + Q = 0 by
/// Kleinman-Newton iteration.
///
/// The initial gain comes from pole placement when (A, B) has the
/// second-order companion structure with an invertible input block, and
/// from Bass's method otherwise. Throws SolverFailure (carrying the
/// residual) if the iteration does not settle, loses symmetry, or leaves a
/// non-Hurwitz closed loop.
inline Matrix solve_are(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const Eigen::Index k = A.rows();
  require_dims(A.cols() == k && B.rows() == k && Q.rows() == k && Q.cols() == k &&
                   R.rows() == B.cols() && R.cols() == B.cols(),
               "solve_are: dimension mismatch");
  require_finite(A, "solve_are: A");
  require_finite(B, "solve_are: B");
  require_finite(Q, "solve_are: Q");
  require_finite(R, "solve_are: R");
  if (min_eigenvalue(0.5 * (R + R.transpose())) <= 0.0) {
    throw DomainError("solve_are: R must be positive definite");
  }
  if (min_eigenvalue(0.5 * (Q + Q.transpose())) < -1e-12 * std::max(1.0, Q.norm())) {
    throw DomainError("solve_are: Q must be positive semidefinite");
  }

  Matrix K;
  if (is_hurwitz(A)) {
    K = Matrix::Zero(B.cols(), k);
  } else if (auto g = detail::companion_gain(A, B)) {
    K = *g;
  } else {
    K = detail::bass_gain(A, B);
  }
  if (!is_hurwitz(A - B * K)) {
    throw SolverFailure("solve_are: could not find a stabilizing initial gain",
                        std::numeric_limits<double>::infinity());
  }

  const auto R_ldlt = R.ldlt();
  Matrix P = Matrix::Zero(k, k);
  constexpr int kMaxIterations = 200;
  bool converged = false;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Matrix Acl = A - B * K;
    const Matrix next = solve_lyapunov(Acl, Q + K.transpose() * R * K);
    const double change = (next - P).norm();
    P = next;
    K = R_ldlt.solve(B.transpose() * P);
    if (change <= 1e-14 * std::max(1.0, P.norm())) {
      converged = true;
      break;
    }
  }
  const double residual = are_residual(A, B, Q, R, P);
  if (!P.allFinite()) throw SolverFailure("solve_are: iteration diverged", residual);
  if ((P - P.transpose()).norm() > 1e-10 * std::max(1.0, P.norm())) {
    throw SolverFailure("solve_are: solution lost symmetry", residual);
  }
  if (!converged && residual > 1e-8 * std::max(1.0, Q.norm())) {
    throw SolverFailure("solve_are: Newton iteration did not converge", residual);
  }
  if (residual > 1e-8 * std::max(1.0, Q.norm())) {
    throw SolverFailure("solve_are: residual above tolerance", residual);
  }
  if (!is_hurwitz(A - B * K)) {
    throw SolverFailure("solve_are: closed loop is not Hurwitz", residual);
  }
  return P;
}

}  // namespace irlobs::numerics
