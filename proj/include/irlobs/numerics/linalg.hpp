#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "irlobs/numerics/types.hpp"

namespace irlobs::numerics {

/// Relative singular-value cutoff below which a matrix counts as rank deficient.
inline double rank_tolerance(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

/// argmin_w ||A w - b||_2 by column-pivoted Householder QR.
inline Vector least_squares(const Matrix& A, const Vector& b) {
  require_dims(A.rows() == b.size(), "least_squares: row count differs from rhs length");
  require_dims(A.rows() >= A.cols() && A.cols() > 0, "least_squares: need rows >= cols > 0");
  require_finite(A, "least_squares: matrix");
  require_finite(b, "least_squares: rhs");
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(rank_tolerance(A.rows(), A.cols()));
  if (qr.rank() < A.cols()) {
    throw RankDeficient("least_squares: matrix is rank deficient",
                        static_cast<std::size_t>(qr.rank()));
  }
  Vector w = qr.solve(b);
  require_finite(w, "least_squares: solution");
  return w;
}

/// sigma_max / sigma_min; +infinity when numerically rank deficient.
inline double condition_number(const Matrix& A) {
  require_finite(A, "condition_number");
  if (A.size() == 0 || A.isZero(0.0)) throw DomainError("condition_number: zero matrix");
  const Vector s = Eigen::BDCSVD<Matrix>(A).singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (A.rows() < A.cols() || smin <= smax * rank_tolerance(A.rows(), A.cols())) {
    return std::numeric_limits<double>::infinity();
  }
  return smax / smin;
}

/// Condition number of a symmetric positive semidefinite matrix from its
/// eigenvalues; +infinity when the smallest is not resolvably positive.
inline double spd_condition_number(const Matrix& S) {
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues();
  const double lmax = ev(ev.size() - 1);
  const double lmin = ev(0);
  if (!(lmax > 0.0) || lmin <= lmax * rank_tolerance(S.rows(), S.cols())) {
    return std::numeric_limits<double>::infinity();
  }
  return lmax / lmin;
}

inline double min_eigenvalue(const Matrix& S) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

/// (v ⊗ I_n)^T as an explicit n x (a*n) matrix.
inline Matrix kron_identity_transpose(const Vector& v, Eigen::Index n) {
  Matrix out = Matrix::Zero(n, v.size() * n);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.block(0, i * n, n, n).diagonal().setConstant(v(i));
  }
  return out;
}

/// (v ⊗ I_n)^T vec(M) without forming the Kronecker product; equals M v
/// where M is the n x a matrix whose column-major vectorization is m_vec.
inline Vector kron_transpose_apply(const Vector& v, const Vector& m_vec) {
  require_dims(v.size() > 0 && m_vec.size() % v.size() == 0,
               "kron_transpose_apply: length(Mvec) must be a multiple of length(v)");
  const Eigen::Index n = m_vec.size() / v.size();
  return Eigen::Map<const Matrix>(m_vec.data(), n, v.size()) * v;
}

/// Column-major vec(M).
inline Vector vec(const Matrix& M) {
  return Eigen::Map<const Vector>(M.data(), M.size());
}

/// Solves F^T X + X F + C = 0 for X by vectorization. Sizes here stay
/// below ~20, where the dense (size^2)-square system is cheap.
inline Matrix solve_lyapunov(const Matrix& F, const Matrix& C) {
  require_dims(F.rows() == F.cols() && C.rows() == F.rows() && C.cols() == F.cols(),
               "solve_lyapunov: dimension mismatch");
  const Eigen::Index n = F.rows();
  const Matrix I = Matrix::Identity(n, n);
  Matrix K(n * n, n * n);
  // vec(F^T X) = (I ⊗ F^T) vec X ; vec(X F) = (F^T ⊗ I) vec X
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) = (i == j ? 1.0 : 0.0) * F.transpose() + F(j, i) * I;
    }
  }
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) throw RankDeficient("solve_lyapunov: singular Lyapunov operator", static_cast<std::size_t>(lu.rank()));
  const Vector x = lu.solve(-vec(C));
  Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

inline Eigen::VectorXcd eigenvalues(const Matrix& A) {
  return Eigen::EigenSolver<Matrix>(A, false).eigenvalues();
}

inline double spectral_abscissa(const Matrix& A) {
  return eigenvalues(A).real().maxCoeff();
}

inline bool is_hurwitz(const Matrix& A) { return spectral_abscissa(A) < 0.0; }

/// Rank of [B, AB, ..., A^{k-1}B].
inline Eigen::Index controllability_rank(const Matrix& A, const Matrix& B) {
  const Eigen::Index k = A.rows();
  Matrix C(k, k * B.cols());
  Matrix block = B;
  for (Eigen::Index i = 0; i < k; ++i) {
    C.middleCols(i * B.cols(), B.cols()) = block;
    block = A * block;
  }
  Eigen::JacobiSVD<Matrix> svd(C);
  const Vector s = svd.singularValues();
  const double tol = s(0) * 1e-10;
  return (s.array() > tol).count();
}

}  // namespace irlobs::numerics
