#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "irlobs/estimator.hpp"
#include "irlobs/monomials.hpp"
#include "irlobs/numerics.hpp"
#include "irlobs/plant.hpp"

namespace irlobs::irl {

using estimator::ThetaVector;

/// Value features sigma_V and cost features sigma_Q over x in R^{2n}, for
/// an m-input plant.
struct FeatureBasis {
  QuadraticMonomials value;
  QuadraticMonomials cost;
  Eigen::Index m = 1;

  FeatureBasis(QuadraticMonomials v, QuadraticMonomials c, Eigen::Index inputs)
      : value(std::move(v)), cost(std::move(c)), m(inputs) {
    numerics::require_dims(value.dim() == cost.dim(), "FeatureBasis: feature dimensions differ");
    numerics::require_dims(m >= 1, "FeatureBasis: need at least one input");
  }

  /// Full quadratic value basis, squared-state cost basis.
  static FeatureBasis standard(Eigen::Index n, Eigen::Index m) {
    return {QuadraticMonomials::full(2 * n), QuadraticMonomials::squares(2 * n), m};
  }

  Eigen::Index state_dim() const noexcept { return value.dim(); }
  Eigen::Index feature_count_P() const noexcept { return value.size(); }
  Eigen::Index feature_count_L() const noexcept { return cost.size(); }
  /// P + L + m - 1
  Eigen::Index width() const noexcept { return feature_count_P() + feature_count_L() + m - 1; }
};

/// W = [W_V; W_Q; W_R^-], with r1 carried alongside (it is fixed, not solved).
struct WeightVector {
  Vector W_V;
  Vector W_Q;
  Vector W_R_minus;
  double r1 = 1.0;

  static WeightVector zeros(const FeatureBasis& b, double r1) {
    return {Vector::Zero(b.feature_count_P()), Vector::Zero(b.feature_count_L()),
            Vector::Zero(b.m - 1), r1};
  }

  static WeightVector from_stacked(const Vector& w, const FeatureBasis& b, double r1) {
    numerics::require_dims(w.size() == b.width(), "WeightVector::from_stacked: length");
    const Eigen::Index P = b.feature_count_P();
    const Eigen::Index L = b.feature_count_L();
    return {w.head(P), w.segment(P, L), w.tail(b.m - 1), r1};
  }

  Vector stacked() const {
    Vector w(W_V.size() + W_Q.size() + W_R_minus.size());
    w << W_V, W_Q, W_R_minus;
    return w;
  }

  /// [r1, r2, ..., rm]
  Vector r_diag() const {
    Vector r(W_R_minus.size() + 1);
    r << r1, W_R_minus;
    return r;
  }
};

/// Ground-truth weights: W_V from the Riccati solution (P_ii for squares,
/// 2 P_ij for cross terms), W_Q from the true Q, and r2..rm.
inline WeightVector true_weights(const plant::Demonstrator& d, const FeatureBasis& b) {
  return {b.value.from_symmetric(d.riccati_P), b.cost.from_symmetric(d.cost.q_matrix()),
          d.cost.r_diag.tail(d.cost.r_diag.size() - 1), d.cost.r1_known};
}

struct Features {
  Vector sigma_V;
  Matrix grad_sigma_V;  // P x 2n
  Vector sigma_Q;
  Vector sigma_u;  // [u1^2, ..., um^2]
};

inline Features eval_features(const FeatureBasis& b, const Vector& x, const Vector& u) {
  numerics::require_dims(u.size() == b.m, "eval_features: input dimension");
  return {b.value.eval(x), b.value.gradient(x), b.cost.eval(x), u.array().square().matrix()};
}

/// One inverse-Bellman equation row . W = rhs.
struct BellmanRow {
  Vector row;
  double rhs = 0.0;
};

/// row = [grad sigma_V(x) (A'x + B'u); sigma_Q(x); u2^2..um^2], rhs = -r1 u1^2,
/// with A', B' assembled from theta.
inline BellmanRow inverse_bellman_row(const FeatureBasis& b, const Vector& x_hat, const Vector& u,
                                      const ThetaVector& theta_hat, double r1) {
  numerics::require_dims(x_hat.size() == b.state_dim() && theta_hat.n() * 2 == b.state_dim() &&
                             theta_hat.m() == b.m,
                         "inverse_bellman_row: dimension");
  const Features f = eval_features(b, x_hat, u);
  const Vector xdot = theta_hat.a_prime() * x_hat + theta_hat.b_prime() * u;
  BellmanRow out;
  out.row.resize(b.width());
  out.row << f.grad_sigma_V * xdot, f.sigma_Q, f.sigma_u.tail(b.m - 1);
  out.rhs = -r1 * f.sigma_u(0);
  return out;
}

struct ControllerRows {
  Matrix rows;  // m x width
  Vector rhs;   // m
};

/// Stationarity of the Hamiltonian in u: (B')^T grad sigma_V^T W_V + 2 R u = 0.
/// Row 1 carries the known r1 on the right-hand side; rows 2..m carry
/// 2 u_i against W_R^-.
inline ControllerRows controller_rows(const FeatureBasis& b, const Vector& x_hat, const Vector& u,
                                      const ThetaVector& theta_hat, double r1) {
  numerics::require_dims(x_hat.size() == b.state_dim() && u.size() == b.m && theta_hat.m() == b.m,
                         "controller_rows: dimension");
  const Eigen::Index P = b.feature_count_P();
  const Eigen::Index L = b.feature_count_L();
  const Matrix sigma_B = theta_hat.b_prime().transpose() * b.value.gradient(x_hat).transpose();
  ControllerRows out{Matrix::Zero(b.m, b.width()), Vector::Zero(b.m)};
  out.rows.leftCols(P) = sigma_B;
  for (Eigen::Index i = 1; i < b.m; ++i) out.rows(i, P + L + i - 1) = 2.0 * u(i);
  out.rhs(0) = -2.0 * r1 * u(0);
  return out;
}

/// The (1 + m) regression rows contributed by one data point.
struct RowBlock {
  Matrix rows;  // (1 + m) x width
  Vector rhs;   // (1 + m), equal to -sigma'_u1

  Eigen::Index height() const noexcept { return rows.rows(); }
};

inline RowBlock make_row_block(const FeatureBasis& b, const Vector& x, const Vector& u,
                               const ThetaVector& theta, double r1) {
  const BellmanRow br = inverse_bellman_row(b, x, u, theta, r1);
  const ControllerRows cr = controller_rows(b, x, u, theta, r1);
  RowBlock block{Matrix(1 + b.m, b.width()), Vector(1 + b.m)};
  block.rows.row(0) = br.row.transpose();
  block.rows.bottomRows(b.m) = cr.rows;
  block.rhs(0) = br.rhs;
  block.rhs.tail(b.m) = cr.rhs;
  return block;
}

/// Regression data for the weight solve: N row blocks with their quality
/// scores and timestamps, the stacked Sigma and Sigma_u1 (= -rhs), and a
/// cached condition number.
class IrlHistoryStack {
 public:
  struct Entry {
    RowBlock block;
    double quality = std::numeric_limits<double>::infinity();
    double time = 0.0;
  };

  IrlHistoryStack(std::size_t capacity, Eigen::Index width, Eigen::Index block_height)
      : capacity_(capacity), width_(width), block_height_(block_height),
        gram_(Matrix::Zero(width, width)) {
    if (capacity == 0) throw ConfigError("irl.N", "history stack capacity must be positive");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool full() const noexcept { return entries_.size() == capacity_; }
  Eigen::Index width() const noexcept { return width_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  Matrix sigma() const {
    Matrix S(static_cast<Eigen::Index>(entries_.size()) * block_height_, width_);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      S.middleRows(static_cast<Eigen::Index>(i) * block_height_, block_height_) = entries_[i].block.rows;
    }
    return S;
  }

  /// Sigma_u1; the regression is Sigma W = -Sigma_u1.
  Vector sigma_u1() const {
    Vector v(static_cast<Eigen::Index>(entries_.size()) * block_height_);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      v.segment(static_cast<Eigen::Index>(i) * block_height_, block_height_) = -entries_[i].block.rhs;
    }
    return v;
  }

  double sigma_u1_norm() const noexcept { return std::sqrt(u1_sq_); }
  /// kappa(Sigma), recomputed by SVD after every mutation.
  double kappa() const noexcept { return kappa_; }
  /// kappa(Sigma^T Sigma) = kappa(Sigma)^2
  double kappa_gram() const noexcept { return kappa_ * kappa_; }
  /// Sigma^T Sigma
  const Matrix& gram() const noexcept { return gram_; }
  /// Minimum stored quality; +inf when empty.
  double min_quality() const noexcept { return min_quality_; }

  void append(Entry e) {
    check(e.block);
    entries_.push_back(std::move(e));
    refresh();
  }

  void replace(std::size_t i, Entry e) {
    check(e.block);
    entries_.at(i) = std::move(e);
    refresh();
  }

  void clear() {
    entries_.clear();
    refresh();
  }

 private:
  void check(const RowBlock& b) const {
    numerics::require_dims(b.rows.rows() == block_height_ && b.rows.cols() == width_ &&
                               b.rhs.size() == block_height_,
                           "IrlHistoryStack: row block shape");
    numerics::require_finite(b.rows, "IrlHistoryStack: rows");
    numerics::require_finite(b.rhs, "IrlHistoryStack: rhs");
  }

  void refresh() {
    gram_.setZero();
    u1_sq_ = 0.0;
    min_quality_ = std::numeric_limits<double>::infinity();
    for (const auto& e : entries_) {
      gram_ += e.block.rows.transpose() * e.block.rows;
      u1_sq_ += e.block.rhs.squaredNorm();
      min_quality_ = std::min(min_quality_, e.quality);
    }
    const Matrix S = sigma();
    kappa_ = (S.size() == 0 || S.isZero(0.0)) ? std::numeric_limits<double>::infinity()
                                              : numerics::condition_number(S);
  }

  std::size_t capacity_;
  Eigen::Index width_;
  Eigen::Index block_height_;
  std::vector<Entry> entries_;
  Matrix gram_;
  double u1_sq_ = 0.0;
  double kappa_ = std::numeric_limits<double>::infinity();
  double min_quality_ = std::numeric_limits<double>::infinity();
};

struct SelectionThresholds {
  double xi1 = 1.0;
  double xi2 = 1e-3;
};

/// Data selection: append while the stack has room; once full, substitute
/// the candidate for the entry whose replacement gives the smallest
/// kappa(Sigma^T Sigma), provided that beats xi1 * the current value.
/// Nothing is stored that would leave ||Sigma_u1|| < xi2. Returns varpi
/// (1 = stored).
inline bool data_select(IrlHistoryStack& stack, const RowBlock& candidate, double quality, double time,
                        const SelectionThresholds& th) {
  numerics::require_finite(candidate.rows, "data_select: candidate rows");
  numerics::require_finite(candidate.rhs, "data_select: candidate rhs");
  const double cand_u1 = candidate.rhs.squaredNorm();
  double u1_total = stack.sigma_u1_norm();
  u1_total *= u1_total;
  if (!stack.full()) {
    if (std::sqrt(u1_total + cand_u1) < th.xi2) return false;
    stack.append({candidate, quality, time});
    return true;
  }
  const Matrix cand_gram = candidate.rows.transpose() * candidate.rows;
  const double current = stack.kappa_gram();
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = stack.size();
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const RowBlock& old = stack.entries()[i].block;
    const double u1 = std::sqrt(std::max(0.0, u1_total - old.rhs.squaredNorm() + cand_u1));
    if (u1 < th.xi2) continue;
    const double k = numerics::spd_condition_number(stack.gram() - old.rows.transpose() * old.rows +
                                                    cand_gram);
    if (k < best) {
      best = k;
      best_i = i;
    }
  }
  if (best_i == stack.size() || !(best < th.xi1 * current)) return false;
  stack.replace(best_i, {candidate, quality, time});
  return true;
}

/// Least-squares weights minimizing ||Sigma W + Sigma_u1||. Throws
/// RankDeficient below rank P+L+m-1 and DomainError when ||Sigma_u1|| < xi2
/// (the normalized system would admit W = 0).
inline WeightVector solve_weights(const IrlHistoryStack& stack, const FeatureBasis& b, double r1,
                                  double xi2) {
  if (stack.empty()) throw RankDeficient("solve_weights: empty history stack", 0);
  if (stack.sigma_u1_norm() < xi2) {
    throw DomainError("solve_weights: ||Sigma_u1|| below xi2; regression is homogeneous");
  }
  const Matrix S = stack.sigma();
  if (S.rows() < S.cols()) {
    throw RankDeficient("solve_weights: fewer rows than unknowns",
                        static_cast<std::size_t>(S.rows()));
  }
  const Vector w = numerics::least_squares(S, -stack.sigma_u1());
  return WeightVector::from_stacked(w, b, r1);
}

/// ||Sigma W + Sigma_u1||, the norm of the implicit residual vector.
inline double regression_residual(const IrlHistoryStack& stack, const WeightVector& w) {
  if (stack.empty()) return 0.0;
  return (stack.sigma() * w.stacked() + stack.sigma_u1()).norm();
}

}  // namespace irlobs::irl
