#pragma once

#include <string>
#include <utility>
#include <vector>

#include "irlobs/numerics/types.hpp"

namespace irlobs {

/// A basis of quadratic monomials x_i x_j (i <= j) over R^dim.
class QuadraticMonomials {
 public:
  using Pair = std::pair<Eigen::Index, Eigen::Index>;

  QuadraticMonomials() = default;

  QuadraticMonomials(Eigen::Index dim, std::vector<Pair> pairs) : dim_(dim), pairs_(std::move(pairs)) {
    if (dim <= 0) throw DimensionMismatch("QuadraticMonomials: dimension must be positive");
    for (std::size_t a = 0; a < pairs_.size(); ++a) {
      auto& [i, j] = pairs_[a];
      if (i > j) std::swap(i, j);
      if (i < 0 || j >= dim) throw DimensionMismatch("QuadraticMonomials: index out of range");
      for (std::size_t b = 0; b < a; ++b) {
        if (pairs_[b] == pairs_[a]) {
          throw DomainError("QuadraticMonomials: monomial x" + std::to_string(i) + "*x" +
                            std::to_string(j) + " listed twice");
        }
      }
    }
  }

  /// All dim(dim+1)/2 monomials, ordered (0,0), (0,1), ..., (dim-1,dim-1).
  static QuadraticMonomials full(Eigen::Index dim) {
    std::vector<Pair> pairs;
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = i; j < dim; ++j) pairs.emplace_back(i, j);
    return {dim, std::move(pairs)};
  }

  /// The squares x_0^2, ..., x_{dim-1}^2.
  static QuadraticMonomials squares(Eigen::Index dim) {
    std::vector<Pair> pairs;
    for (Eigen::Index i = 0; i < dim; ++i) pairs.emplace_back(i, i);
    return {dim, std::move(pairs)};
  }

  Eigen::Index dim() const noexcept { return dim_; }
  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(pairs_.size()); }
  const std::vector<Pair>& pairs() const noexcept { return pairs_; }

  Vector eval(const Vector& x) const {
    require(x);
    Vector out(size());
    for (Eigen::Index a = 0; a < size(); ++a) {
      const auto [i, j] = pairs_[static_cast<std::size_t>(a)];
      out(a) = x(i) * x(j);
    }
    return out;
  }

  /// Jacobian, size() x dim: row for x_i x_j holds x_j at column i and x_i
  /// at column j (2 x_i when i == j).
  Matrix gradient(const Vector& x) const {
    require(x);
    Matrix g = Matrix::Zero(size(), dim_);
    for (Eigen::Index a = 0; a < size(); ++a) {
      const auto [i, j] = pairs_[static_cast<std::size_t>(a)];
      g(a, i) += x(j);
      g(a, j) += x(i);
    }
    return g;
  }

  /// Symmetric S with x^T S x = w^T eval(x).
  Matrix to_symmetric(const Vector& w) const {
    numerics::require_dims(w.size() == size(), "QuadraticMonomials::to_symmetric: weight length");
    Matrix S = Matrix::Zero(dim_, dim_);
    for (Eigen::Index a = 0; a < size(); ++a) {
      const auto [i, j] = pairs_[static_cast<std::size_t>(a)];
      if (i == j) {
        S(i, i) += w(a);
      } else {
        S(i, j) += 0.5 * w(a);
        S(j, i) += 0.5 * w(a);
      }
    }
    return S;
  }

  /// Weights w with w^T eval(x) = x^T S x. Throws DomainError if S has a
  /// nonzero entry the basis cannot represent.
  Vector from_symmetric(const Matrix& S) const {
    numerics::require_dims(S.rows() == dim_ && S.cols() == dim_,
                           "QuadraticMonomials::from_symmetric: matrix size");
    Vector w(size());
    for (Eigen::Index a = 0; a < size(); ++a) {
      const auto [i, j] = pairs_[static_cast<std::size_t>(a)];
      w(a) = i == j ? S(i, i) : S(i, j) + S(j, i);
    }
    const Matrix back = to_symmetric(w);
    const Matrix sym = 0.5 * (S + S.transpose());
    if ((back - sym).norm() > 1e-12 * std::max(1.0, sym.norm())) {
      throw DomainError("QuadraticMonomials: matrix not representable in this basis");
    }
    return w;
  }

 private:
  void require(const Vector& x) const {
    numerics::require_dims(x.size() == dim_, "QuadraticMonomials: state dimension mismatch");
  }

  Eigen::Index dim_ = 0;
  std::vector<Pair> pairs_;
};

}  // namespace irlobs
