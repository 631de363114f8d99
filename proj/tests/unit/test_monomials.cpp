#include <random>

#include <gtest/gtest.h>

#include "irlobs/monomials.hpp"

using namespace irlobs;

namespace {

Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace

TEST(QuadraticMonomials, SizesAndOrdering) {
  const auto full = QuadraticMonomials::full(4);
  EXPECT_EQ(full.size(), 10);
  EXPECT_EQ(full.pairs().front(), (QuadraticMonomials::Pair{0, 0}));
  EXPECT_EQ(full.pairs()[1], (QuadraticMonomials::Pair{0, 1}));
  EXPECT_EQ(full.pairs().back(), (QuadraticMonomials::Pair{3, 3}));
  EXPECT_EQ(QuadraticMonomials::squares(4).size(), 4);
}

TEST(QuadraticMonomials, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(1);
  const auto basis = QuadraticMonomials::full(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = random_vector(rng, 4);
    const Matrix g = basis.gradient(x);
    const double h = 1e-5;
    for (Eigen::Index j = 0; j < 4; ++j) {
      Vector xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const Vector fd = (basis.eval(xp) - basis.eval(xm)) / (2.0 * h);
      EXPECT_LT((g.col(j) - fd).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(QuadraticMonomials, SymmetricRoundTripPreservesQuadraticForm) {
  std::mt19937_64 rng(2);
  const auto basis = QuadraticMonomials::full(4);
  Matrix S = Matrix::Random(4, 4);
  S = (0.5 * (S + S.transpose())).eval();
  const Vector w = basis.from_symmetric(S);
  EXPECT_LT((basis.to_symmetric(w) - S).norm(), 1e-14);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(rng, 4);
    EXPECT_NEAR(w.dot(basis.eval(x)), x.dot(S * x), 1e-12);
  }
}

TEST(QuadraticMonomials, SquaresBasisRejectsCrossTerms) {
  const auto sq = QuadraticMonomials::squares(3);
  EXPECT_NO_THROW(sq.from_symmetric(Vector((Vector(3) << 1, 2, 3).finished()).asDiagonal()));
  Matrix S = Matrix::Identity(3, 3);
  S(0, 2) = S(2, 0) = 0.5;
  EXPECT_THROW(sq.from_symmetric(S), DomainError);
}

TEST(QuadraticMonomials, RejectsDuplicatesAndBadIndices) {
  EXPECT_THROW(QuadraticMonomials(2, {{0, 1}, {1, 0}}), DomainError);
  EXPECT_THROW(QuadraticMonomials(2, {{0, 2}}), DimensionMismatch);
  EXPECT_THROW(QuadraticMonomials::full(3).eval(Vector::Zero(2)), DimensionMismatch);
}
