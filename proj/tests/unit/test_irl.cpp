#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "irlobs/irl.hpp"

using namespace irlobs;
using namespace irlobs::irl;

namespace {

plant::Demonstrator reference(double scale = 1.0) {
  plant::LinearPlant p((Matrix(2, 4) << 1, 1, -1, 1, 5, 1, 1, 1).finished(),
                       (Matrix(2, 2) << 1, 3, 0, 1).finished());
  plant::CostFunction c(QuadraticMonomials::squares(4), scale * (Vector(4) << 1, 2, 3, 6).finished(),
                        scale * (Vector(2) << 20, 10).finished());
  return plant::make_demonstrator(std::move(p), std::move(c));
}

Vector random_state(std::mt19937_64& rng, Eigen::Index dim = 4) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Vector x(dim);
  for (Eigen::Index i = 0; i < dim; ++i) x(i) = u(rng);
  return x;
}

// Blocks from true states, true model and optimal actions.
IrlHistoryStack ideal_stack(const plant::Demonstrator& d, const FeatureBasis& b, std::size_t count,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ThetaVector theta = ThetaVector::from_plant(d.plant);
  IrlHistoryStack stack(count, b.width(), 1 + b.m);
  for (std::size_t i = 0; i < count; ++i) {
    const Vector x = random_state(rng, b.state_dim());
    stack.append({make_row_block(b, x, plant::optimal_action(d, x), theta, d.cost.r1_known), 0.0,
                  static_cast<double>(i)});
  }
  return stack;
}

double relative_error(const WeightVector& a, const WeightVector& b) {
  return (a.stacked() - b.stacked()).norm() / b.stacked().norm();
}

}  // namespace

TEST(FeatureBasis, StandardWidthOnTheReferenceSystem) {
  const auto b = FeatureBasis::standard(2, 2);
  EXPECT_EQ(b.feature_count_P(), 10);
  EXPECT_EQ(b.feature_count_L(), 4);
  EXPECT_EQ(b.width(), 15);
  EXPECT_EQ(FeatureBasis::standard(1, 1).width(), 5);
}

TEST(EvalFeatures, ZeroAndBasisVector) {
  const auto b = FeatureBasis::standard(2, 2);
  const Features z = eval_features(b, Vector::Zero(4), Vector::Zero(2));
  EXPECT_TRUE(z.sigma_V.isZero(0.0));
  EXPECT_TRUE(z.grad_sigma_V.isZero(0.0));
  EXPECT_TRUE(z.sigma_Q.isZero(0.0));
  EXPECT_TRUE(z.sigma_u.isZero(0.0));

  const Features e = eval_features(b, Vector::Unit(4, 0), Vector::Zero(2));
  EXPECT_EQ(e.sigma_V(0), 1.0);
  EXPECT_TRUE(e.sigma_V.tail(9).isZero(0.0));
  EXPECT_THROW(eval_features(b, Vector::Zero(4), Vector::Zero(3)), DimensionMismatch);
}

TEST(InverseBellmanRow, ZeroStateAndInputGiveZeroRow) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const BellmanRow r = inverse_bellman_row(b, Vector::Zero(4), Vector::Zero(2), ThetaVector::from_plant(d.plant),
                                           20.0);
  EXPECT_TRUE(r.row.isZero(0.0));
  EXPECT_EQ(r.rhs, 0.0);
}

TEST(InverseBellmanRow, TrueWeightsSatisfyTheHjbIdentity) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const ThetaVector theta = ThetaVector::from_plant(d.plant);
  const WeightVector W = true_weights(d, b);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector x = random_state(rng);
    const Vector u = plant::optimal_action(d, x);
    const BellmanRow r = inverse_bellman_row(b, x, u, theta, d.cost.r1_known);
    // Independent oracle: r(x,u) + dV/dt with V = x^T P x.
    const double hjb = plant::hjb_residual(d, x, u);
    EXPECT_NEAR(r.row.dot(W.stacked()) - r.rhs, hjb, 1e-9 * (1.0 + x.squaredNorm()));
    EXPECT_LT(std::abs(r.row.dot(W.stacked()) - r.rhs), 1e-8 * (1.0 + x.squaredNorm()));
  }
}

TEST(InverseBellmanRow, ResidualIsLinearInTheWeights) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const ThetaVector theta = ThetaVector::from_plant(d.plant);
  std::mt19937_64 rng(4);
  const Vector x = random_state(rng);
  const Vector u = random_state(rng, 2);
  const BellmanRow r = inverse_bellman_row(b, x, u, theta, 20.0);
  const Vector W = true_weights(d, b).stacked();
  const double base = r.row.dot(W) - r.rhs;
  const double bumped = r.row.dot(W + Vector::Unit(W.size(), 0)) - r.rhs;
  EXPECT_NEAR(bumped - base, r.row(0), 1e-12 * (1.0 + r.row.cwiseAbs().dot(W.cwiseAbs())));
}

TEST(ControllerRows, ZeroInputsGiveZeroRows) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const ControllerRows c =
      controller_rows(b, Vector::Zero(4), Vector::Zero(2), ThetaVector::from_plant(d.plant), 20.0);
  EXPECT_TRUE(c.rows.isZero(0.0));
  EXPECT_TRUE(c.rhs.isZero(0.0));
}

TEST(ControllerRows, OptimalPolicyIdentityAndLayout) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const ThetaVector theta = ThetaVector::from_plant(d.plant);
  const Vector W = true_weights(d, b).stacked();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = random_state(rng);
    const Vector u = plant::optimal_action(d, x);
    const ControllerRows c = controller_rows(b, x, u, theta, d.cost.r1_known);
    EXPECT_LT((c.rows * W - c.rhs).norm(), 1e-8 * (1.0 + x.squaredNorm()));
    EXPECT_TRUE(c.rows.block(0, 10, 2, 4).isZero(0.0));
    EXPECT_EQ(c.rows(0, 14), 0.0);
    EXPECT_EQ(c.rows(1, 14), 2.0 * u(1));
    EXPECT_EQ(c.rhs(1), 0.0);
  }
}

TEST(ControllerRows, SingleInputHasOneRowAndNoRColumns) {
  plant::LinearPlant p(Matrix::Zero(1, 2), Matrix::Ones(1, 1));
  plant::CostFunction cost(QuadraticMonomials::squares(2), Vector::Ones(2), Vector::Ones(1));
  const auto d = plant::make_demonstrator(std::move(p), std::move(cost));
  const auto b = FeatureBasis::standard(1, 1);
  const Vector x = (Vector(2) << 0.3, -1.2).finished();
  const Vector u = plant::optimal_action(d, x);
  const ControllerRows c = controller_rows(b, x, u, ThetaVector::from_plant(d.plant), 1.0);
  EXPECT_EQ(c.rows.rows(), 1);
  EXPECT_EQ(c.rows.cols(), 5);
  EXPECT_LT(std::abs(c.rows.row(0).dot(true_weights(d, b).stacked()) - c.rhs(0)), 1e-9);
  EXPECT_EQ(make_row_block(b, x, u, ThetaVector::from_plant(d.plant), 1.0).height(), 2);
}

TEST(SolveWeights, IdealRegressorsRecoverTheTrueWeights) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const IrlHistoryStack stack = ideal_stack(d, b, 30, 6);
  const WeightVector W = solve_weights(stack, b, d.cost.r1_known, 1e-3);
  EXPECT_LT(relative_error(W, true_weights(d, b)), 1e-6);
  EXPECT_LT(regression_residual(stack, true_weights(d, b)), 1e-8 * stack.sigma_u1_norm());
}

TEST(SolveWeights, IdealBlocksHaveZeroResidual) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const Vector W = true_weights(d, b).stacked();
  const IrlHistoryStack stack = ideal_stack(d, b, 30, 7);
  for (const auto& e : stack.entries()) {
    EXPECT_LT((e.block.rows * W - e.block.rhs).norm(), 1e-8);
  }
}

TEST(SolveWeights, RefusesIllPosedStacks) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  IrlHistoryStack empty(30, b.width(), 3);
  EXPECT_THROW(solve_weights(empty, b, 20.0, 1e-3), RankDeficient);
  // 4 blocks = 12 rows < 15 unknowns.
  EXPECT_THROW(solve_weights(ideal_stack(d, b, 4, 8), b, 20.0, 1e-3), RankDeficient);
  // Enough rows but u1 = 0 throughout: the normalized right-hand side vanishes.
  IrlHistoryStack homogeneous(10, b.width(), 3);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10; ++i) {
    Vector u = random_state(rng, 2);
    u(0) = 0.0;
    homogeneous.append({make_row_block(b, random_state(rng), u, ThetaVector::from_plant(d.plant), 20.0), 0.0, 0.0});
  }
  EXPECT_THROW(solve_weights(homogeneous, b, 20.0, 1e-3), DomainError);
}

TEST(SolveWeights, RecoveredCostScalesWithTheKnownWeight) {
  const auto b = FeatureBasis::standard(2, 2);
  for (double K : {0.5, 5.0, 40.0}) {
    const auto d1 = reference(1.0);
    const auto dK = reference(K);
    const WeightVector W1 = solve_weights(ideal_stack(d1, b, 30, 10), b, d1.cost.r1_known, 1e-3);
    const WeightVector WK = solve_weights(ideal_stack(dK, b, 30, 10), b, dK.cost.r1_known, 1e-3);
    EXPECT_DOUBLE_EQ(dK.cost.r1_known, K * 20.0);
    EXPECT_LT((WK.stacked() - K * W1.stacked()).norm(), 1e-6 * K * W1.stacked().norm());
  }
}

TEST(SolveWeights, UnnormalizedSystemAdmitsTheTrivialSolution) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const IrlHistoryStack stack = ideal_stack(d, b, 30, 11);
  // [Sigma, Sigma_u1] [W; 1] = 0 and [Sigma, Sigma_u1] 0 = 0: only the
  // normalization separates the two.
  Matrix full(stack.sigma().rows(), stack.width() + 1);
  full << stack.sigma(), stack.sigma_u1();
  Vector w1(stack.width() + 1);
  w1 << true_weights(d, b).stacked(), 1.0;
  EXPECT_LT((full * w1).norm(), 1e-8 * w1.norm() * full.norm());
  EXPECT_TRUE((full * Vector::Zero(w1.size())).isZero(0.0));
  EXPECT_GE(stack.sigma_u1_norm(), 1e-3);
  EXPECT_GT(stack.sigma_u1().norm(), 0.0);
}

TEST(IrlHistoryStack, CachedConditionNumberTracksMutations) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  IrlHistoryStack stack = ideal_stack(d, b, 30, 12);
  EXPECT_NEAR(stack.kappa(), numerics::condition_number(stack.sigma()), 1e-9 * stack.kappa());
  EXPECT_EQ(stack.sigma().rows(), 90);
  std::mt19937_64 rng(13);
  const Vector x = random_state(rng);
  stack.replace(4, {make_row_block(b, x, plant::optimal_action(d, x), ThetaVector::from_plant(d.plant), 20.0), 0.0,
                    0.0});
  EXPECT_NEAR(stack.kappa(), numerics::condition_number(stack.sigma()), 1e-9 * stack.kappa());
  EXPECT_NEAR(stack.kappa_gram(), numerics::spd_condition_number(stack.gram()), 1e-6 * stack.kappa_gram());
  stack.clear();
  EXPECT_TRUE(std::isinf(stack.kappa()));
  EXPECT_EQ(stack.sigma_u1_norm(), 0.0);
  EXPECT_THROW(IrlHistoryStack(0, 15, 3), ConfigError);
}

TEST(DataSelect, EmptyStackAcceptsAnExcitedCandidate) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  IrlHistoryStack stack(30, b.width(), 3);
  const Vector x = (Vector(4) << 1, 0.5, -1, 2).finished();
  const RowBlock cand = make_row_block(b, x, plant::optimal_action(d, x), ThetaVector::from_plant(d.plant), 20.0);
  EXPECT_TRUE(data_select(stack, cand, 0.1, 0.0, SelectionThresholds{}));
  EXPECT_EQ(stack.size(), 1u);
}

TEST(DataSelect, ZeroInputCandidateIsDiscarded) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const ThetaVector theta = ThetaVector::from_plant(d.plant);
  IrlHistoryStack stack(30, b.width(), 3);
  const RowBlock zero = make_row_block(b, Vector::Zero(4), Vector::Zero(2), theta, 20.0);
  EXPECT_FALSE(data_select(stack, zero, 0.1, 0.0, SelectionThresholds{}));
  EXPECT_TRUE(stack.empty());

  // Full stack with a single excited entry: swapping it for a zero-input block
  // would leave Sigma_u1 = 0.
  IrlHistoryStack one(1, b.width(), 3);
  const Vector x = (Vector(4) << 1, 0.5, -1, 2).finished();
  one.append({make_row_block(b, x, plant::optimal_action(d, x), theta, 20.0), 0.0, 0.0});
  EXPECT_FALSE(data_select(one, zero, 0.1, 1.0, SelectionThresholds{1e12, 1e-3}));
  EXPECT_GT(one.sigma_u1_norm(), 1e-3);
}

TEST(DataSelect, DuplicateCannotImproveAStackOfCopies) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const ThetaVector theta = ThetaVector::from_plant(d.plant);
  const Vector x = (Vector(4) << 1, 0.5, -1, 2).finished();
  const RowBlock block = make_row_block(b, x, plant::optimal_action(d, x), theta, 20.0);
  IrlHistoryStack stack(8, b.width(), 3);
  for (int i = 0; i < 8; ++i) stack.append({block, 0.0, 0.0});
  EXPECT_FALSE(data_select(stack, block, 0.0, 1.0, SelectionThresholds{}));
  for (const auto& e : stack.entries()) EXPECT_EQ(e.time, 0.0);
}

TEST(DataSelect, AcceptedReplacementNeverRaisesTheConditionNumber) {
  const auto d = reference();
  const auto b = FeatureBasis::standard(2, 2);
  const ThetaVector theta = ThetaVector::from_plant(d.plant);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> xi(0.3, 1.0);
  IrlHistoryStack stack(20, b.width(), 3);
  int replaced = 0;
  for (int i = 0; i < 400; ++i) {
    const Vector x = random_state(rng);
    const Vector u = plant::optimal_action(d, x) + 0.5 * random_state(rng, 2);
    const bool was_full = stack.full();
    const double before = stack.kappa_gram();
    const SelectionThresholds th{xi(rng), 1e-3};
    const bool stored = data_select(stack, make_row_block(b, x, u, theta, 20.0), 0.0, i, th);
    if (was_full && stored) {
      ++replaced;
      EXPECT_LE(stack.kappa_gram(), th.xi1 * before * (1.0 + 1e-9));
    }
    if (was_full && !stored) EXPECT_EQ(stack.kappa_gram(), before);
    if (stored) EXPECT_GE(stack.sigma_u1_norm(), th.xi2);
  }
  EXPECT_GT(replaced, 0);
}

TEST(DataSelect, RejectsNonFiniteCandidates) {
  const auto b = FeatureBasis::standard(2, 2);
  IrlHistoryStack stack(5, b.width(), 3);
  RowBlock bad{Matrix::Zero(3, b.width()), Vector::Ones(3)};
  bad.rows(0, 0) = NAN;
  EXPECT_THROW(data_select(stack, bad, 0.0, 0.0, SelectionThresholds{}), NumericOverflow);
}
