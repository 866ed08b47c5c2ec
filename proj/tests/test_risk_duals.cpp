#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace mdro;
using namespace mdro::testing;

namespace {
Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}
}  // namespace

TEST(Cvar, HalfOfFourValues) {
  const auto r = cvar_dual(vec({1, 2, 3, 4}), 0.5);
  EXPECT_NEAR(r.risk, 3.5, 1e-12);
  EXPECT_NEAR(r.risk, cvar_grid(vec({1, 2, 3, 4}), 0.5), 1e-9);
  EXPECT_DOUBLE_EQ(r.eta_star, 3.0);
}

TEST(Cvar, ConstantValues) {
  for (double a : {0.01, 0.3, 1.0}) EXPECT_NEAR(cvar_dual(Vector::Constant(9, 1.7), a).risk, 1.7, 1e-12);
}

TEST(Cvar, AlphaOneIsMean) {
  Rand r(1);
  const Vector v = random_vector(r, 37, -2, 5);
  EXPECT_NEAR(cvar_dual(v, 1.0).risk, v.mean(), 1e-12);
}

TEST(Cvar, EmptyAndBadAlphaRejected) {
  EXPECT_THROW(cvar_dual(Vector(), 0.5), std::invalid_argument);
  EXPECT_THROW(cvar_dual(vec({1}), 0.0), std::invalid_argument);
  EXPECT_THROW(cvar_dual(vec({1}), 1.5), std::invalid_argument);
}

TEST(Cvar, FractionalTailWeight) {
  // alpha n = 1.5: top value in full, half of the second
  const auto r = cvar_dual(vec({0, 1, 2}), 0.5);
  EXPECT_NEAR(r.risk, (2.0 + 0.5 * 1.0) / 1.5, 1e-12);
}

TEST(CvarProperty, MatchesEtaGridOracle) {
  Rand r(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + static_cast<Index>(r() % 100);
    const Vector v = random_vector(r, n, -1, 3);
    const double a = uni(r, 0.01, 1.0);
    EXPECT_NEAR(cvar_dual(v, a).risk, cvar_grid(v, a), 1e-6) << "n=" << n << " alpha=" << a;
  }
}

TEST(CvarProperty, BoundsAndMonotoneInAlpha) {
  Rand r(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + static_cast<Index>(r() % 50);
    const Vector v = random_vector(r, n, 0, 2);
    double prev = std::numeric_limits<double>::infinity();
    for (double a = 0.02; a <= 1.0; a += 0.07) {
      const double risk = cvar_dual(v, a).risk;
      EXPECT_GE(risk, v.mean() - 1e-12);
      EXPECT_LE(risk, v.maxCoeff() + 1e-12);
      EXPECT_LE(risk, prev + 1e-12);
      prev = risk;
    }
    EXPECT_NEAR(cvar_dual(v, 1.0 / static_cast<double>(n)).risk, v.maxCoeff(), 1e-12);
    EXPECT_NEAR(cvar_dual(v, 0.5 / static_cast<double>(n)).risk, v.maxCoeff(), 1e-12);
  }
}

TEST(Pnorm, ConstantValues) { EXPECT_NEAR(pnorm_dual(Vector::Constant(5, 0.8), 0.5, 2.0).risk, 0.8, 1e-9); }

TEST(Pnorm, ZeroTwoExample) {
  const auto r = pnorm_dual(vec({0, 2}), 0.5, 2.0);
  EXPECT_NEAR(r.risk, 2.0, 1e-8);
  EXPECT_NEAR(r.risk, pnorm_grid(vec({0, 2}), 0.5, 2.0), 1e-8);
}

TEST(Pnorm, PEqualsOneAtAlphaOneIsMean) {
  Rand r(4);
  const Vector v = random_vector(r, 20, 0, 1);
  EXPECT_NEAR(pnorm_dual(v, 1.0, 1.0).risk, v.mean(), 1e-12);
}

TEST(Pnorm, PBelowOneRejected) { EXPECT_THROW(pnorm_dual(vec({1, 2}), 0.5, 0.5), std::invalid_argument); }

TEST(PnormProperty, MatchesEtaGridOracle) {
  Rand r(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + static_cast<Index>(r() % 60);
    const Vector v = random_vector(r, n, 0, 3);
    const double a = uni(r, 0.05, 1.0);
    for (double p : {1.5, 2.0}) EXPECT_NEAR(pnorm_dual(v, a, p).risk, pnorm_grid(v, a, p), 1e-5);
  }
}

TEST(PnormProperty, DominatesCvar) {
  Rand r(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + static_cast<Index>(r() % 80);
    const Vector v = random_vector(r, n, -1, 2);
    const double a = uni(r, 0.01, 1.0);
    const double cvar = cvar_dual(v, a).risk;
    for (double p : {1.0, 1.2, 1.5, 2.0}) EXPECT_GE(pnorm_dual(v, a, p).risk, cvar - 1e-8);
  }
}

TEST(PnormProperty, ObjectiveMidpointConvexInEta) {
  Rand r(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector v = random_vector(r, 15, 0, 2);
    const double a = uni(r, 0.05, 1), p = uni(r, 1.0, 2.0);
    const double e1 = uni(r, -1, 3), e2 = uni(r, -1, 3);
    const double mid = pnorm_dual_objective(as_span(v), a, p, 0.5 * (e1 + e2));
    EXPECT_LE(mid, 0.5 * (pnorm_dual_objective(as_span(v), a, p, e1) + pnorm_dual_objective(as_span(v), a, p, e2)) +
                       1e-12);
  }
}

TEST(Replicates, DegenerateSingleReplicate) {
  Rand r(8);
  const Vector v = random_vector(r, 12, 0, 1);
  RowMatrix m = v;
  EXPECT_NEAR(replicate_worst_case(m, 0.25), cvar_dual(v, 0.25).risk, 1e-14);
}

TEST(Replicates, ConstantEntries) { EXPECT_NEAR(replicate_worst_case(RowMatrix::Constant(4, 3, 2.5), 0.3), 2.5, 1e-14); }

TEST(Replicates, TwoByTwoExample) {
  const std::vector<std::vector<double>> rows{{0, 2}, {4, 6}};
  EXPECT_NEAR(replicate_worst_case(rows, 0.5), 5.0, 1e-12);
  EXPECT_NEAR(replicate_worst_case(rows, 0.5), cvar_grid(vec({1, 5}), 0.5), 1e-9);
}

TEST(Replicates, RaggedRejected) {
  const std::vector<std::vector<double>> rows{{0, 2}, {4}};
  EXPECT_THROW(replicate_worst_case(rows, 0.5), std::invalid_argument);
}

TEST(RobustSpecTest, DerivedQuantities) {
  RobustSpec s;
  s.p = 1.5;
  EXPECT_NEAR(s.q() * (s.p - 1.0), s.p, 1e-15);
  s.p = 2.0;
  s.eps = 0.01;
  s.lipschitz_ratio = 3.0;
  EXPECT_NEAR(s.floor_value(), 0.01, 1e-15);
  EXPECT_NEAR(s.penalty_scale(), 3.0, 1e-12);  // (L/eps) at p = 2
  s.delta = 0.02;
  EXPECT_NEAR(s.confounding_scale(), 4.0, 1e-12);
}

TEST(RobustSpecTest, ValidationRanges) {
  RobustSpec s;
  s.alpha0 = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.alpha0 = 0.5;
  s.p = 1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_NO_THROW(s.validate(true));
  s.p = 2.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.p = 2.0;
  s.eps = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.eps = 1e-3;
  s.delta = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(RobustSpecTest, DefaultLossBoundIsMaxLoss) {
  RobustSpec s;
  EXPECT_DOUBLE_EQ(effective_loss_bound(s, vec({0.2, 3.0, 1.0})), 3.0);
  s.loss_bound = 10.0;
  EXPECT_DOUBLE_EQ(effective_loss_bound(s, vec({0.2, 3.0, 1.0})), 10.0);
}
