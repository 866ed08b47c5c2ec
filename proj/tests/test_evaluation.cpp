#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace mdro;
using namespace mdro::testing;

namespace {

Dataset sim_data(SimVariant v, Index n, Index m, std::uint64_t seed) {
  SimSpec s;
  s.variant = v;
  s.n = n;
  s.seed = seed;
  return m > 0 ? generate_replicates(s, m) : generate(s);
}

const std::vector<double> kGrid{0.05, 0.1, 0.15, 0.3, 0.5, 1.0};

}  // namespace

TEST(EvalOracle, ToyUnitSlope) {
  const Dataset ev = sim_data(SimVariant::toy_1d, 100000, 0, 1);
  const ParamVector p(Vector::Constant(1, 1.0), 0.0);
  const RiskReport r = eval_oracle(p, ev.features, SimVariant::toy_1d, kGrid);
  // Left-group risk is 2|x| with |x| ~ U[0,1] on 15% of the mass. The worst
  // 5% is the top third of that group, so the tail mean is 5/3, not the
  // supremum 2.
  EXPECT_NEAR(r.risk_at(0.05), 5.0 / 3.0, 0.02);
  // at 0.15 the tail mixes left rows above sqrt(2/pi) with right rows at it
  const double c = std::sqrt(2.0 / std::numbers::pi);
  const double above = 0.15 * (1.0 - c / 2.0);
  EXPECT_NEAR(r.risk_at(0.15), (above * (1.0 + c / 2.0) + (0.15 - above) * c) / 0.15, 0.02);
  EXPECT_NEAR(r.mean_risk, 0.15 * 1.0 + 0.85 * std::sqrt(2.0 / std::numbers::pi), 0.01);
}

TEST(EvalOracle, GridSortedAndDeduplicated) {
  const Dataset ev = sim_data(SimVariant::simdist, 500, 0, 2);
  const RiskReport r = eval_oracle(ParamVector(1), ev.features, SimVariant::simdist, {1.0, 0.1, 0.5, 0.1});
  ASSERT_EQ(r.alphas.size(), 3u);
  EXPECT_TRUE(std::is_sorted(r.alphas.begin(), r.alphas.end()));
  EXPECT_THROW(eval_oracle(ParamVector(1), ev.features, SimVariant::simdist, {0.0}), std::invalid_argument);
  EXPECT_THROW(eval_oracle(ParamVector(1), ev.features, SimVariant::simdist, {}), std::invalid_argument);
  EXPECT_THROW(r.risk_at(0.2), std::out_of_range);
}

TEST(EvalJoint, TwoPointTail) {
  Dataset d;
  d.features = RowMatrix::Zero(2, 1);
  d.labels = Vector(2);
  d.labels << 0, 2;
  const RiskReport r = eval_joint(ParamVector(1), d, LossKind::absolute_deviation, {0.5});
  EXPECT_DOUBLE_EQ(r.risks[0], 2.0);
}

TEST(EvalReplicates, ConfounderFilter) {
  const Dataset d = sim_data(SimVariant::confounded, 300, 5, 3);
  EXPECT_NO_THROW(eval_replicates(ParamVector(1), d, LossKind::absolute_deviation, {0.5}, 1.0));
  EXPECT_THROW(eval_replicates(ParamVector(1), d, LossKind::absolute_deviation, {0.5}, 7.0), std::invalid_argument);
  const Dataset plain = sim_data(SimVariant::simdist, 50, 0, 4);
  EXPECT_THROW(eval_replicates(ParamVector(1), plain, LossKind::absolute_deviation, {0.5}), std::invalid_argument);
}

TEST(EvalReplicates, MatchesDualOfRowMeans) {
  const Dataset d = sim_data(SimVariant::simdist, 80, 6, 5);
  const ParamVector p(Vector::Constant(1, 0.4), 0.1);
  const RiskReport r = eval_replicates(p, d, LossKind::absolute_deviation, {0.2});
  RowMatrix l(d.size(), 6);
  for (Index i = 0; i < d.size(); ++i)
    for (Index j = 0; j < 6; ++j) l(i, j) = std::abs(p.predict(d.features.row(i)) - (*d.replicates)(i, j));
  EXPECT_NEAR(r.risks[0], replicate_worst_case(l, 0.2), 1e-12);
}

TEST(GroupSplit, WorstGroupMean) {
  Dataset d;
  const Index n = 40;
  d.features = RowMatrix::Zero(n, 2);
  d.labels = Vector(n);
  for (Index i = 0; i < n; ++i) {
    d.features(i, 1) = i < 20 ? 1.0 : 0.0;
    d.labels(i) = i < 20 ? 0.1 : 0.3;
  }
  const auto out = eval_group_split(ParamVector(2), d, LossKind::absolute_deviation, {1});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_FALSE(out[0].skipped);
  EXPECT_NEAR(out[0].worst, 0.3, 1e-15);
  EXPECT_NEAR(out[0].mean_when_one, 0.1, 1e-15);
}

TEST(GroupSplit, ConstantColumnSkipped) {
  Dataset d;
  d.features = RowMatrix::Ones(30, 1);
  d.labels = Vector::Zero(30);
  const auto out = eval_group_split(ParamVector(1), d, LossKind::absolute_deviation, {0});
  EXPECT_TRUE(out[0].skipped);
  EXPECT_FALSE(out[0].reason.empty());
}

TEST(GroupSplit, NonBinaryAndOutOfRangeRejected) {
  Dataset d;
  d.features = RowMatrix::Constant(30, 1, 0.5);
  d.labels = Vector::Zero(30);
  EXPECT_THROW(eval_group_split(ParamVector(1), d, LossKind::absolute_deviation, {0}), std::invalid_argument);
  EXPECT_THROW(eval_group_split(ParamVector(1), d, LossKind::absolute_deviation, {3}), std::invalid_argument);
}

TEST(EvalProperty, ReportsNonincreasingInAlpha) {
  Rand r(7);
  const Dataset d = sim_data(SimVariant::simdist, 400, 20, 8);
  for (int trial = 0; trial < 20; ++trial) {
    const ParamVector p(random_vector(r, 1, -1, 2), uni(r, -0.5, 0.5));
    for (const RiskReport& rep : {eval_oracle(p, d.features, SimVariant::simdist, kGrid),
                                  eval_replicates(p, d, LossKind::absolute_deviation, kGrid),
                                  eval_joint(p, d, LossKind::absolute_deviation, kGrid)}) {
      for (std::size_t k = 1; k < rep.risks.size(); ++k) EXPECT_LE(rep.risks[k], rep.risks[k - 1] + 1e-12);
      EXPECT_NEAR(rep.risk_at(1.0), rep.mean_risk, 1e-12);
    }
  }
}

TEST(EvalProperty, PermutationInvariant) {
  Rand r(9);
  const Dataset d = sim_data(SimVariant::simdist, 200, 4, 10);
  std::vector<Index> perm(static_cast<std::size_t>(d.size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), r);
  Dataset q = d;
  for (Index i = 0; i < d.size(); ++i) {
    const Index s = perm[static_cast<std::size_t>(i)];
    q.features.row(i) = d.features.row(s);
    q.labels(i) = d.labels(s);
    q.replicates->row(i) = d.replicates->row(s);
  }
  const ParamVector p(Vector::Constant(1, 0.3), 0.05);
  for (double a : kGrid) {
    EXPECT_NEAR(eval_joint(p, d, LossKind::absolute_deviation, {a}).risks[0],
                eval_joint(p, q, LossKind::absolute_deviation, {a}).risks[0], 1e-12);
    EXPECT_NEAR(eval_replicates(p, d, LossKind::absolute_deviation, {a}).risks[0],
                eval_replicates(p, q, LossKind::absolute_deviation, {a}).risks[0], 1e-12);
    EXPECT_NEAR(eval_oracle(p, d.features, SimVariant::simdist, {a}).risks[0],
                eval_oracle(p, q.features, SimVariant::simdist, {a}).risks[0], 1e-12);
  }
}

// Raw losses include label noise on top of the conditional risk, so the joint
// estimate should sit above the replicate plug-in.
TEST(EvalProperty, JointAboveReplicates) {
  const Dataset d = sim_data(SimVariant::simdist, 2000, 100, 11);
  const ParamVector p(Vector::Constant(1, 0.3), 0.0);
  for (double a : {0.05, 0.1, 0.3}) {
    const double joint = eval_joint(p, d, LossKind::absolute_deviation, {a}).risks[0];
    const double reps = eval_replicates(p, d, LossKind::absolute_deviation, {a}).risks[0];
    EXPECT_GE(joint, 0.98 * reps) << a;
  }
}

TEST(EvalCsv, WritesRows) {
  RiskReport r;
  r.alphas = {0.1, 1.0};
  r.risks = {2.0, 1.0};
  r.method = "m";
  std::ostringstream os;
  write_csv(os, r);
  EXPECT_EQ(os.str(), "alpha0,risk,method\n0.1,2,m\n1,1,m\n");
}

TEST(CrossValidate, SingletonGridAndTies) {
  SimSpec s;
  s.n = 200;
  s.seed = 12;
  const Dataset train_d = generate(s);
  s.seed = 13;
  s.n = 100;
  const Dataset hold = generate_replicates(s, 10);
  ExperimentConfig cfg;
  cfg.iters = 50;
  cfg.intercept = false;
  const CvResult one = cross_validate(train_d, hold, LossKind::absolute_deviation, cfg, {10.0}, 0.05, 1);
  ASSERT_EQ(one.points.size(), 1u);
  EXPECT_DOUBLE_EQ(one.best_point().ratio, 10.0);

  // erm ignores the ratio, so every grid point scores the same and the
  // smallest ratio wins
  cfg.objective = "erm";
  const CvResult tie = cross_validate(train_d, hold, LossKind::absolute_deviation, cfg, {100.0, 1.0, 10.0}, 0.05, 2);
  EXPECT_DOUBLE_EQ(tie.best_point().ratio, 1.0);
  ASSERT_EQ(tie.points.size(), 3u);
  EXPECT_DOUBLE_EQ(tie.points[0].ratio, 1.0);
  EXPECT_DOUBLE_EQ(tie.points[0].score, tie.points[2].score);
}

TEST(CrossValidate, ParallelMatchesSerial) {
  SimSpec s;
  s.n = 150;
  s.seed = 14;
  const Dataset train_d = generate(s);
  s.seed = 15;
  const Dataset hold = generate_replicates(s, 8);
  ExperimentConfig cfg;
  cfg.iters = 60;
  const std::vector<double> grid{1.0, 10.0, 100.0};
  const CvResult a = cross_validate(train_d, hold, LossKind::absolute_deviation, cfg, grid, 0.05, 1);
  const CvResult b = cross_validate(train_d, hold, LossKind::absolute_deviation, cfg, grid, 0.05, 3);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(a.points[k].score, b.points[k].score);
  EXPECT_EQ(a.best_point().ratio, b.best_point().ratio);
}

TEST(OracleSlopes, ToyMinimizerInRange) {
  const Dataset ev = sim_data(SimVariant::toy_1d, 20000, 0, 16);
  const auto slopes = oracle_slopes(ev.features, SimVariant::toy_1d, {0.05, 1.0});
  ASSERT_EQ(slopes.size(), 2u);
  // the average-risk minimizer leans on the majority, the tail one does not
  EXPECT_GT(slopes[1].slope, slopes[0].slope);
  EXPECT_GT(slopes[0].slope, -0.1);
  EXPECT_LT(slopes[0].slope, 0.5);
}
