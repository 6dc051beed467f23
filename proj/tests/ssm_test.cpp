#include <gtest/gtest.h>

#include "refatom/ssm/ssm.hpp"
#include "test_util.hpp"

namespace refatom::ssm {
namespace {

using test::random_mat;

SsmLayerParams identity_layer(Eigen::Index d, double a) {
  return {Mat::Identity(d, d), a * Mat::Identity(d, d), Mat::Identity(d, d), Mat::Identity(d, d)};
}

SsmLayerParams random_layer(Eigen::Index d, Eigen::Index ds, Eigen::Index n, std::mt19937_64& rng) {
  SsmLayerParams p{random_mat(d, ds, rng), random_mat(n, n, rng), random_mat(n, ds, rng), random_mat(ds, n, rng)};
  p.A *= 0.9 / static_cast<double>(n);
  return p;
}

retrieval::Trajectory trajectory_of(const Mat& tokens) {
  retrieval::Trajectory t;
  t.tokens = tokens;
  t.cells.assign(static_cast<std::size_t>(tokens.rows()), 0);
  t.distances.assign(static_cast<std::size_t>(tokens.rows()), 0.0);
  return t;
}

TEST(Scan, MemorylessIsIdentity) {
  std::mt19937_64 rng(1);
  const Mat x = random_mat(6, 3, rng);
  EXPECT_EQ(ssm_scan(x, identity_layer(3, 0.0)).outputs, x);
}

TEST(Scan, IntegratorGivesPrefixSums) {
  const Mat x{{1, 2}, {3, 4}, {5, 6}};
  const Mat expect{{1, 2}, {4, 6}, {9, 12}};
  const auto out = ssm_scan(x, identity_layer(2, 1.0));
  EXPECT_EQ(out.outputs, expect);
  EXPECT_EQ(out.final_state, (Vec{{9, 12}}));
}

TEST(Scan, MatchesOracleOnRandomCase) {
  std::mt19937_64 rng(2);
  const auto p = random_layer(4, 4, 3, rng);
  const Mat x = random_mat(8, 4, rng);
  const auto fast = ssm_scan(x, p);
  const auto slow = ssm_scan_oracle(x, p);
  EXPECT_LT((fast.outputs - slow.outputs).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((fast.final_state - slow.final_state).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Scan, SingleStepClosedForm) {
  std::mt19937_64 rng(3);
  const auto p = random_layer(5, 3, 4, rng);
  const Mat x = random_mat(1, 5, rng);
  const Mat expect = (p.C * p.B * p.in_proj.transpose() * x.transpose()).transpose();
  EXPECT_LT((ssm_scan(x, p).outputs - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Scan, RejectsBadShapes) {
  std::mt19937_64 rng(4);
  auto p = random_layer(3, 2, 2, rng);
  EXPECT_THROW(ssm_scan(Mat(Mat::Zero(4, 5)), p), DimensionError);
  EXPECT_THROW(ssm_scan(Mat(0, 3), p), DimensionError);
  p.A = Mat::Zero(2, 3);
  EXPECT_THROW(ssm_scan(Mat(Mat::Zero(4, 3)), p), DimensionError);
}

TEST(Scan, LinearityProperty) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 32), dim(1, 8);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_layer(dim(rng), dim(rng), dim(rng), rng);
    const Eigen::Index L = len(rng);
    const Mat x = random_mat(L, p.input_dim(), rng);
    const Mat y = random_mat(L, p.input_dim(), rng);
    const double a = coef(rng), b = coef(rng);
    const Mat lhs = ssm_scan(Mat(a * x + b * y), p).outputs;
    const Mat rhs = a * ssm_scan(x, p).outputs + b * ssm_scan(y, p).outputs;
    ASSERT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10) << "trial " << trial;
  }
}

TEST(Scan, PrefixConsistencyProperty) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> len(1, 32), dim(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_layer(dim(rng), dim(rng), dim(rng), rng);
    const Eigen::Index L = len(rng);
    const Eigen::Index m = std::uniform_int_distribution<Eigen::Index>(1, L)(rng);
    const Mat x = random_mat(L, p.input_dim(), rng);
    const Mat full = ssm_scan(x, p).outputs;
    ASSERT_LE((full.topRows(m) - ssm_scan(Mat(x.topRows(m)), p).outputs).cwiseAbs().maxCoeff(), 1e-10) << "trial " << trial;
  }
}

TEST(Scan, ZeroInputsGiveZeroOutputs) {
  std::mt19937_64 rng(7);
  const auto p = random_layer(3, 4, 5, rng);
  EXPECT_TRUE(ssm_scan(Mat(Mat::Zero(7, 3)), p).outputs.isZero(0.0));
}

TEST(Init, DiagonalAInStableRange) {
  std::mt19937_64 rng(8);
  const auto p = init_ssm_layer(32, 16, 16, rng);
  EXPECT_NO_THROW(p.validate());
  for (Eigen::Index i = 0; i < 16; ++i) {
    for (Eigen::Index j = 0; j < 16; ++j) {
      if (i == j) {
        EXPECT_GE(p.A(i, j), 0.5);
        EXPECT_LE(p.A(i, j), 0.95);
      } else {
        EXPECT_EQ(p.A(i, j), 0.0);
      }
    }
  }
}

TEST(AggregateKeyword, MemorylessReturnsLastProjectedToken) {
  std::mt19937_64 rng(9);
  retrieval::TrajectorySet set;
  set.trajectories.push_back(trajectory_of(random_mat(4, 3, rng)));
  auto p = identity_layer(3, 0.0);
  p.in_proj = random_mat(3, 3, rng);
  const Mat out = aggregate_keyword(set, p);
  ASSERT_EQ(out.rows(), 1);
  EXPECT_LT((out.row(0) - set.trajectories[0].tokens.row(3) * p.in_proj).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AggregateKeyword, RowsAreIndependentFinalReadouts) {
  std::mt19937_64 rng(10);
  const auto p = random_layer(4, 3, 5, rng);
  retrieval::TrajectorySet set;
  for (int k = 0; k < 3; ++k) set.trajectories.push_back(trajectory_of(random_mat(6, 4, rng)));
  const Mat out = aggregate_keyword(set, p);
  ASSERT_EQ(out.rows(), 3);
  for (Eigen::Index k = 0; k < 3; ++k) {
    const auto ref = ssm_scan_oracle(set.trajectories[static_cast<std::size_t>(k)].tokens, p);
    EXPECT_LT((out.row(k) - ref.outputs.row(5)).cwiseAbs().maxCoeff(), 1e-12);
  }
  // Permuting trajectories permutes rows: no state leaks between them.
  std::swap(set.trajectories[0], set.trajectories[2]);
  const Mat swapped = aggregate_keyword(set, p);
  EXPECT_EQ(swapped.row(0), out.row(2));
  EXPECT_EQ(swapped.row(1), out.row(1));
  EXPECT_EQ(swapped.row(2), out.row(0));
}

TEST(AggregateKeyword, EmptySetGivesEmptyMatrix) {
  std::mt19937_64 rng(11);
  EXPECT_EQ(aggregate_keyword(retrieval::TrajectorySet{}, random_layer(2, 2, 2, rng)).rows(), 0);
}

TEST(AggregateScene, AveragesPerStepScans) {
  std::mt19937_64 rng(12);
  const auto p = random_layer(4, 3, 2, rng);
  retrieval::TrajectorySet one;
  one.trajectories.push_back(trajectory_of(random_mat(5, 4, rng)));
  const Mat single = aggregate_scene(one, p);
  EXPECT_EQ(single, ssm_scan(one.trajectories[0].tokens, p).outputs);

  retrieval::TrajectorySet twin = one;
  twin.trajectories.push_back(one.trajectories[0]);
  EXPECT_LT((aggregate_scene(twin, p) - single).cwiseAbs().maxCoeff(), 1e-15);

  retrieval::TrajectorySet two = one;
  two.trajectories.push_back(trajectory_of(random_mat(5, 4, rng)));
  const Mat expect = (ssm_scan_oracle(two.trajectories[0].tokens, p).outputs +
                      ssm_scan_oracle(two.trajectories[1].tokens, p).outputs) / 2.0;
  EXPECT_LT((aggregate_scene(two, p) - expect).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(aggregate_scene(retrieval::TrajectorySet{}, p).rows(), 0);
}

TEST(AggregateHolistic, IntegratorGrowsLinearly) {
  std::mt19937_64 rng(13);
  SsmLayerParams p{random_mat(3, 2, rng), Mat::Identity(2, 2), random_mat(2, 2, rng), random_mat(2, 2, rng)};
  const RowVec x = random_mat(1, 3, rng);
  const Mat seq = x.replicate(6, 1);
  const Mat out = aggregate_holistic(seq, p);
  const RowVec step = (p.C * p.B * (x * p.in_proj).transpose()).transpose();
  for (Eigen::Index l = 0; l < 6; ++l) EXPECT_LT((out.row(l) - (l + 1.0) * step).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TapeScan, ValuesMatchPlainScan) {
  std::mt19937_64 rng(14);
  const auto p = random_layer(4, 3, 5, rng);
  const Mat x = random_mat(7, 4, rng);
  ad::Tape<double> tape;
  const SsmVars v{tape.constant(p.in_proj), tape.constant(p.A), tape.constant(p.B), tape.constant(p.C)};
  EXPECT_EQ(scan(tape.constant(x), v).value(), ssm_scan(x, p).outputs);
}

}  // namespace
}  // namespace refatom::ssm
