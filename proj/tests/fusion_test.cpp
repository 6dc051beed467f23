#include <gtest/gtest.h>

#include <cmath>

#include "refatom/fusion/fusion.hpp"
#include "test_util.hpp"

namespace refatom::fusion {
namespace {

using test::random_mat;

HierarchyAttnParams random_attn(Eigen::Index dq, Eigen::Index ds, Eigen::Index da, Eigen::Index np,
                                std::mt19937_64& rng) {
  return {random_mat(dq, da, rng), random_mat(ds, da, rng), random_mat(ds, da, rng), random_mat(np, da, rng)};
}

TEST(Pooling, SpatialAndTemporalMeans) {
  const retrieval::VisualTokenGrid frame(1, 2, Mat{{1, 0}, {0, 1}});
  EXPECT_EQ(pool_spatial(frame), (Mat{{0.5, 0.5}}));
  const retrieval::VisualTokenGrid cell(2, 1, Mat{{1, 0}, {0, 1}});
  EXPECT_EQ(pool_temporal(cell), (Mat{{0.5, 0.5}}));

  std::mt19937_64 rng(1);
  const Mat t = random_mat(3, 2, rng);
  EXPECT_EQ(pool_spatial(retrieval::VisualTokenGrid(3, 1, t)), t);
  EXPECT_EQ(pool_temporal(retrieval::VisualTokenGrid(1, 3, t)), t);
  const retrieval::VisualTokenGrid constant(2, 3, Mat::Constant(6, 2, 0.25));
  EXPECT_EQ(pool_spatial(constant), Mat::Constant(2, 2, 0.25));
  EXPECT_EQ(pool_temporal(constant), Mat::Constant(3, 2, 0.25));
}

TEST(CrossAttention, SingleContextRowReturnsValue) {
  std::mt19937_64 rng(2);
  const auto p = random_attn(3, 4, 2, 2, rng);
  const Mat ctx = random_mat(1, 4, rng);
  const Mat out = cross_attention(Mat(random_mat(3, 3, rng)), ctx, p);
  ASSERT_EQ(out.rows(), 5);
  const Mat v = ctx * p.w_v;
  for (Eigen::Index r = 0; r < out.rows(); ++r) EXPECT_LT((out.row(r) - v).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CrossAttention, HandComputedSoftmax) {
  // Q=1, N_p=0, L=2, d_a=2 with identity projections.
  const HierarchyAttnParams p{Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Identity(2, 2), Mat(0, 2)};
  const Mat q{{1, 0}};
  const Mat ctx{{1, 0}, {0, 2}};
  const double s = 1.0 / std::sqrt(2.0);
  const double w0 = std::exp(s) / (std::exp(s) + 1.0);
  const Mat expect{{w0, 2.0 * (1.0 - w0)}};
  EXPECT_LT((cross_attention(q, ctx, p) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CrossAttention, ZeroPromptsAddNoRows) {
  std::mt19937_64 rng(3);
  const auto p = random_attn(3, 4, 2, 0, rng);
  EXPECT_EQ(cross_attention(Mat(random_mat(5, 3, rng)), Mat(random_mat(6, 4, rng)), p).rows(), 5);
}

TEST(CrossAttention, EmptyContextThrows) {
  std::mt19937_64 rng(4);
  const auto p = random_attn(3, 4, 2, 1, rng);
  EXPECT_THROW(cross_attention(Mat(random_mat(1, 3, rng)), Mat(0, 4), p), DomainError);
}

TEST(CrossAttention, RowsAreConvexCombinationsOfValues) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_attn(3, 4, 5, 2, rng);
    const Mat ctx = random_mat(7, 4, rng);
    const Mat out = cross_attention(Mat(random_mat(3, 3, rng)), ctx, p);
    const Mat v = ctx * p.w_v;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      EXPECT_GE(out.col(c).minCoeff(), v.col(c).minCoeff() - 1e-12);
      EXPECT_LE(out.col(c).maxCoeff(), v.col(c).maxCoeff() + 1e-12);
    }
  }
}

TEST(CrossAttention, InvariantToContextPermutation) {
  std::mt19937_64 rng(6);
  const auto p = random_attn(3, 4, 5, 2, rng);
  const Mat q = random_mat(2, 3, rng);
  const Mat ctx = random_mat(6, 4, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 6, rng);
  const Mat shuffled = perm * ctx;
  EXPECT_LT((cross_attention(q, ctx, p) - cross_attention(q, shuffled, p)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MhsCa, SingleHierarchyIsPooledAttention) {
  std::mt19937_64 rng(7);
  const Mat tokens = random_mat(5, 4, rng);
  HierarchyQueries q{random_mat(1, 6, rng), random_mat(3, 4, rng), random_mat(5, 4, rng)};
  const std::array<HierarchyAttnParams, 3> p{random_attn(6, 4, 3, 2, rng), random_attn(4, 4, 3, 2, rng),
                                             random_attn(4, 4, 3, 2, rng)};
  const RowVec z = mhs_ca_branch(tokens, q, p, {true, false, false});
  EXPECT_EQ(z, mean_rows(cross_attention(q.holistic, tokens, p[0])));
  EXPECT_THROW(mhs_ca_branch(tokens, q, p, {false, false, false}), ConfigError);
}

TEST(MhsCa, AveragesActiveHierarchies) {
  std::mt19937_64 rng(8);
  const Mat tokens = random_mat(5, 4, rng);
  HierarchyQueries q{random_mat(1, 6, rng), random_mat(3, 4, rng), random_mat(5, 4, rng)};
  const std::array<HierarchyAttnParams, 3> p{random_attn(6, 4, 3, 2, rng), random_attn(4, 4, 3, 2, rng),
                                             random_attn(4, 4, 3, 2, rng)};
  RowVec expect = RowVec::Zero(3);
  for (std::size_t h = 0; h < 3; ++h) expect += mean_rows(cross_attention(q[h], tokens, p[h]));
  expect /= 3.0;
  EXPECT_LT((mhs_ca_branch(tokens, q, p, {true, true, true}) - expect).cwiseAbs().maxCoeff(), 1e-15);

  // Dropping the keyword hierarchy leaves the mean over the other two.
  RowVec two = (mean_rows(cross_attention(q[0], tokens, p[0])) + mean_rows(cross_attention(q[2], tokens, p[2]))) / 2.0;
  EXPECT_LT((mhs_ca_branch(tokens, q, p, {true, false, true}) - two).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MhsCa, IdenticalHierarchiesGiveThatVector) {
  std::mt19937_64 rng(9);
  const Mat tokens = random_mat(4, 4, rng);
  const Mat shared = random_mat(2, 4, rng);
  HierarchyQueries q{shared, shared, shared};
  const auto one = random_attn(4, 4, 3, 1, rng);
  const std::array<HierarchyAttnParams, 3> p{one, one, one};
  EXPECT_LT((mhs_ca_branch(tokens, q, p, {true, true, true}) - mhs_ca_branch(tokens, q, p, {true, false, false}))
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
}

HeadParams<double> zero_heads(Eigen::Index da, Eigen::Index nc) {
  return {Mat::Zero(da, da), Mat::Zero(1, da), Mat::Zero(da, 4), Mat::Zero(1, 4),
          Mat::Zero(da, da), Mat::Zero(1, da), Mat::Zero(da, nc), Mat::Zero(1, nc)};
}

TEST(Heads, ZeroWeightsGiveHalf) {
  const auto out = heads(RowVec::Ones(3), zero_heads(3, 5));
  EXPECT_EQ(out.bbox, RowVec::Constant(4, 0.5));
  EXPECT_EQ(out.probs, RowVec::Constant(5, 0.5));
}

TEST(Heads, LargeClassBiasSaturates) {
  auto p = zero_heads(3, 2);
  p.cls_b2 = Mat::Constant(1, 2, 10.0);
  EXPECT_GE(heads(RowVec::Ones(3), p).probs.minCoeff(), 0.9999);
}

TEST(Heads, DeterministicAndBounded) {
  std::mt19937_64 rng(10);
  HeadParams<double> p{random_mat(4, 4, rng), random_mat(1, 4, rng), random_mat(4, 4, rng), random_mat(1, 4, rng),
                       random_mat(4, 4, rng), random_mat(1, 4, rng), random_mat(4, 6, rng), random_mat(1, 6, rng)};
  const RowVec z = random_mat(1, 4, rng);
  const auto a = heads(z, p), b = heads(z, p);
  EXPECT_EQ(a.bbox, b.bbox);
  EXPECT_EQ(a.probs, b.probs);
  EXPECT_GT(a.bbox.minCoeff(), 0.0);
  EXPECT_LT(a.bbox.maxCoeff(), 1.0);
}

TEST(Fuse, MidpointAndCommutative) {
  const Prediction t{RowVec::Zero(4), RowVec{{0.2, 0.8}}};
  const Prediction s{RowVec::Ones(4), RowVec{{0.4, 0.4}}};
  const auto f = fuse_predictions(t, s);
  EXPECT_EQ(f.bbox, RowVec::Constant(4, 0.5));
  EXPECT_LT((f.probs - RowVec{{0.3, 0.6}}).cwiseAbs().maxCoeff(), 1e-15);
  const auto g = fuse_predictions(s, t);
  EXPECT_EQ(f.bbox, g.bbox);
  EXPECT_EQ(f.probs, g.probs);
  EXPECT_EQ(fuse_predictions(t, t).bbox, t.bbox);
}

TEST(Losses, BceClosedForms) {
  EXPECT_NEAR(bce_loss(RowVec{{1}}, RowVec{{0.5}}), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(RowVec{{1, 0}}, RowVec{{0.5, 0.5}}), std::log(2.0), 1e-15);
  const double perfect = bce_loss(RowVec{{1, 0}}, RowVec{{1.0, 0.0}});
  EXPECT_GE(perfect, 0.0);
  EXPECT_LT(perfect, 1e-6);
  EXPECT_TRUE(std::isfinite(bce_loss(RowVec{{1, 0}}, RowVec{{0.0, 1.0}})));
  EXPECT_THROW(bce_loss(RowVec{{1, 0}}, RowVec{{0.5}}), DimensionError);
}

TEST(Losses, BceMinimizedAtLabels) {
  const RowVec y{{1, 0, 1}};
  const double best = bce_loss(y, RowVec{{1, 0, 1}});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) EXPECT_GE(bce_loss(y, RowVec{{u(rng), u(rng), u(rng)}}), best);
}

TEST(Losses, MseIsSumOfSquares) {
  EXPECT_EQ(mse_loss(RowVec::Zero(4), RowVec::Zero(4)), 0.0);
  EXPECT_EQ(mse_loss(RowVec::Zero(4), RowVec::Ones(4)), 4.0);
  EXPECT_EQ(mse_loss(RowVec{{0, 0, 0, 0}}, RowVec{{0.5, 0, 0, 0}}), 0.25);
  EXPECT_THROW(mse_loss(RowVec::Zero(4), RowVec::Zero(3)), DimensionError);
}

}  // namespace
}  // namespace refatom::fusion
