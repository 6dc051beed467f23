#pragma once

#include <array>
#include <span>

#include "refatom/core/dense.hpp"
#include "refatom/core/tape.hpp"
#include "refatom/retrieval/retrieval.hpp"

namespace refatom::fusion {

/// Frame sequence: row l = mean of the cells of frame l (N_L x d).
Mat pool_spatial(const retrieval::VisualTokenGrid& grid);

/// Cell sequence: row s = mean over frames of cell s (N_S x d).
Mat pool_temporal(const retrieval::VisualTokenGrid& grid);

/// Projections and learnable prompt rows for one (hierarchy, branch) pair.
template <class Scalar>
struct AttentionParams {
  Matrix<Scalar> w_q;      // d_q x d_a
  Matrix<Scalar> w_k;      // d_s x d_a
  Matrix<Scalar> w_v;      // d_s x d_a
  Matrix<Scalar> prompts;  // N_p x d_a (N_p may be 0)
};
using HierarchyAttnParams = AttentionParams<double>;

/// Single-head scaled dot-product attention. Queries are projected and the
/// prompt rows appended, then every row attends over the projected context:
/// out = softmax(Q~ K^T / sqrt(d_a)) V, shape (Q + N_p) x d_a.
template <class Scalar>
Matrix<Scalar> cross_attention(const Matrix<Scalar>& queries, const Matrix<Scalar>& context,
                               const AttentionParams<Scalar>& p) {
  if (context.rows() == 0) throw DomainError("cross_attention: empty context");
  if (queries.rows() + p.prompts.rows() == 0) throw DomainError("cross_attention: no query rows");
  const Eigen::Index da = p.w_k.cols();
  const Matrix<Scalar> q = concat_rows(project(queries, p.w_q), p.prompts);
  const Matrix<Scalar> k = project(context, p.w_k);
  const Matrix<Scalar> v = project(context, p.w_v);
  Matrix<Scalar> logits = q * k.transpose();
  logits *= Scalar(1) / std::sqrt(static_cast<Scalar>(da));
  const Matrix<Scalar> weights = softmax_rows(logits);
  return weights * v;
}

enum HierarchyIndex : std::size_t { kHolistic = 0, kKeyword = 1, kScene = 2 };
inline constexpr std::array<const char*, 3> kHierarchyNames{"holistic", "keyword", "scene"};

/// Query rows per hierarchy; a hierarchy with zero rows is inactive.
struct HierarchyQueries {
  Mat holistic;  // t_R, N_R x d
  Mat keyword;   // t_KW, N_K' x d_s
  Mat scene;     // per-timestep scene tokens, N_L x d_s

  const Mat& operator[](std::size_t h) const { return h == kHolistic ? holistic : h == kKeyword ? keyword : scene; }
};

using HierarchyMask = std::array<bool, 3>;

/// Per active hierarchy: cross-attend, mean-pool the rows; then average the
/// pooled vectors over active hierarchies. Throws ConfigError if none active.
RowVec mhs_ca_branch(const Mat& enhanced_tokens, const HierarchyQueries& queries,
                     const std::array<HierarchyAttnParams, 3>& params, HierarchyMask enabled);

template <class Scalar>
struct HeadParams {
  Matrix<Scalar> reg_w1, reg_b1, reg_w2, reg_b2;
  Matrix<Scalar> cls_w1, cls_b1, cls_w2, cls_b2;
};

struct Prediction {
  RowVec bbox;   // 4 coordinates in (0,1)
  RowVec probs;  // N_c probabilities
};

/// Two-layer rectifier MLPs with sigmoid outputs for box and classes.
Prediction heads(const RowVec& z, const HeadParams<double>& p);

/// Branch average of boxes and probabilities.
Prediction fuse_predictions(const Prediction& temporal, const Prediction& spatial);

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy over classes with predictions clamped to
/// [1e-7, 1 - 1e-7].
double bce_loss(const RowVec& labels, const RowVec& probs);

/// Sum of squared coordinate errors.
double mse_loss(const RowVec& bbox, const RowVec& predicted);

// ---------------------------------------------------------------------------
// Differentiable counterparts; values match the plain functions bit for bit.

using DVar = ad::Var<double>;

struct AttentionVars {
  DVar w_q, w_k, w_v;
  DVar prompts;  // invalid when N_p == 0
};

DVar cross_attention(DVar queries, DVar context, const AttentionVars& p);

/// `queries[h]` invalid or `enabled[h]` false -> hierarchy skipped.
DVar mhs_ca_branch(DVar enhanced_tokens, const std::array<DVar, 3>& queries,
                   const std::array<AttentionVars, 3>& params, HierarchyMask enabled);

struct HeadVars {
  DVar reg_w1, reg_b1, reg_w2, reg_b2;
  DVar cls_w1, cls_b1, cls_w2, cls_b2;
};

struct PredictionVars {
  DVar bbox;
  DVar probs;
};

PredictionVars heads(DVar z, const HeadVars& p);
PredictionVars fuse_predictions(const PredictionVars& temporal, const PredictionVars& spatial);
DVar bce_loss(const RowVec& labels, DVar probs);
DVar mse_loss(const RowVec& bbox, DVar predicted);

}  // namespace refatom::fusion
