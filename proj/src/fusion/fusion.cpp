#include "refatom/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace refatom::fusion {

Mat pool_spatial(const retrieval::VisualTokenGrid& grid) {
  Mat out(static_cast<Eigen::Index>(grid.frames()), static_cast<Eigen::Index>(grid.dim()));
  for (std::size_t l = 0; l < grid.frames(); ++l) out.row(static_cast<Eigen::Index>(l)) = mean_rows(grid.frame(l));
  return out;
}

Mat pool_temporal(const retrieval::VisualTokenGrid& grid) {
  Mat out = Mat::Zero(static_cast<Eigen::Index>(grid.cells()), static_cast<Eigen::Index>(grid.dim()));
  for (std::size_t l = 0; l < grid.frames(); ++l) out += grid.frame(l);
  out /= static_cast<double>(grid.frames());
  return out;
}

RowVec mhs_ca_branch(const Mat& enhanced_tokens, const HierarchyQueries& queries,
                     const std::array<HierarchyAttnParams, 3>& params, HierarchyMask enabled) {
  RowVec acc;
  int active = 0;
  for (std::size_t h = 0; h < 3; ++h) {
    if (!enabled[h] || queries[h].rows() == 0) continue;
    const RowVec pooled = mean_rows(cross_attention(queries[h], enhanced_tokens, params[h]));
    if (active == 0) {
      acc = pooled;
    } else {
      acc += pooled;
    }
    ++active;
  }
  if (active == 0) throw ConfigError("mhs_ca_branch: every hierarchy is disabled");
  acc /= static_cast<double>(active);
  return acc;
}

Prediction heads(const RowVec& z, const HeadParams<double>& p) {
  const Mat zr = z;
  Prediction out;
  out.bbox = sigmoid(linear(relu(linear(zr, p.reg_w1, p.reg_b1)), p.reg_w2, p.reg_b2));
  out.probs = sigmoid(linear(relu(linear(zr, p.cls_w1, p.cls_b1)), p.cls_w2, p.cls_b2));
  return out;
}

Prediction fuse_predictions(const Prediction& temporal, const Prediction& spatial) {
  if (temporal.bbox.size() != spatial.bbox.size()) throw_shape_mismatch("fuse_predictions(bbox)", temporal.bbox, spatial.bbox);
  if (temporal.probs.size() != spatial.probs.size()) throw_shape_mismatch("fuse_predictions(probs)", temporal.probs, spatial.probs);
  Prediction out{temporal.bbox, temporal.probs};
  out.bbox += spatial.bbox;
  out.bbox /= 2.0;
  out.probs += spatial.probs;
  out.probs /= 2.0;
  return out;
}

double bce_loss(const RowVec& labels, const RowVec& probs) {
  if (labels.size() != probs.size()) throw_shape_mismatch("bce_loss", labels, probs);
  if (labels.size() == 0) throw DomainError("bce_loss: no classes");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probs(i), kProbClamp, 1.0 - kProbClamp);
    sum += labels(i) * std::log(p) + (1.0 - labels(i)) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(labels.size());
}

double mse_loss(const RowVec& bbox, const RowVec& predicted) {
  if (bbox.size() != 4 || predicted.size() != 4) throw_shape_mismatch("mse_loss", bbox, predicted);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < 4; ++j) sum += (bbox(j) - predicted(j)) * (bbox(j) - predicted(j));
  return sum;
}

DVar cross_attention(DVar queries, DVar context, const AttentionVars& p) {
  if (context.rows() == 0) throw DomainError("cross_attention: empty context");
  const Eigen::Index da = p.w_k.cols();
  DVar q = ad::project(queries, p.w_q);
  q = p.prompts.valid() ? ad::concat_rows(q, p.prompts) : ad::concat_rows(q, queries.tape().constant(Mat(0, da)));
  DVar k = ad::project(context, p.w_k);
  DVar v = ad::project(context, p.w_v);
  DVar logits = ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(da)));
  return ad::matmul(ad::softmax_rows(logits), v);
}

DVar mhs_ca_branch(DVar enhanced_tokens, const std::array<DVar, 3>& queries, const std::array<AttentionVars, 3>& params,
                   HierarchyMask enabled) {
  std::vector<DVar> pooled;
  for (std::size_t h = 0; h < 3; ++h) {
    if (!enabled[h] || !queries[h].valid() || queries[h].rows() == 0) continue;
    pooled.push_back(ad::mean_rows(cross_attention(queries[h], enhanced_tokens, params[h])));
  }
  if (pooled.empty()) throw ConfigError("mhs_ca_branch: every hierarchy is disabled");
  return ad::mean_of<double>(pooled);
}

PredictionVars heads(DVar z, const HeadVars& p) {
  PredictionVars out;
  out.bbox = ad::sigmoid(ad::linear(ad::relu(ad::linear(z, p.reg_w1, p.reg_b1)), p.reg_w2, p.reg_b2));
  out.probs = ad::sigmoid(ad::linear(ad::relu(ad::linear(z, p.cls_w1, p.cls_b1)), p.cls_w2, p.cls_b2));
  return out;
}

PredictionVars fuse_predictions(const PredictionVars& temporal, const PredictionVars& spatial) {
  const std::array<DVar, 2> boxes{temporal.bbox, spatial.bbox};
  const std::array<DVar, 2> probs{temporal.probs, spatial.probs};
  return {ad::mean_of<double>(boxes), ad::mean_of<double>(probs)};
}

DVar bce_loss(const RowVec& labels, DVar probs) {
  const RowVec p = probs.value();
  const double value = bce_loss(labels, p);
  Mat out(1, 1);
  out(0, 0) = value;
  return probs.tape().record(std::move(out), {probs}, [labels, probs](ad::Tape<double>& t, const Mat& g) {
    const RowVec& p = probs.value();
    const double n = static_cast<double>(labels.size());
    Mat d(1, p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) < kProbClamp || p(i) > 1.0 - kProbClamp) {
        d(0, i) = 0.0;
      } else {
        d(0, i) = -(labels(i) / p(i) - (1.0 - labels(i)) / (1.0 - p(i))) / n;
      }
    }
    t.accumulate(probs, g(0, 0) * d);
  });
}

DVar mse_loss(const RowVec& bbox, DVar predicted) {
  const double value = mse_loss(bbox, RowVec(predicted.value()));
  Mat out(1, 1);
  out(0, 0) = value;
  return predicted.tape().record(std::move(out), {predicted}, [bbox, predicted](ad::Tape<double>& t, const Mat& g) {
    Mat d = 2.0 * (predicted.value() - bbox);
    t.accumulate(predicted, g(0, 0) * d);
  });
}

}  // namespace refatom::fusion
