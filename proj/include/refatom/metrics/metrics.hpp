#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "refatom/core/dense.hpp"

namespace refatom::metrics {

using Box = std::array<double, 4>;  // x1, y1, x2, y2

struct EvalRecord {
  std::string sample_id;
  Box gt_bbox{};
  Box pred_bbox{};
  std::vector<int> gt_labels;        // multi-hot, N_c entries
  std::vector<double> pred_scores;   // N_c entries
};

/// Clamps coordinates to [0,1]; inverted boxes keep their corners and get
/// zero area in iou().
Box sanitize(const Box& box);

/// Intersection over union of two sanitized boxes; 0 when the union is empty.
double iou(const Box& a, const Box& b);

double mean_iou(std::span<const EvalRecord> records);

/// Macro average over classes with at least one positive of
/// AP_c = mean over positives of precision at that positive's rank.
/// Ranking is by score descending, ties by record order.
double multilabel_map(std::span<const EvalRecord> records);

/// Macro average over classes having both a positive and a negative of the
/// Mann-Whitney AUC with tied scores counted as one half.
double auroc(std::span<const EvalRecord> records);

/// Per-class AP computation used by multilabel_map (exposed for reports).
double average_precision(std::span<const double> scores, std::span<const int> labels);
double class_auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace refatom::metrics
