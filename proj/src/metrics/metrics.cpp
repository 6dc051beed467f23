#include "refatom/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "refatom/core/dense.hpp"

namespace refatom::metrics {

namespace {

std::size_t class_count(std::span<const EvalRecord> records) {
  const std::size_t n = records.front().gt_labels.size();
  for (const auto& r : records) {
    if (r.gt_labels.size() != n || r.pred_scores.size() != n) {
      throw DimensionError("metrics: record '" + r.sample_id + "' has inconsistent class count");
    }
  }
  return n;
}

void column(std::span<const EvalRecord> records, std::size_t c, std::vector<double>& scores, std::vector<int>& labels) {
  scores.clear();
  labels.clear();
  for (const auto& r : records) {
    scores.push_back(r.pred_scores[c]);
    labels.push_back(r.gt_labels[c]);
  }
}

}  // namespace

Box sanitize(const Box& box) {
  Box out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = std::clamp(box[i], 0.0, 1.0);
  return out;
}

double iou(const Box& a_raw, const Box& b_raw) {
  const Box a = sanitize(a_raw);
  const Box b = sanitize(b_raw);
  auto area = [](const Box& x) { return std::max(0.0, x[2] - x[0]) * std::max(0.0, x[3] - x[1]); };
  const double iw = std::max(0.0, std::min(a[2], b[2]) - std::max(a[0], b[0]));
  const double ih = std::max(0.0, std::min(a[3], b[3]) - std::max(a[1], b[1]));
  // Inverted boxes have zero area and therefore zero intersection.
  const double inter = (area(a) > 0.0 && area(b) > 0.0) ? iw * ih : 0.0;
  const double uni = area(a) + area(b) - inter;
  if (!(uni > 0.0)) return 0.0;
  return inter / uni;
}

double mean_iou(std::span<const EvalRecord> records) {
  if (records.empty()) throw MetricError("mean_iou: no records");
  double sum = 0.0;
  for (const auto& r : records) sum += iou(r.gt_bbox, r.pred_bbox);
  return sum / static_cast<double>(records.size());
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw MetricError("average_precision: no positives");
  return sum / static_cast<double>(hits);
}

double class_auroc(std::span<const double> scores, std::span<const int> labels) {
  // Mid-ranks over ascending scores; tied blocks share their average rank.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw MetricError("class_auroc: need both positives and negatives");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double multilabel_map(std::span<const EvalRecord> records) {
  if (records.empty()) throw MetricError("multilabel_map: no records");
  const std::size_t nc = class_count(records);
  std::vector<double> scores;
  std::vector<int> labels;
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    column(records, c, scores, labels);
    if (std::none_of(labels.begin(), labels.end(), [](int y) { return y != 0; })) continue;
    sum += average_precision(scores, labels);
    ++valid;
  }
  if (valid == 0) throw MetricError("multilabel_map: no class has a positive sample");
  return sum / static_cast<double>(valid);
}

double auroc(std::span<const EvalRecord> records) {
  if (records.empty()) throw MetricError("auroc: no records");
  const std::size_t nc = class_count(records);
  std::vector<double> scores;
  std::vector<int> labels;
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    column(records, c, scores, labels);
    const auto pos = std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; });
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) continue;
    sum += class_auroc(scores, labels);
    ++valid;
  }
  if (valid == 0) throw MetricError("auroc: no class has both positives and negatives");
  return sum / static_cast<double>(valid);
}

}  // namespace refatom::metrics
