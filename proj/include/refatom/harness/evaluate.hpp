#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "refatom/harness/checkpoint.hpp"
#include "refatom/harness/samples.hpp"
#include "refatom/metrics/metrics.hpp"

namespace refatom::harness {

struct SampleRow {
  std::string id;
  double iou = 0.0;
  metrics::Box gt_bbox{};
  metrics::Box pred_bbox{};
  std::vector<int> gt_labels;
  std::vector<double> scores;
};

struct EvalReport {
  double miou = 0.0;
  double map = 0.0;
  double auroc = 0.0;
  std::vector<SampleRow> rows;
};

/// Aggregates already-scored records.
EvalReport evaluate_records(std::span<const metrics::EvalRecord> records);

/// Runs the model on every sample (in parallel when `threads` > 1; the
/// report does not depend on it).
std::vector<metrics::EvalRecord> predict(const ParamStore& params, const fusion::ModelConfig& config,
                                         std::span<const PreparedSample> samples, std::size_t threads = 1);

EvalReport evaluate(const Checkpoint& ckpt, std::span<const PreparedSample> samples, std::size_t threads = 1);

/// Checks dims against the dataset, then evaluates every sample.
EvalReport evaluate(const Checkpoint& ckpt, const Dataset& dataset, std::size_t threads = 1);

/// Pretty JSON with fixed key order.
std::string report_to_json(const EvalReport& report);
void save_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace refatom::harness
