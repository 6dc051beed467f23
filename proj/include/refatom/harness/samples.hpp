#pragma once

#include <span>
#include <string>
#include <vector>

#include "refatom/fusion/model.hpp"
#include "refatom/harness/config.hpp"
#include "refatom/harness/dataset.hpp"

namespace refatom::harness {

/// A sample with features loaded and text/detections embedded.
struct PreparedSample {
  std::string id;
  retrieval::VisualTokenGrid grid;
  semantics::ReferenceBundle reference;
  std::vector<semantics::Detection> detections;
  Mat category_embeddings;
  fusion::Target target;
  std::array<double, 4> gt_bbox{};
  std::vector<int> gt_labels;  // multi-hot

  fusion::ModelInput input() const { return {grid, reference, detections, category_embeddings}; }
};

/// Throws ConfigError when the model config and dataset disagree on dims.
void check_compatible(const TrainConfig& config, const DatasetMeta& meta);

/// Uses the dataset's synthetic encoder and the built-in stop list.
std::vector<PreparedSample> prepare_samples(const Dataset& dataset);
std::vector<PreparedSample> prepare_samples(const Dataset& dataset, const semantics::TextEncoder& encoder,
                                            const semantics::StopSet& stop);

}  // namespace refatom::harness
