#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "refatom/core/grad_check.hpp"
#include "refatom/core/param_store.hpp"
#include "refatom/fusion/fusion.hpp"
#include "refatom/retrieval/retrieval.hpp"
#include "refatom/semantics/semantics.hpp"
#include "refatom/ssm/ssm.hpp"

namespace refatom::fusion {

enum BranchIndex : std::size_t { kTemporal = 0, kSpatial = 1 };
inline constexpr std::array<const char*, 2> kBranchNames{"temporal", "spatial"};

struct ModelConfig {
  Eigen::Index dim = 32;        // visual / text token width d
  Eigen::Index ssm_dim = 16;    // d_s after the scan input projection
  Eigen::Index attn_dim = 16;   // d_a
  Eigen::Index state_dim = 16;  // n
  Eigen::Index num_classes = 10;
  Eigen::Index num_prompts = 6;

  HierarchyMask hierarchies{true, true, true};  // holistic, keyword, scene
  std::array<bool, 2> branches{true, true};     // temporal, spatial

  double conf_threshold = 0.7;
  std::size_t max_detections = 10;
  double bbox_loss_weight = 1.0;
  bool aux_branch_losses = false;

  /// Throws ConfigError on non-positive sizes or when every hierarchy or
  /// every branch is switched off.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Registers every learnable tensor the config needs, in a fixed order.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

/// Everything the network consumes for one clip.
struct ModelInput {
  const retrieval::VisualTokenGrid& grid;
  const semantics::ReferenceBundle& reference;
  std::span<const semantics::Detection> detections;
  const Mat& category_embeddings;  // one encoder row per detection
};

struct Target {
  RowVec bbox;    // 4
  RowVec labels;  // N_c multi-hot
};

struct BranchOutput {
  RowVec z;
  Prediction prediction;
};

struct ModelOutput {
  Prediction prediction;  // fused
  std::array<std::optional<BranchOutput>, 2> branches;
  HierarchyMask active{false, false, false};  // hierarchies that contributed
  std::vector<std::size_t> selections;        // retrieval fingerprint
};

struct LossBreakdown {
  double total = 0.0;
  double bce = 0.0;
  double mse = 0.0;
};

struct StepResult {
  ModelOutput output;
  LossBreakdown loss;
};

ModelOutput forward(const ParamStore& params, const ModelConfig& config, const ModelInput& input);

/// Forward + loss; when `grads` is non-null, reverse-mode gradients of the
/// total loss are added into `grads` (same keys as `params`; may alias it).
StepResult forward_loss(const ParamStore& params, const ModelConfig& config, const ModelInput& input,
                        const Target& target, ParamStore* grads);

/// Objective over a fixed set of samples (mean loss), for grad_check.
struct LabeledInput {
  ModelInput input;
  Target target;
};
Objective make_objective(const ModelConfig& config, std::span<const LabeledInput> samples);

}  // namespace refatom::fusion
