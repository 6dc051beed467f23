#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "refatom/fusion/model.hpp"

namespace refatom::harness {

struct TrainConfig {
  fusion::ModelConfig model;
  std::size_t frames = 8;
  double learning_rate = 1e-4;
  double lr_decay = 0.9;
  double warmup_ratio = 0.1;
  std::size_t batch = 8;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  std::size_t decay_interval = 0;  // steps between decays; 0 means one epoch
  double grad_clip = 1.0;          // max global gradient norm; 0 disables
  std::size_t threads = 1;

  /// Throws ConfigError on zero counts, out-of-range rates or an invalid model.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Compact JSON with sorted keys; stable for a given config.
std::string to_json(const TrainConfig& config);

/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace refatom::harness
