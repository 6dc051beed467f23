#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "refatom/harness/dataset.hpp"

namespace refatom::harness {

struct FixtureConfig {
  std::size_t num_samples = 32;
  std::size_t frames = 8;
  std::size_t grid_rows = 4;
  std::size_t grid_cols = 4;
  std::size_t dim = 32;
  std::size_t num_classes = 10;
  std::uint64_t encoder_seed = 1;

  double target_noise = 0.05;     // sigma on the planted token
  double background_norm = 2.0;   // expected norm of clutter tokens
  double position_scale = 1.5;    // per-cell location code
  double context_scale = 1.0;     // target location code added to every token
  double signature_scale = 1.0;   // per-class vector added to every token
  double object_scale = 0.5;      // category embedding added at each detection's cell
  double track_strength = 1.0;    // blend of the target token into (l, s*) for l != l*
  std::size_t max_labels = 3;
  std::size_t max_distractors = 3;

  void validate() const;
};

struct PlantedTarget {
  std::size_t frame = 0;
  std::size_t cell = 0;
};

struct FixtureSet {
  DatasetMeta meta;
  std::vector<SampleRecord> records;
  std::vector<PlantedTarget> targets;
};

/// Writes dataset.json, annotations.jsonl and features/<id>.rten under
/// `out_dir`. A pure function of (config, seed) down to the bytes.
FixtureSet generate_fixtures(const FixtureConfig& config, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace refatom::harness
