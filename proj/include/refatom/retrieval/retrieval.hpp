#pragma once

#include <cstddef>
#include <optional>
#include <functional>
#include <vector>

#include "refatom/core/dense.hpp"

namespace refatom::retrieval {

/// Frames x cells x dim visual tokens, stored as (frames*cells) x dim with
/// frame-major rows.
class VisualTokenGrid {
 public:
  VisualTokenGrid() = default;
  VisualTokenGrid(std::size_t frames, std::size_t cells, Mat tokens, std::vector<int> frame_indices = {});

  std::size_t frames() const { return frames_; }
  std::size_t cells() const { return cells_; }
  std::size_t dim() const { return static_cast<std::size_t>(tokens_.cols()); }
  std::size_t token_count() const { return frames_ * cells_; }

  const Mat& tokens() const { return tokens_; }
  const std::vector<int>& frame_indices() const { return frame_indices_; }

  /// The N_S x d block for timestep `l`.
  auto frame(std::size_t l) const {
    return tokens_.middleRows(static_cast<Eigen::Index>(l * cells_), static_cast<Eigen::Index>(cells_));
  }
  auto token(std::size_t l, std::size_t s) const { return tokens_.row(static_cast<Eigen::Index>(l * cells_ + s)); }

 private:
  std::size_t frames_ = 0;
  std::size_t cells_ = 0;
  Mat tokens_;
  std::vector<int> frame_indices_;
};

struct NearestToken {
  std::size_t index = 0;
  double distance = 0.0;  // Euclidean
};

/// argmin over rows of ||query - row||; ties go to the lowest index.
NearestToken nearest_token(const Eigen::Ref<const Vec>& query, const Eigen::Ref<const Mat>& frame_tokens);

enum class Hierarchy { kKeyword, kSceneAttribute };

struct TrajectoryId {
  Hierarchy hierarchy = Hierarchy::kKeyword;
  std::size_t index = 0;
  bool operator==(const TrajectoryId&) const = default;
};

/// Nearest token per timestep for one semantic query.
struct Trajectory {
  TrajectoryId id;
  std::vector<std::size_t> cells;  // spatial index per timestep
  std::vector<double> distances;
  Mat tokens;                      // N_L x d, row l = selected token at timestep l
};

struct TrajectorySet {
  Hierarchy hierarchy = Hierarchy::kKeyword;
  std::vector<Trajectory> trajectories;

  bool empty() const { return trajectories.empty(); }
  std::size_t size() const { return trajectories.size(); }
};

/// Optional x W + b applied to the query before distances are taken.
struct QueryProjection {
  const Mat& weight;
  const Mat& bias;
};

Trajectory build_trajectory(const Eigen::Ref<const Vec>& query, const VisualTokenGrid& grid,
                            std::optional<QueryProjection> projection = std::nullopt, TrajectoryId id = {});

/// One trajectory per row of `queries`, in row order.
TrajectorySet build_trajectory_set(const Mat& queries, const VisualTokenGrid& grid, Hierarchy hierarchy);

}  // namespace refatom::retrieval
