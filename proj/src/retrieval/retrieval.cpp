#include "refatom/retrieval/retrieval.hpp"

#include <cmath>
#include <limits>

#include "refatom/core/ops.hpp"

namespace refatom::retrieval {

VisualTokenGrid::VisualTokenGrid(std::size_t frames, std::size_t cells, Mat tokens, std::vector<int> frame_indices)
    : frames_(frames), cells_(cells), tokens_(std::move(tokens)), frame_indices_(std::move(frame_indices)) {
  if (frames_ < 1 || cells_ < 1) throw DimensionError("VisualTokenGrid: need at least one frame and one cell");
  if (static_cast<std::size_t>(tokens_.rows()) != frames_ * cells_) {
    throw DimensionError("VisualTokenGrid: token rows " + std::to_string(tokens_.rows()) + " != frames*cells " +
                         std::to_string(frames_ * cells_));
  }
  if (!tokens_.allFinite()) throw DomainError("VisualTokenGrid: non-finite token");
  if (frame_indices_.empty()) {
    for (std::size_t l = 0; l < frames_; ++l) frame_indices_.push_back(static_cast<int>(l));
  } else if (frame_indices_.size() != frames_) {
    throw DimensionError("VisualTokenGrid: frame index count does not match frame count");
  }
}

NearestToken nearest_token(const Eigen::Ref<const Vec>& query, const Eigen::Ref<const Mat>& frame_tokens) {
  if (frame_tokens.rows() == 0) throw DimensionError("nearest_token: no candidate tokens");
  if (query.size() != frame_tokens.cols()) throw_shape_mismatch("nearest_token(query, tokens)", query, frame_tokens);
  NearestToken best{0, std::numeric_limits<double>::infinity()};
  double best_sq = std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < frame_tokens.rows(); ++s) {
    const double sq = (frame_tokens.row(s).transpose() - query).squaredNorm();
    if (sq < best_sq) {
      best_sq = sq;
      best.index = static_cast<std::size_t>(s);
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

Trajectory build_trajectory(const Eigen::Ref<const Vec>& query, const VisualTokenGrid& grid,
                            std::optional<QueryProjection> projection, TrajectoryId id) {
  Vec q = query;
  if (projection) {
    Mat y = linear(query.transpose(), projection->weight, projection->bias);
    q = y.row(0).transpose();
  }
  if (static_cast<std::size_t>(q.size()) != grid.dim()) {
    throw DimensionError("build_trajectory: query dim " + std::to_string(q.size()) + " != grid dim " +
                         std::to_string(grid.dim()));
  }
  Trajectory t;
  t.id = id;
  t.tokens.resize(static_cast<Eigen::Index>(grid.frames()), static_cast<Eigen::Index>(grid.dim()));
  for (std::size_t l = 0; l < grid.frames(); ++l) {
    const NearestToken hit = nearest_token(q, grid.frame(l));
    t.cells.push_back(hit.index);
    t.distances.push_back(hit.distance);
    t.tokens.row(static_cast<Eigen::Index>(l)) = grid.token(l, hit.index);
  }
  return t;
}

TrajectorySet build_trajectory_set(const Mat& queries, const VisualTokenGrid& grid, Hierarchy hierarchy) {
  TrajectorySet set;
  set.hierarchy = hierarchy;
  for (Eigen::Index k = 0; k < queries.rows(); ++k) {
    set.trajectories.push_back(
        build_trajectory(queries.row(k).transpose(), grid, std::nullopt, {hierarchy, static_cast<std::size_t>(k)}));
  }
  return set;
}

}  // namespace refatom::retrieval
