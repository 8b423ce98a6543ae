#pragma once

#include "sif3d/body_model.hpp"
#include "sif3d/model_config.hpp"
#include "sif3d/nn/layers.hpp"

#include <vector>

namespace sif3d {

/// Planned trajectory as graph values: translation (L x 3) and row-major
/// rotation matrices (L x 9).
struct PlannedTrajectory {
  nn::Var translation;
  nn::Var rotation;
};

class TrajectoryPlanner {
 public:
  TrajectoryPlanner() = default;
  TrajectoryPlanner(const nn::ParamScope& scope, const ModelConfig& config);

  /// Linear map to 3 + 6 values per frame; the 6D part is orthonormalized,
  /// with a fallback frame for degenerate rows.
  PlannedTrajectory operator()(const nn::Var& f_tia) const;

  nn::Linear proj;
};

class PosePredictor {
 public:
  PosePredictor() = default;
  PosePredictor(const nn::ParamScope& scope, const ModelConfig& config);

  nn::Var operator()(const nn::Var& f_sca) const { return proj(f_sca); }

  nn::Linear proj;
};

/// Framewise body model on graph values: L x 69 joint coordinates.
nn::Var reconstruct_joints(const nn::Var& translation, const nn::Var& rotation, const nn::Var& pose,
                           const BodyModel& model = BodyModel::standard());

/// Kinematic tree plus self-loops, symmetric 0/1 entries.
nn::Matrix skeleton_adjacency();

/// Graph-convolution refinement over the skeleton: returns joints + offsets.
class MotionDecoder {
 public:
  MotionDecoder() = default;
  MotionDecoder(const nn::ParamScope& scope, const ModelConfig& config);

  /// `joints` is L x 69.
  nn::Var operator()(const nn::Var& joints) const;
  /// Row-normalized adjacency including the symmetrized learned residual.
  nn::Var adjacency() const;

  nn::Var residual_adjacency;
  std::vector<nn::Linear> layers;
};

}  // namespace sif3d
