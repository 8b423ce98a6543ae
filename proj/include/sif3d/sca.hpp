#pragma once

#include "sif3d/core.hpp"
#include "sif3d/model_config.hpp"
#include "sif3d/nn/layers.hpp"
#include "sif3d/scene_encoder.hpp"

#include <vector>

namespace sif3d {

/// Scene points expressed in the body frame of each trajectory pose.
struct RelativeScene {
  std::vector<PointMatrixd> positions;  // one n x 3 block per frame
};

/// positions[k].row(i) = R_k^T (S_i - t_k). Orientations must be unit.
RelativeScene relative_normalize(const ScenePointCloudd& scene, const PointMatrixd& translation,
                                 const std::vector<Eigen::Quaterniond>& orientation);

/// Rows of [s_l + s_spatial]: per-frame softmax weights and the additive bias.
struct LocalSalience {
  nn::Var weights;       // L x n, rows sum to one
  nn::Var spatial_bias;  // L x n
};

/// Two-layer MLP from a body-frame position to a scalar bias.
struct SpatialBias {
  nn::Mlp mlp;

  SpatialBias() = default;
  SpatialBias(const nn::ParamScope& scope, int hidden);

  /// `relative` is (L*n) x 3 with frame-major rows; returns L x n.
  nn::Var operator()(const nn::Var& relative, Eigen::Index frames, Eigen::Index points) const;
};

class ScaBlock {
 public:
  ScaBlock() = default;
  ScaBlock(const nn::ParamScope& scope, const ModelConfig& config);

  /// `relative` comes from nn::relative_positions on the planned trajectory.
  nn::Var operator()(const nn::Var& f_in, const SceneContext& scene, const nn::Var& relative,
                     LocalSalience* salience_out = nullptr) const;

  nn::EncoderLayer pose_encoder;
  nn::Linear query;  // c_m -> c
  nn::Linear key;    // c_s -> c
  nn::Linear value;  // c_s -> c_m
  SpatialBias bias;
  nn::LayerNorm norm;
  nn::Mlp mlp;
  double scale = 1.0;
};

struct ScaOutput {
  nn::Var values;
  std::vector<LocalSalience> salience;
};

class ScaStack {
 public:
  ScaStack() = default;
  ScaStack(const nn::ParamScope& scope, const ModelConfig& config);

  ScaOutput operator()(const nn::Var& f_in, const SceneContext& scene, const nn::Var& translation,
                       const nn::Var& rotation) const;
  std::vector<ScaBlock>& blocks() { return blocks_; }

 private:
  std::vector<ScaBlock> blocks_;
};

}  // namespace sif3d
