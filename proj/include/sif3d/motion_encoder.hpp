#pragma once

#include "sif3d/core.hpp"
#include "sif3d/model_config.hpp"
#include "sif3d/nn/layers.hpp"
#include "sif3d/scene_encoder.hpp"

#include <vector>

namespace sif3d {

/// Rows of [translation, 6D rotation, pose embedding], one per frame.
nn::Matrix motion_features(const MotionSequenced& sequence);

class MotionEncoder {
 public:
  MotionEncoder() = default;
  MotionEncoder(const nn::ParamScope& scope, const ModelConfig& config);

  /// f_m for a padded sequence: (T+dT) x c_m.
  nn::Var operator()(const MotionSequenced& padded) const;
  nn::Var encode(const nn::Matrix& frame_features) const;

 private:
  nn::Linear lift_;
  std::vector<nn::EncoderLayer> layers_;
  bool positional_ = true;
};

/// Nearest scene point to a gaze point; ties go to the lowest index.
Eigen::Index gaze_to_scene_index(const Eigen::Vector3d& gaze, const PointMatrixd& scene);

/// Pre-encoder gaze track: row k holds the features of the scene point the
/// k-th gaze sample snaps to, followed by the raw gaze coordinates. The last
/// observed row is repeated `future_frames` times.
nn::Var gaze_track(const GazeSequenced& gaze, const nn::Var& per_point, const PointMatrixd& scene, int future_frames);

class GazeEncoder {
 public:
  GazeEncoder() = default;
  GazeEncoder(const nn::ParamScope& scope, const ModelConfig& config);

  nn::Var operator()(const nn::Var& track) const;

 private:
  nn::Linear lift_;
  nn::EncoderLayer layer_;
  bool positional_ = true;
};

/// f_gaze: (T+dT) x c_m. Gaze length must match the observed horizon.
nn::Var encode_gaze(const GazeSequenced& gaze, const SceneFeatures& features, const ScenePointCloudd& scene,
                    const HorizonConfig& horizon, const GazeEncoder& encoder);

}  // namespace sif3d
