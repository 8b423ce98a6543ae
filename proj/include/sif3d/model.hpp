#pragma once

#include "sif3d/adversary.hpp"
#include "sif3d/core.hpp"
#include "sif3d/heads.hpp"
#include "sif3d/model_config.hpp"
#include "sif3d/motion_encoder.hpp"
#include "sif3d/nn/layers.hpp"
#include "sif3d/sca.hpp"
#include "sif3d/scene_encoder.hpp"
#include "sif3d/tia.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace sif3d {

/// A cloud with its cached sampling and grouping.
struct PreparedScene {
  ScenePointCloudd cloud;
  /// Points seen by the attention blocks and the gaze snapping.
  nn::IndexList context;
  PointMatrixd context_points;
  std::optional<SceneGeometry> geometry;
};

PreparedScene prepare_scene(const ScenePointCloudd& cloud, const ModelConfig& config);

/// Graph values of one generator pass, kept for the losses.
struct ForwardPass {
  SceneContext scene;
  nn::Var motion;
  nn::Var gaze;
  TiaOutput tia;
  PlannedTrajectory trajectory;
  ScaOutput sca;
  nn::Var pose;
  nn::Var joints;
  nn::Var decoded;
  int observed_frames = 0;
};

/// Plain-value prediction over the padded horizon (T + dT frames).
struct PredictionBundle {
  int observed_frames = 0;
  PointMatrixd traj_translation;
  std::vector<Eigen::Quaterniond> traj_orientation;
  nn::Matrix pose_embeddings;
  std::vector<JointSetd> joints;
  std::vector<JointSetd> decoded;
  std::vector<nn::RowVector> global_salience;  // one per TIA block
  std::vector<nn::Matrix> local_salience;      // one L x n map per SCA block
  std::vector<nn::Matrix> spatial_bias;
  /// Points indexed by the salience columns.
  PointMatrixd scene_points;

  int frames() const { return static_cast<int>(traj_translation.rows()); }
  int future_frames() const { return frames() - observed_frames; }
  /// Decoded joints of the predicted frames T+1..T+dT.
  std::vector<JointSetd> future_decoded() const;

  static PredictionBundle from_pass(const ForwardPass& pass);
};

class Generator {
 public:
  Generator(const ModelConfig& config, std::uint64_t seed);

  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  SceneFeatures encode_scene(const PreparedScene& scene) const;
  ForwardPass forward(const MotionSequenced& observed, const GazeSequenced& gaze, const PreparedScene& scene,
                      int future_frames) const;
  PredictionBundle predict(const MotionSequenced& observed, const GazeSequenced& gaze, const PreparedScene& scene,
                           int future_frames) const;

  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const ModelConfig& config() const { return config_; }

  const PointNetEncoder& pointnet() const { return pointnet_; }
  const MotionEncoder& motion_encoder() const { return motion_; }
  const GazeEncoder& gaze_encoder() const { return gaze_; }
  TiaStack& tia() { return tia_; }
  ScaStack& sca() { return sca_; }
  const TrajectoryPlanner& planner() const { return planner_; }
  const PosePredictor& pose_predictor() const { return pose_; }
  const MotionDecoder& decoder() const { return decoder_; }

 private:
  ModelConfig config_;
  nn::ParameterSet params_;
  PointNetEncoder pointnet_;
  PointwiseEncoder pointwise_;
  MotionEncoder motion_;
  GazeEncoder gaze_;
  TiaStack tia_;
  TrajectoryPlanner planner_;
  ScaStack sca_;
  PosePredictor pose_;
  MotionDecoder decoder_;
};

/// Discriminator with its own parameter set.
class Critic {
 public:
  Critic(const ModelConfig& config, std::uint64_t seed);

  Critic(const Critic&) = delete;
  Critic& operator=(const Critic&) = delete;

  nn::Var operator()(const nn::Var& joints, const nn::Var& scene_global) const { return net_(joints, scene_global); }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

 private:
  nn::ParameterSet params_;
  Discriminator net_;
};

/// Rotation matrices stored as L x 9 rows to canonical quaternions.
std::vector<Eigen::Quaterniond> rotations_to_quaternions(const nn::Matrix& rows);
/// L x 69 joint rows to joint sets.
std::vector<JointSetd> rows_to_joints(const nn::Matrix& rows);

}  // namespace sif3d
