#include "sif3d/heads.hpp"

#include <stdexcept>
#include <string>

namespace sif3d {

TrajectoryPlanner::TrajectoryPlanner(const nn::ParamScope& scope, const ModelConfig& config)
    : proj(scope.child("proj"), config.motion_dim, 9) {}

PlannedTrajectory TrajectoryPlanner::operator()(const nn::Var& f_tia) const {
  const nn::Var raw = proj(f_tia);
  return {nn::slice_cols(raw, 0, 3), nn::rotation_from_6d(nn::slice_cols(raw, 3, 6))};
}

PosePredictor::PosePredictor(const nn::ParamScope& scope, const ModelConfig& config)
    : proj(scope.child("proj"), config.motion_dim, kPoseEmbeddingDim) {}

nn::Var reconstruct_joints(const nn::Var& translation, const nn::Var& rotation, const nn::Var& pose,
                           const BodyModel& model) {
  if (pose.cols() != kPoseEmbeddingDim || pose.rows() != translation.rows())
    throw std::invalid_argument("reconstruct_joints: pose embeddings must be L x 32");
  const nn::Matrix blend_t = model.blend.transpose();
  const nn::Matrix rest = Eigen::Map<const nn::Matrix>(model.rest.data(), 1, 3 * kNumJoints);
  const nn::Var local = nn::affine(pose, nn::Var::constant(blend_t), nn::Var::constant(rest));
  return nn::rigid_transform_points(translation, rotation, local);
}

nn::Matrix skeleton_adjacency() {
  nn::Matrix a = nn::Matrix::Identity(kNumJoints, kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) {
    const int p = kJointParents[static_cast<std::size_t>(j)];
    if (p >= 0) a(j, p) = a(p, j) = 1.0;
  }
  return a;
}

MotionDecoder::MotionDecoder(const nn::ParamScope& scope, const ModelConfig& config) {
  residual_adjacency = scope.constant("residual_adjacency", kNumJoints, kNumJoints, 0.0);
  int in = 3;
  for (int i = 0; i < config.gcn_layers; ++i) {
    const bool last = i + 1 == config.gcn_layers;
    const int out = last ? 3 : config.gcn_width;
    layers.emplace_back(scope.child("gc" + std::to_string(i)), in, out, last ? nn::Init::Zero : nn::Init::Glorot);
    in = out;
  }
}

nn::Var MotionDecoder::adjacency() const {
  const nn::Var sym = nn::scale(residual_adjacency + nn::transpose(residual_adjacency), 0.5);
  return nn::normalize_rows_l1(nn::Var::constant(skeleton_adjacency()) + sym);
}

nn::Var MotionDecoder::operator()(const nn::Var& joints) const {
  if (joints.cols() != 3 * kNumJoints) throw std::invalid_argument("decode_motion: expected L x 69 joints");
  const Eigen::Index frames = joints.rows();
  const nn::Matrix centering =
      nn::Matrix::Identity(kNumJoints, kNumJoints) - nn::Matrix::Constant(kNumJoints, kNumJoints, 1.0 / kNumJoints);
  const nn::Var nodes = nn::reshape(joints, frames * kNumJoints, 3);
  nn::Var h = nn::block_matmul(nn::Var::constant(centering), nodes);
  const nn::Var adj = adjacency();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](nn::block_matmul(adj, h));
    if (i + 1 < layers.size()) h = nn::gelu(h);
  }
  return joints + nn::reshape(h, frames, 3 * kNumJoints);
}

}  // namespace sif3d
