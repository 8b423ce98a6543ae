#pragma once

#include "sif3d/core.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

namespace sif3d {

/// Joint order of the simplified skeleton. Matches the first 23 body joints of
/// the usual parametric-body convention (pelvis first, jaw last).
inline constexpr std::array<const char*, kNumJoints> kJointNames = {
    "pelvis",         "left_hip",      "right_hip",  "spine1",     "left_knee",     "right_knee",
    "spine2",         "left_ankle",    "right_ankle", "spine3",    "left_foot",     "right_foot",
    "neck",           "left_collar",   "right_collar", "head",     "left_shoulder", "right_shoulder",
    "left_elbow",     "right_elbow",   "left_wrist", "right_wrist", "jaw"};

/// Kinematic-tree parent of each joint; -1 for the root.
inline constexpr std::array<int, kNumJoints> kJointParents = {
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 15};

inline constexpr int kHeadJoint = 15;

/// Fixed linear skeleton: joints = t + R * (rest + blend * p).
///
/// `rest` holds the canonical skeleton in the body frame (x forward, y left,
/// z up, origin on the floor under the pelvis). `blend` maps the 32-dim pose
/// embedding to per-joint offsets; row 3*j + a is coordinate a of joint j.
struct BodyModel {
  static constexpr int kFormatVersion = 1;

  std::uint64_t seed = 0;
  JointSet<double> rest = JointSet<double>::Zero();
  Eigen::Matrix<double, 3 * kNumJoints, kPoseEmbeddingDim, Eigen::RowMajor> blend =
      Eigen::Matrix<double, 3 * kNumJoints, kPoseEmbeddingDim, Eigen::RowMajor>::Zero();

  /// Deterministic construction from a seed.
  static BodyModel generate(std::uint64_t seed);

  /// The model committed under data/body_model.json (compiled in).
  static const BodyModel& standard();

  static BodyModel from_json(const std::string& text);
  std::string to_json() const;

  static BodyModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Body-frame joint positions (rest + blend * p), flattened joint-major.
  Eigen::Matrix<double, 3 * kNumJoints, 1> local_joints(const PoseEmbedding<double>& p) const {
    Eigen::Matrix<double, 3 * kNumJoints, 1> flat = blend * p;
    for (int j = 0; j < kNumJoints; ++j) flat.segment<3>(3 * j) += rest.row(j).transpose();
    return flat;
  }
};

/// Joint positions of a posed body.
template <typename Scalar>
JointSet<Scalar> body_joints(const PoseState<Scalar>& pose, const BodyModel& model = BodyModel::standard()) {
  require_unit(pose.orientation, "body_joints");
  const Matrix3<Scalar> rot = pose.orientation.normalized().toRotationMatrix();
  const Eigen::Matrix<Scalar, 3 * kNumJoints, 1> local =
      model.blend.template cast<Scalar>() * pose.pose_embedding;
  JointSet<Scalar> joints;
  for (int j = 0; j < kNumJoints; ++j) {
    const Vector3<Scalar> body = model.rest.row(j).transpose().template cast<Scalar>() +
                                 local.template segment<3>(3 * j);
    joints.row(j) = (pose.translation + rot * body).transpose();
  }
  return joints;
}

}  // namespace sif3d
