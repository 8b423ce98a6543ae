#include "sif3d/model.hpp"

#include <stdexcept>
#include <string>

namespace sif3d {

PreparedScene prepare_scene(const ScenePointCloudd& cloud, const ModelConfig& config) {
  cloud.validate();
  PreparedScene out;
  out.cloud = cloud;
  if (config.use_scene && config.use_pointnet) {
    out.geometry = SceneGeometry::build(cloud.points, config.scene, config.context_points);
    out.context = out.geometry->context;
    out.context_points = out.geometry->context_points;
  } else {
    out.context = context_indices(cloud.points, config.context_points);
    out.context_points.resize(static_cast<Eigen::Index>(out.context.size()), 3);
    for (std::size_t i = 0; i < out.context.size(); ++i)
      out.context_points.row(static_cast<Eigen::Index>(i)) = cloud.points.row(out.context[i]);
  }
  return out;
}

std::vector<Eigen::Quaterniond> rotations_to_quaternions(const nn::Matrix& rows) {
  if (rows.cols() != 9) throw std::invalid_argument("rotation rows must have 9 entries");
  std::vector<Eigen::Quaterniond> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> r(rows.row(k).data());
    out.push_back(canonical_quaternion(Eigen::Quaterniond(Eigen::Matrix3d(r))));
  }
  return out;
}

std::vector<JointSetd> rows_to_joints(const nn::Matrix& rows) {
  if (rows.cols() != 3 * kNumJoints) throw std::invalid_argument("joint rows must have 69 entries");
  std::vector<JointSetd> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index k = 0; k < rows.rows(); ++k) out.emplace_back(Eigen::Map<const JointSetd>(rows.row(k).data()));
  return out;
}

std::vector<JointSetd> PredictionBundle::future_decoded() const {
  return {decoded.begin() + observed_frames, decoded.end()};
}

PredictionBundle PredictionBundle::from_pass(const ForwardPass& pass) {
  PredictionBundle b;
  b.observed_frames = pass.observed_frames;
  b.traj_translation = pass.trajectory.translation.value();
  b.traj_orientation = rotations_to_quaternions(pass.trajectory.rotation.value());
  b.pose_embeddings = pass.pose.value();
  b.joints = rows_to_joints(pass.joints.value());
  b.decoded = rows_to_joints(pass.decoded.value());
  b.scene_points = pass.scene.points;
  for (const auto& s : pass.tia.salience) b.global_salience.push_back(s.value().row(0));
  for (const auto& s : pass.sca.salience) {
    b.local_salience.push_back(s.weights.value());
    b.spatial_bias.push_back(s.spatial_bias.value());
  }
  return b;
}

Generator::Generator(const ModelConfig& config, std::uint64_t seed) : config_(config), params_(seed) {
  config_.validate();
  const nn::ParamScope root(params_, "");
  pointnet_ = PointNetEncoder(root.child("scene"), config_.scene);
  pointwise_ = PointwiseEncoder(root.child("scene_pointwise"), config_.scene_dim);
  motion_ = MotionEncoder(root.child("motion"), config_);
  gaze_ = GazeEncoder(root.child("gaze"), config_);
  tia_ = TiaStack(root.child("tia"), config_);
  planner_ = TrajectoryPlanner(root.child("planner"), config_);
  sca_ = ScaStack(root.child("sca"), config_);
  pose_ = PosePredictor(root.child("pose"), config_);
  decoder_ = MotionDecoder(root.child("decoder"), config_);
}

SceneFeatures Generator::encode_scene(const PreparedScene& scene) const {
  if (config_.use_pointnet) {
    if (!scene.geometry) return pointnet_(SceneGeometry::build(scene.cloud.points, config_.scene, config_.context_points));
    return pointnet_(*scene.geometry);
  }
  return pointwise_(scene.cloud.points, scene.context);
}

ForwardPass Generator::forward(const MotionSequenced& observed, const GazeSequenced& gaze, const PreparedScene& scene,
                               int future_frames) const {
  if (future_frames < 1) throw std::invalid_argument("forward: need at least one future frame");
  if (gaze.size() != static_cast<Eigen::Index>(observed.size()))
    throw std::invalid_argument("forward: gaze length " + std::to_string(gaze.size()) +
                                " differs from the observed length " + std::to_string(observed.size()));
  ForwardPass pass;
  pass.observed_frames = static_cast<int>(observed.size());
  const MotionSequenced padded = pad_virtual_sequence(observed, future_frames);
  const Eigen::Index frames = static_cast<Eigen::Index>(padded.size());

  pass.scene = config_.use_scene ? SceneContext::make(encode_scene(scene), scene.context_points)
                                 : SceneContext::disabled(scene.context_points, config_.scene_dim);
  pass.motion = motion_(padded);
  pass.gaze = config_.use_gaze
                  ? gaze_(gaze_track(gaze, pass.scene.features.per_point, scene.context_points, future_frames))
                  : nn::Var::zeros(frames, config_.motion_dim);

  if (config_.use_tia) {
    pass.tia = tia_(pass.motion, pass.scene, pass.gaze);
  } else {
    pass.tia.values = pass.motion;
  }
  pass.trajectory = planner_(pass.tia.values);

  if (config_.use_sca) {
    pass.sca = sca_(pass.motion, pass.scene, pass.trajectory.translation, pass.trajectory.rotation);
  } else {
    pass.sca.values = pass.motion;
  }
  pass.pose = pose_(pass.sca.values);
  pass.joints = reconstruct_joints(pass.trajectory.translation, pass.trajectory.rotation, pass.pose);
  pass.decoded = config_.use_decoder ? decoder_(pass.joints) : pass.joints;
  return pass;
}

PredictionBundle Generator::predict(const MotionSequenced& observed, const GazeSequenced& gaze,
                                    const PreparedScene& scene, int future_frames) const {
  return PredictionBundle::from_pass(forward(observed, gaze, scene, future_frames));
}

Critic::Critic(const ModelConfig& config, std::uint64_t seed) : params_(seed) {
  net_ = Discriminator(nn::ParamScope(params_, "disc"), config);
}

}  // namespace sif3d
