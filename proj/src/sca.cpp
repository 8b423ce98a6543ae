#include "sif3d/sca.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sif3d {

RelativeScene relative_normalize(const ScenePointCloudd& scene, const PointMatrixd& translation,
                                 const std::vector<Eigen::Quaterniond>& orientation) {
  if (translation.rows() != static_cast<Eigen::Index>(orientation.size()))
    throw std::invalid_argument("relative_normalize: trajectory translation and orientation lengths differ");
  RelativeScene out;
  out.positions.reserve(orientation.size());
  for (std::size_t k = 0; k < orientation.size(); ++k) {
    require_unit(orientation[k], "relative_normalize");
    const Eigen::Matrix3d rot = orientation[k].normalized().toRotationMatrix();
    const Eigen::RowVector3d t = translation.row(static_cast<Eigen::Index>(k));
    out.positions.push_back((scene.points.rowwise() - t) * rot);
  }
  return out;
}

SpatialBias::SpatialBias(const nn::ParamScope& scope, int hidden) : mlp(scope, 3, hidden, 1, nn::Init::Zero) {}

nn::Var SpatialBias::operator()(const nn::Var& relative, Eigen::Index frames, Eigen::Index points) const {
  if (relative.rows() != frames * points || relative.cols() != 3)
    throw std::invalid_argument("spatial_bias: expected (frames*points) x 3 relative positions");
  return nn::reshape(mlp(relative), frames, points);
}

ScaBlock::ScaBlock(const nn::ParamScope& scope, const ModelConfig& config)
    : pose_encoder(scope.child("pose_encoder"), config.motion_dim, config.heads, config.ffn_dim),
      query(scope.child("query"), config.motion_dim, config.attention_dim),
      key(scope.child("key"), config.scene_dim, config.attention_dim),
      value(scope.child("value"), config.scene_dim, config.motion_dim),
      bias(scope.child("spatial_bias"), config.mlp_hidden),
      norm(scope.child("norm"), 2 * config.motion_dim),
      mlp(scope.child("mlp"), 2 * config.motion_dim, config.mlp_hidden, config.motion_dim,
          config.zero_init_residual ? nn::Init::Zero : nn::Init::Glorot),
      scale(1.0 / std::sqrt(static_cast<double>(config.attention_dim))) {}

nn::Var ScaBlock::operator()(const nn::Var& f_in, const SceneContext& scene, const nn::Var& relative,
                             LocalSalience* salience_out) const {
  const Eigen::Index frames = f_in.rows();
  const Eigen::Index n = scene.features.per_point.rows();
  const nn::Var f_pose = pose_encoder(f_in);
  const nn::Var& feats = scene.features.per_point;
  const nn::Var weights = nn::softmax_rows(nn::scale(nn::matmul_nt(query(f_pose), key(feats)), scale));
  const nn::Var spatial = scene.active ? bias(relative, frames, n) : nn::Var::zeros(frames, n);
  const nn::Var f_sm = nn::matmul(weights + spatial, value(feats));
  if (salience_out) *salience_out = {weights, spatial};
  return f_in + mlp(norm(nn::concat_cols({f_pose, f_sm})));
}

ScaStack::ScaStack(const nn::ParamScope& scope, const ModelConfig& config) {
  for (int i = 0; i < config.sca_blocks; ++i) blocks_.emplace_back(scope.child("block" + std::to_string(i)), config);
}

ScaOutput ScaStack::operator()(const nn::Var& f_in, const SceneContext& scene, const nn::Var& translation,
                               const nn::Var& rotation) const {
  ScaOutput out;
  out.values = f_in;
  if (blocks_.empty()) return out;
  const nn::Var relative = nn::relative_positions(scene.points, translation, rotation);
  for (const auto& block : blocks_) {
    LocalSalience s;
    out.values = block(out.values, scene, relative, &s);
    out.salience.push_back(s);
  }
  return out;
}

}  // namespace sif3d
