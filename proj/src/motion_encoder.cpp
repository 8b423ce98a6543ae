#include "sif3d/motion_encoder.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace sif3d {

nn::Matrix motion_features(const MotionSequenced& sequence) {
  if (sequence.empty()) throw std::invalid_argument("motion sequence is empty");
  nn::Matrix out(static_cast<Eigen::Index>(sequence.size()), kFrameFeatureDim);
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    const auto& f = sequence.frames[k];
    if (!f.translation.allFinite() || !f.pose_embedding.allFinite())
      throw std::invalid_argument("motion frame " + std::to_string(k) + " has non-finite values");
    const auto row = static_cast<Eigen::Index>(k);
    out.block<1, 3>(row, 0) = f.translation.transpose();
    out.block<1, 6>(row, 3) = rotation_encode(f.orientation).transpose();
    out.block<1, kPoseEmbeddingDim>(row, 9) = f.pose_embedding.transpose();
  }
  return out;
}

MotionEncoder::MotionEncoder(const nn::ParamScope& scope, const ModelConfig& config)
    : lift_(scope.child("lift"), kFrameFeatureDim, config.motion_dim), positional_(config.positional_encoding) {
  const auto init = config.zero_init_residual ? nn::Init::Zero : nn::Init::Glorot;
  for (int i = 0; i < config.motion_layers; ++i)
    layers_.emplace_back(scope.child("layer" + std::to_string(i)), config.motion_dim, config.heads, config.ffn_dim,
                         init);
}

nn::Var MotionEncoder::operator()(const MotionSequenced& padded) const { return encode(motion_features(padded)); }

nn::Var MotionEncoder::encode(const nn::Matrix& frame_features) const {
  if (frame_features.cols() != lift_.in_features())
    throw std::invalid_argument("motion encoder expects " + std::to_string(lift_.in_features()) +
                                " values per frame");
  nn::Var x = lift_(nn::Var::constant(frame_features));
  if (positional_) x = x + nn::Var::constant(nn::sinusoidal_encoding(x.rows(), x.cols()));
  for (const auto& layer : layers_) x = layer(x);
  return x;
}

Eigen::Index gaze_to_scene_index(const Eigen::Vector3d& gaze, const PointMatrixd& scene) {
  if (!gaze.allFinite()) throw std::invalid_argument("gaze point is not finite");
  if (scene.rows() == 0) throw std::invalid_argument("scene is empty");
  Eigen::Index best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scene.rows(); ++i) {
    const double d2 = (scene.row(i).transpose() - gaze).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

nn::Var gaze_track(const GazeSequenced& gaze, const nn::Var& per_point, const PointMatrixd& scene, int future_frames) {
  if (gaze.size() == 0) throw std::invalid_argument("gaze sequence is empty");
  if (future_frames < 0) throw std::invalid_argument("negative future frame count");
  if (per_point.rows() != scene.rows()) throw std::invalid_argument("scene features do not match the cloud");
  nn::IndexList rows;
  nn::Matrix coords(gaze.size() + future_frames, 3);
  for (Eigen::Index k = 0; k < gaze.size(); ++k) {
    rows.push_back(gaze_to_scene_index(gaze.points.row(k).transpose(), scene));
    coords.row(k) = gaze.points.row(k);
  }
  for (int k = 0; k < future_frames; ++k) {
    rows.push_back(rows[static_cast<std::size_t>(gaze.size() - 1)]);
    coords.row(gaze.size() + k) = gaze.points.row(gaze.size() - 1);
  }
  return nn::concat_cols({nn::gather_rows(per_point, rows), nn::Var::constant(coords)});
}

GazeEncoder::GazeEncoder(const nn::ParamScope& scope, const ModelConfig& config)
    : lift_(scope.child("lift"), config.scene_dim + 3, config.motion_dim),
      layer_(scope.child("layer"), config.motion_dim, config.heads, config.ffn_dim,
             config.zero_init_residual ? nn::Init::Zero : nn::Init::Glorot),
      positional_(config.positional_encoding) {}

nn::Var GazeEncoder::operator()(const nn::Var& track) const {
  if (track.cols() != lift_.in_features()) throw std::invalid_argument("gaze track width mismatch");
  nn::Var x = lift_(track);
  if (positional_) x = x + nn::Var::constant(nn::sinusoidal_encoding(x.rows(), x.cols()));
  return layer_(x);
}

nn::Var encode_gaze(const GazeSequenced& gaze, const SceneFeatures& features, const ScenePointCloudd& scene,
                    const HorizonConfig& horizon, const GazeEncoder& encoder) {
  if (gaze.size() != horizon.observed_frames)
    throw std::invalid_argument("gaze length " + std::to_string(gaze.size()) + " does not match the observed horizon " +
                                std::to_string(horizon.observed_frames));
  return encoder(gaze_track(gaze, features.per_point, scene.points, horizon.future_frames));
}

}  // namespace sif3d
