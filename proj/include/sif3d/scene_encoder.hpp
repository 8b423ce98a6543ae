#pragma once

#include "sif3d/core.hpp"
#include "sif3d/model_config.hpp"
#include "sif3d/nn/layers.hpp"

#include <vector>

namespace sif3d {

using IndexMatrix = Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-point features (n x c_s) and the pooled global embedding (1 x c_s).
struct SceneFeatures {
  nn::Var per_point;
  nn::Var global_embedding;

  Eigen::Index dim() const { return per_point.cols(); }
};

/// Scene inputs seen by the attention blocks. `point_rows` concatenates the
/// per-point features with the raw coordinates; with the scene modality off
/// every feature is zero and `active` is false.
struct SceneContext {
  SceneFeatures features;
  nn::Var point_rows;
  PointMatrixd points;
  bool active = true;

  static SceneContext make(const SceneFeatures& features, const PointMatrixd& points);
  static SceneContext disabled(const PointMatrixd& points, Eigen::Index dim);
};

/// Farthest point sampling. Starts at the point farthest from the centroid;
/// ties go to the lexicographically smallest coordinates, then the lowest index.
std::vector<Eigen::Index> farthest_point_sample(const PointMatrixd& points, Eigen::Index m);

/// Up to k in-radius neighbors per center, nearest first (ties by index).
/// Short rows repeat the nearest in-radius index; empty balls use the
/// globally nearest point.
IndexMatrix ball_query(const PointMatrixd& centers, const PointMatrixd& points, double radius, Eigen::Index k);

/// Sampling, grouping and interpolation for one cloud. Depends only on the
/// coordinates and the hierarchy, so it is computed once per scene.
struct SceneGeometry {
  struct Abstraction {
    PointMatrixd centers;
    nn::IndexList members;  // centers * group_size rows into the previous level
    nn::Matrix local;       // member offsets from their center
    Eigen::Index group_size = 0;
  };

  Eigen::Index point_count = 0;
  std::vector<PointMatrixd> level_points;  // level 0 is the raw cloud
  std::vector<Abstraction> abstraction;
  /// propagation[l] interpolates level l+1 features onto level l points;
  /// propagation[0] targets the context points only.
  std::vector<nn::SparseMatrix> propagation;
  /// Raw points that receive per-point features.
  nn::IndexList context;
  PointMatrixd context_points;

  /// `context_points` of 0 (or at least the cloud size) keeps every point;
  /// otherwise the context is a farthest-point subset of that size.
  static SceneGeometry build(const PointMatrixd& points, const SetAbstractionSpec& spec, Eigen::Index context_points = 0);
};

/// Indices of the points that carry per-point features: all of them, or a
/// farthest-point subset of `count` points.
nn::IndexList context_indices(const PointMatrixd& points, Eigen::Index count);

/// Inverse-distance weights over the 3 nearest coarse points (fewer if the
/// coarse level is smaller). Rows sum to 1.
nn::SparseMatrix interpolation_weights(const PointMatrixd& fine, const PointMatrixd& coarse);

/// Hierarchical set abstraction followed by feature propagation.
class PointNetEncoder {
 public:
  PointNetEncoder() = default;
  PointNetEncoder(const nn::ParamScope& scope, const SetAbstractionSpec& spec);

  SceneFeatures operator()(const SceneGeometry& geometry) const;
  const SetAbstractionSpec& spec() const { return spec_; }

 private:
  SetAbstractionSpec spec_;
  std::vector<std::vector<nn::Linear>> abstraction_mlps_;
  std::vector<std::vector<nn::Linear>> propagation_mlps_;  // indexed by fine level
};

/// Two-layer pointwise MLP on centered coordinates with a max-pool; the
/// replacement encoder for the hierarchy ablation.
class PointwiseEncoder {
 public:
  PointwiseEncoder() = default;
  PointwiseEncoder(const nn::ParamScope& scope, int width);

  /// Per-point features for the `context` rows; the pool covers every point.
  SceneFeatures operator()(const PointMatrixd& points, const nn::IndexList& context) const;

 private:
  nn::Linear fc1_;
  nn::Linear fc2_;
};

/// Convenience wrapper: builds the geometry and runs the encoder.
SceneFeatures encode_scene(const ScenePointCloudd& cloud, const PointNetEncoder& encoder);

}  // namespace sif3d
