#pragma once

#include "sif3d/core.hpp"

#include <string>
#include <vector>

namespace sif3d {

/// One set-abstraction level. A group-all level pools every remaining point
/// into a single centroid and ignores `centroids`, `radius`, `neighbors`.
struct SetAbstractionLevel {
  int centroids = 1;
  double radius = 0.0;
  int neighbors = 1;
  std::vector<int> mlp;
  bool group_all = false;
};

struct SetAbstractionSpec {
  std::vector<SetAbstractionLevel> levels;
  std::vector<int> propagation_widths;

  /// Throws std::invalid_argument on a malformed hierarchy.
  void validate() const;
  /// Smallest cloud the hierarchy accepts.
  int min_points() const;
  int output_width() const { return levels.back().mlp.back(); }

  static SetAbstractionSpec standard();
  /// Scaled-down hierarchy for clouds of a few hundred points and narrow features.
  static SetAbstractionSpec compact(int width, int first_centroids, double first_radius);
};

enum class Aggregator { Last, Mean, Max, Conv, Transformer };

Aggregator parse_aggregator(const std::string& name);
std::string to_string(Aggregator a);

struct ModelConfig {
  int motion_dim = 256;     // c_m
  int scene_dim = 256;      // c_s
  int attention_dim = 256;  // c in the salience softmax scale
  int heads = 8;
  int ffn_dim = 1024;
  int mlp_hidden = 1024;
  int motion_layers = 6;
  int tia_blocks = 2;
  int sca_blocks = 2;
  int gcn_layers = 6;
  int gcn_width = 64;
  int disc_layers = 3;
  int disc_dim = 256;
  SetAbstractionSpec scene = SetAbstractionSpec::standard();
  /// Points the attention blocks see; 0 keeps the whole cloud, otherwise a
  /// farthest-point subset of this size.
  int context_points = 0;
  Aggregator aggregator = Aggregator::Last;
  bool positional_encoding = true;
  /// Zero the output layer of every residual branch (identity at init).
  bool zero_init_residual = false;

  bool use_scene = true;
  bool use_gaze = true;
  bool use_tia = true;
  bool use_sca = true;
  bool use_decoder = true;
  bool use_discriminator = true;
  bool use_pointnet = true;

  void validate() const;

  /// Narrow dimensions used by the synthetic benchmark.
  static ModelConfig small();
  /// Smallest configuration, for gradient checks and overfit tests.
  static ModelConfig tiny();
};

}  // namespace sif3d
