#include "sif3d/model_config.hpp"

#include <algorithm>
#include <stdexcept>

namespace sif3d {

void SetAbstractionSpec::validate() const {
  if (levels.empty()) throw std::invalid_argument("set abstraction needs at least one level");
  if (propagation_widths.empty()) throw std::invalid_argument("feature propagation needs at least one layer");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& lv = levels[i];
    if (lv.mlp.empty()) throw std::invalid_argument("set abstraction level has an empty MLP");
    for (int w : lv.mlp)
      if (w < 1) throw std::invalid_argument("set abstraction MLP widths must be positive");
    if (lv.group_all) {
      if (i + 1 != levels.size()) throw std::invalid_argument("only the last level may pool all points");
      continue;
    }
    if (lv.centroids < 1 || lv.neighbors < 1 || !(lv.radius > 0.0))
      throw std::invalid_argument("set abstraction level needs positive centroids, neighbors and radius");
    if (i > 0) {
      const auto& prev = levels[i - 1];
      if (lv.centroids >= prev.centroids) throw std::invalid_argument("centroid counts must strictly decrease");
      if (lv.radius <= prev.radius) throw std::invalid_argument("ball radii must strictly increase");
    }
  }
  for (int w : propagation_widths)
    if (w < 1) throw std::invalid_argument("feature propagation widths must be positive");
}

int SetAbstractionSpec::min_points() const {
  int m = 1;
  for (const auto& lv : levels)
    if (!lv.group_all) m = std::max(m, lv.centroids);
  return m;
}

SetAbstractionSpec SetAbstractionSpec::standard() {
  SetAbstractionSpec s;
  s.levels = {{512, 0.2, 32, {64, 64, 128}, false},
              {128, 0.4, 64, {128, 128, 256}, false},
              {1, 0.0, 0, {256, 256, 256}, true}};
  s.propagation_widths = {256, 256};
  return s;
}

SetAbstractionSpec SetAbstractionSpec::compact(int width, int first_centroids, double first_radius) {
  SetAbstractionSpec s;
  s.levels = {{first_centroids, first_radius, 16, {width, width}, false},
              {std::max(1, first_centroids / 4), 2.0 * first_radius, 16, {width, width}, false},
              {1, 0.0, 0, {width, width}, true}};
  s.propagation_widths = {width, width};
  return s;
}

Aggregator parse_aggregator(const std::string& name) {
  if (name == "Last" || name == "last") return Aggregator::Last;
  if (name == "Mean" || name == "mean") return Aggregator::Mean;
  if (name == "Max" || name == "max") return Aggregator::Max;
  if (name == "Conv" || name == "conv") return Aggregator::Conv;
  if (name == "Transformer" || name == "transformer") return Aggregator::Transformer;
  throw std::invalid_argument("unknown aggregation strategy: " + name);
}

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::Last: return "Last";
    case Aggregator::Mean: return "Mean";
    case Aggregator::Max: return "Max";
    case Aggregator::Conv: return "Conv";
    case Aggregator::Transformer: return "Transformer";
  }
  return "Last";
}

void ModelConfig::validate() const {
  if (motion_dim < 1 || scene_dim < 1 || attention_dim < 1 || ffn_dim < 1 || mlp_hidden < 1 || gcn_width < 1 ||
      disc_dim < 1)
    throw std::invalid_argument("model widths must be positive");
  if (heads < 1 || motion_dim % heads != 0 || disc_dim % heads != 0)
    throw std::invalid_argument("head count must divide the model widths");
  if (motion_layers < 0 || tia_blocks < 0 || sca_blocks < 0 || disc_layers < 0)
    throw std::invalid_argument("layer counts must be nonnegative");
  if (context_points < 0) throw std::invalid_argument("context point count must be nonnegative");
  if (gcn_layers < 2) throw std::invalid_argument("the motion decoder needs at least two graph layers");
  scene.validate();
  if (scene.output_width() != scene_dim || scene.propagation_widths.back() != scene_dim)
    throw std::invalid_argument("scene hierarchy must end at the scene feature width");
}

ModelConfig ModelConfig::small() {
  ModelConfig c;
  c.motion_dim = c.scene_dim = c.attention_dim = c.disc_dim = 32;
  c.heads = 4;
  c.ffn_dim = 64;
  c.mlp_hidden = 64;
  c.motion_layers = 2;
  c.gcn_width = 32;
  c.disc_layers = 1;
  c.scene = SetAbstractionSpec::compact(32, 128, 0.4);
  c.context_points = 256;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.motion_dim = c.scene_dim = c.attention_dim = c.disc_dim = 16;
  c.heads = 2;
  c.ffn_dim = 32;
  c.mlp_hidden = 32;
  c.motion_layers = 1;
  c.tia_blocks = 1;
  c.sca_blocks = 1;
  c.gcn_layers = 3;
  c.gcn_width = 8;
  c.disc_layers = 1;
  c.scene = SetAbstractionSpec::compact(16, 8, 0.5);
  return c;
}

}  // namespace sif3d
