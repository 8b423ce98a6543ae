#pragma once

#include "sif3d/model_config.hpp"
#include "sif3d/nn/layers.hpp"

#include <vector>

namespace sif3d {

/// Sequence-level realism critic conditioned on the global scene embedding.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const nn::ParamScope& scope, const ModelConfig& config);

  /// `joints` is L x 69, `scene_global` is 1 x c_s; returns a 1 x 1 score.
  nn::Var operator()(const nn::Var& joints, const nn::Var& scene_global) const;

  nn::Linear lift;
  nn::Linear memory;
  std::vector<nn::DecoderLayer> layers;
  nn::LayerNorm norm;
  nn::Linear head;
  bool positional = true;
};

struct AdversarialLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// Least-squares objectives: d = ((r-1)^2 + f^2)/2, g = (f-1)^2/2.
AdversarialLosses adversarial_losses(double real_score, double fake_score);
nn::Var discriminator_loss(const nn::Var& real_score, const nn::Var& fake_score);
nn::Var generator_adversarial_loss(const nn::Var& fake_score);

}  // namespace sif3d
