#include "sif3d/adversary.hpp"

#include "sif3d/core.hpp"

#include <stdexcept>
#include <string>

namespace sif3d {

Discriminator::Discriminator(const nn::ParamScope& scope, const ModelConfig& config)
    : lift(scope.child("lift"), 3 * kNumJoints, config.disc_dim),
      memory(scope.child("memory"), config.scene_dim, config.disc_dim),
      norm(scope.child("norm"), config.disc_dim),
      head(scope.child("head"), config.disc_dim, 1),
      positional(config.positional_encoding) {
  for (int i = 0; i < config.disc_layers; ++i)
    layers.emplace_back(scope.child("layer" + std::to_string(i)), config.disc_dim, config.disc_dim, config.heads,
                        config.ffn_dim);
}

nn::Var Discriminator::operator()(const nn::Var& joints, const nn::Var& scene_global) const {
  if (joints.cols() != 3 * kNumJoints || joints.rows() == 0)
    throw std::invalid_argument("discriminate: expected L x 69 joint rows");
  if (scene_global.rows() != 1 || scene_global.cols() != memory.in_features())
    throw std::invalid_argument("discriminate: scene embedding has the wrong width");
  nn::Var x = lift(joints);
  if (positional) x = x + nn::Var::constant(nn::sinusoidal_encoding(x.rows(), x.cols()));
  const nn::Var mem = memory(scene_global);
  for (const auto& layer : layers) x = layer(x, mem);
  return head(nn::mean_rows(norm(x)));
}

AdversarialLosses adversarial_losses(double real_score, double fake_score) {
  AdversarialLosses out;
  out.d_loss = 0.5 * ((real_score - 1.0) * (real_score - 1.0) + fake_score * fake_score);
  out.g_loss = 0.5 * (fake_score - 1.0) * (fake_score - 1.0);
  return out;
}

nn::Var discriminator_loss(const nn::Var& real_score, const nn::Var& fake_score) {
  const nn::Var one = nn::Var::constant(nn::Matrix::Ones(1, 1));
  return nn::scale(nn::sum(nn::square(real_score - one)) + nn::sum(nn::square(fake_score)), 0.5);
}

nn::Var generator_adversarial_loss(const nn::Var& fake_score) {
  const nn::Var one = nn::Var::constant(nn::Matrix::Ones(1, 1));
  return nn::scale(nn::sum(nn::square(fake_score - one)), 0.5);
}

}  // namespace sif3d
