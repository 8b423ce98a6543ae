#pragma once

#include "sif3d/dataset.hpp"
#include "sif3d/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sif3d {

struct LossWeights {
  double traj = 1.0;
  double orient = 0.5;
  double pose = 0.1;
  double joints = 1.0;
  double adv = 0.05;
};

struct TrainConfig {
  double learning_rate = 0.0004;
  double decay = 0.98;
  int epochs = 100;
  int batch_size = 8;
  LossWeights weights;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  /// Zero disables periodic checkpoints; the final one is always written.
  int checkpoint_every = 10;
  std::uint64_t seed = 0;
  ModelConfig model;

  void validate() const;
  double learning_rate_at(int epoch) const;

  /// Human-readable `key = value` lines; `from_text` accepts the same keys.
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
  /// Assigns one key; throws std::invalid_argument on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
};

/// Applies SIF3D_SEED and SIF3D_OUT_DIR. Returns the output directory
/// override, if any.
std::optional<std::filesystem::path> apply_env_overrides(TrainConfig& config);

struct LossReport {
  double l_traj = 0.0;
  double l_orient = 0.0;
  double l_pose = 0.0;
  double l_joints = 0.0;
  double l_adv_g = 0.0;
  double l_adv_d = 0.0;
  double total = 0.0;

  bool finite() const;
  bool operator==(const LossReport&) const = default;
};

/// Value-level losses over the future frames. `scores` carries the critic
/// objectives; pass nothing to leave the adversarial terms at zero.
LossReport compute_losses(const PredictionBundle& pred, const EpisodeRecord& truth,
                          const std::optional<AdversarialLosses>& scores = std::nullopt,
                          const LossWeights& weights = {});

/// Ground-truth joints of every frame as L x 69 rows.
nn::Matrix joint_rows(const MotionSequenced& motion, const BodyModel& model = BodyModel::standard());

/// Differentiable reconstruction terms of one pass.
struct LossGraph {
  nn::Var traj;
  nn::Var orient;
  nn::Var pose;
  nn::Var joints;
  nn::Var adv;  // undefined without a critic
  nn::Var total;
};

/// `fake_score` is the critic's score of the generated sequence, or an
/// undefined Var to skip the adversarial term.
LossGraph loss_graph(const ForwardPass& pass, const EpisodeRecord& truth, const LossWeights& weights,
                     const nn::Var& fake_score = {});

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// AdamW with decoupled weight decay and global-norm clipping.
class AdamW {
 public:
  struct Moments {
    nn::Matrix m;
    nn::Matrix v;
  };

  AdamW() = default;
  AdamW(double weight_decay, double clip_norm) : weight_decay_(weight_decay), clip_norm_(clip_norm) {}

  /// Clips, then updates every parameter that holds a gradient. Returns the
  /// gradient norm before clipping.
  double step(nn::ParameterSet& params, double lr);

  long long steps() const { return steps_; }
  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }
  void set_steps(long long s) { steps_ = s; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  double weight_decay_ = 0.01;
  double clip_norm_ = 1.0;
  long long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

/// Global L2 norm of the accumulated gradients.
double gradient_norm(const nn::ParameterSet& params);

/// Generator, critic and optimizer state.
class Trainer {
 public:
  Trainer(const TrainConfig& config);

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// One generator update, then one critic update. Throws NonFiniteLoss
  /// before touching any weight when a loss or gradient is not finite.
  LossReport train_step(const std::vector<const EpisodeRecord*>& batch, const Dataset& data, double lr);

  /// Mean losses of one pass over `indices`, batched in a seed-determined
  /// order; the learning rate follows the epoch schedule.
  LossReport train_epoch(const Dataset& data, const std::vector<std::size_t>& indices);

  PredictionBundle predict(const EpisodeRecord& episode, const Dataset& data);
  const PreparedScene& prepared(const SceneRecord& scene);

  Generator& generator() { return generator_; }
  Critic& critic() { return critic_; }
  AdamW& generator_optimizer() { return gen_opt_; }
  AdamW& critic_optimizer() { return disc_opt_; }
  const TrainConfig& config() const { return config_; }
  int epoch() const { return epoch_; }
  void set_epoch(int e) { epoch_ = e; }

  void save(const std::filesystem::path& path) const;
  /// Restores weights, moments and counters. Throws std::runtime_error when
  /// the file does not match this trainer's architecture.
  void load(const std::filesystem::path& path);

 private:
  TrainConfig config_;
  Generator generator_;
  Critic critic_;
  AdamW gen_opt_;
  AdamW disc_opt_;
  int epoch_ = 0;
  std::map<std::string, PreparedScene> scenes_;
};

/// Header of a checkpoint file without loading the weights.
struct CheckpointInfo {
  TrainConfig config;
  std::uint64_t seed = 0;
  int epoch = 0;
};
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

struct TrainingResult {
  std::vector<LossReport> epoch_losses;
  std::vector<std::filesystem::path> checkpoints;
};

using EpochCallback = std::function<void(int epoch, const LossReport&)>;

/// Trains on the training split from epoch `trainer.epoch()` up to
/// `config.epochs`, writing `epoch_NNNN.ckpt` files into `out_dir`. A fresh
/// trainer also writes its initial state as epoch 0.
TrainingResult run_training(Trainer& trainer, const Dataset& data, const std::filesystem::path& out_dir,
                            const EpochCallback& on_epoch = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch);

}  // namespace sif3d
