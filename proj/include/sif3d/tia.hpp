#pragma once

#include "sif3d/model_config.hpp"
#include "sif3d/nn/layers.hpp"
#include "sif3d/scene_encoder.hpp"

#include <string>
#include <vector>

namespace sif3d {

/// Parameter-free aggregation (Last, Mean, Max). Learned strategies need a
/// TemporalAggregator and throw here.
nn::Var aggregate_temporal(const nn::Var& seq, Aggregator strategy);
nn::Var aggregate_temporal(const nn::Var& seq, const std::string& strategy);

/// Condenses a sequence into one row using any strategy.
class TemporalAggregator {
 public:
  TemporalAggregator() = default;
  TemporalAggregator(const nn::ParamScope& scope, const ModelConfig& config);

  nn::Var operator()(const nn::Var& seq) const;
  Aggregator strategy() const { return strategy_; }

 private:
  Aggregator strategy_ = Aggregator::Last;
  std::vector<nn::Linear> conv_;  // kernel 3, stride 2
  nn::Var query_;
  nn::DecoderLayer decoder_;
};

/// Weights over scene points (1 x n) and the value rows they average (n x c_m).
struct GlobalSalience {
  nn::Var weights;
  nn::Var values;
};

struct GlobalSalienceAttention {
  nn::Linear query;   // c_m -> c
  nn::Linear key;     // c_s + 3 -> c
  nn::Linear value;   // c_s + 3 -> c_m
  nn::Linear global;  // c_s -> c_m
  double scale = 1.0;

  GlobalSalienceAttention() = default;
  GlobalSalienceAttention(const nn::ParamScope& scope, const ModelConfig& config);
};

/// Single-query softmax over all scene points. `point_rows` is n x (c_s + 3).
GlobalSalience global_salience(const nn::Var& f_gm, const nn::Var& point_rows, const GlobalSalienceAttention& attn);

/// Projected global embedding plus the salience-weighted value sum, repeated
/// on `rows` rows.
nn::Var fuse_global(const nn::Var& global_embedding, const GlobalSalience& salience, Eigen::Index rows,
                    const GlobalSalienceAttention& attn);

struct TiaOutput {
  nn::Var values;
  std::vector<nn::Var> salience;  // one 1 x n row per block
};

class TiaBlock {
 public:
  TiaBlock() = default;
  TiaBlock(const nn::ParamScope& scope, const ModelConfig& config);

  nn::Var operator()(const nn::Var& f_in, const SceneContext& scene, const nn::Var& f_gaze,
                     nn::Var* salience_out = nullptr) const;

  nn::EncoderLayer trajectory_encoder;
  TemporalAggregator aggregator;
  GlobalSalienceAttention attention;
  nn::LayerNorm norm;
  nn::Mlp mlp;
};

class TiaStack {
 public:
  TiaStack() = default;
  TiaStack(const nn::ParamScope& scope, const ModelConfig& config);

  TiaOutput operator()(const nn::Var& f_m, const SceneContext& scene, const nn::Var& f_gaze) const;
  std::vector<TiaBlock>& blocks() { return blocks_; }

 private:
  std::vector<TiaBlock> blocks_;
};

}  // namespace sif3d
