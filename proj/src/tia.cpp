#include "sif3d/tia.hpp"

#include <cmath>
#include <stdexcept>

namespace sif3d {

nn::Var aggregate_temporal(const nn::Var& seq, Aggregator strategy) {
  if (!seq.defined() || seq.rows() == 0) throw std::invalid_argument("aggregate_temporal: empty sequence");
  switch (strategy) {
    case Aggregator::Last: return nn::slice_rows(seq, seq.rows() - 1, 1);
    case Aggregator::Mean: return nn::mean_rows(seq);
    case Aggregator::Max: return nn::max_rows(seq);
    default: throw std::invalid_argument("aggregate_temporal: " + to_string(strategy) + " needs learned parameters");
  }
}

nn::Var aggregate_temporal(const nn::Var& seq, const std::string& strategy) {
  return aggregate_temporal(seq, parse_aggregator(strategy));
}

TemporalAggregator::TemporalAggregator(const nn::ParamScope& scope, const ModelConfig& config)
    : strategy_(config.aggregator) {
  const int c = config.motion_dim;
  if (strategy_ == Aggregator::Conv) {
    for (int i = 0; i < 3; ++i) conv_.emplace_back(scope.child("conv" + std::to_string(i)), 3 * c, c);
  } else if (strategy_ == Aggregator::Transformer) {
    query_ = scope.glorot("query", 1, c);
    decoder_ = nn::DecoderLayer(scope.child("decoder"), c, c, config.heads, config.ffn_dim);
  }
}

nn::Var TemporalAggregator::operator()(const nn::Var& seq) const {
  if (strategy_ == Aggregator::Conv) {
    if (seq.rows() == 0) throw std::invalid_argument("aggregate_temporal: empty sequence");
    nn::Var x = seq;
    for (const auto& layer : conv_) x = nn::gelu(layer(nn::unfold_rows(x, 3, 2, 1)));
    return nn::mean_rows(x);
  }
  if (strategy_ == Aggregator::Transformer) {
    if (seq.rows() == 0) throw std::invalid_argument("aggregate_temporal: empty sequence");
    return decoder_(query_, seq);
  }
  return aggregate_temporal(seq, strategy_);
}

GlobalSalienceAttention::GlobalSalienceAttention(const nn::ParamScope& scope, const ModelConfig& config)
    : query(scope.child("query"), config.motion_dim, config.attention_dim),
      key(scope.child("key"), config.scene_dim + 3, config.attention_dim),
      value(scope.child("value"), config.scene_dim + 3, config.motion_dim),
      global(scope.child("global"), config.scene_dim, config.motion_dim),
      scale(1.0 / std::sqrt(static_cast<double>(config.attention_dim))) {}

GlobalSalience global_salience(const nn::Var& f_gm, const nn::Var& point_rows, const GlobalSalienceAttention& attn) {
  if (f_gm.rows() != 1 || f_gm.cols() != attn.query.in_features())
    throw std::invalid_argument("global_salience: motion summary has the wrong shape");
  if (point_rows.rows() == 0 || point_rows.cols() != attn.key.in_features())
    throw std::invalid_argument("global_salience: scene rows have the wrong shape");
  GlobalSalience out;
  const nn::Var logits = nn::scale(nn::matmul_nt(attn.query(f_gm), attn.key(point_rows)), attn.scale);
  out.weights = nn::softmax_rows(logits);
  out.values = attn.value(point_rows);
  return out;
}

nn::Var fuse_global(const nn::Var& global_embedding, const GlobalSalience& salience, Eigen::Index rows,
                    const GlobalSalienceAttention& attn) {
  if (global_embedding.rows() != 1 || global_embedding.cols() != attn.global.in_features())
    throw std::invalid_argument("fuse_global: global embedding has the wrong shape");
  if (salience.weights.cols() != salience.values.rows())
    throw std::invalid_argument("fuse_global: salience and values disagree on the point count");
  const nn::Var row = attn.global(global_embedding) + nn::matmul(salience.weights, salience.values);
  return nn::broadcast_rows(row, rows);
}

TiaBlock::TiaBlock(const nn::ParamScope& scope, const ModelConfig& config)
    : trajectory_encoder(scope.child("trajectory_encoder"), config.motion_dim, config.heads, config.ffn_dim),
      aggregator(scope.child("aggregator"), config),
      attention(scope.child("salience"), config),
      norm(scope.child("norm"), 3 * config.motion_dim),
      mlp(scope.child("mlp"), 3 * config.motion_dim, config.mlp_hidden, config.motion_dim,
          config.zero_init_residual ? nn::Init::Zero : nn::Init::Glorot) {}

nn::Var TiaBlock::operator()(const nn::Var& f_in, const SceneContext& scene, const nn::Var& f_gaze,
                             nn::Var* salience_out) const {
  if (f_gaze.rows() != f_in.rows() || f_gaze.cols() != f_in.cols())
    throw std::invalid_argument("tia_block: gaze and motion embeddings differ in shape");
  const nn::Var f_gm = aggregator(trajectory_encoder(f_in));
  const GlobalSalience sg = global_salience(f_gm, scene.point_rows, attention);
  const nn::Var f_sm = fuse_global(scene.features.global_embedding, sg, f_in.rows(), attention);
  if (salience_out) *salience_out = sg.weights;
  return f_in + mlp(norm(nn::concat_cols({f_in, f_sm, f_gaze})));
}

TiaStack::TiaStack(const nn::ParamScope& scope, const ModelConfig& config) {
  for (int i = 0; i < config.tia_blocks; ++i) blocks_.emplace_back(scope.child("block" + std::to_string(i)), config);
}

TiaOutput TiaStack::operator()(const nn::Var& f_m, const SceneContext& scene, const nn::Var& f_gaze) const {
  TiaOutput out;
  out.values = f_m;
  for (const auto& block : blocks_) {
    nn::Var s;
    out.values = block(out.values, scene, f_gaze, &s);
    out.salience.push_back(s);
  }
  return out;
}

}  // namespace sif3d
