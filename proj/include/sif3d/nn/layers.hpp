#pragma once

#include "sif3d/nn/tensor.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sif3d::nn {

/// Named, ordered collection of trainable tensors.
///
/// Each tensor is initialized from its own stream seeded by (seed, name), so a
/// parameter keeps its initial value when unrelated modules are added or
/// removed. Ablation variants trained from one seed share every common weight.
class ParameterSet {
 public:
  explicit ParameterSet(std::uint64_t seed = 0) : seed_(seed) {}

  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Var add(const std::string& name, Matrix init);
  /// Uniform Glorot initialization.
  Var glorot(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Var constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Var& at(const std::string& name);
  const Var& at(const std::string& name) const;

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::uint64_t seed() const { return seed_; }

  void zero_grad();
  /// Sets every tensor whose name contains `pattern` to zero.
  void zero_matching(const std::string& pattern);
  bool all_finite() const;

 private:
  std::uint64_t seed_;
  std::vector<std::pair<std::string, Var>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Prefix-carrying view used while constructing modules.
class ParamScope {
 public:
  ParamScope(ParameterSet& set, std::string prefix) : set_(&set), prefix_(std::move(prefix)) {}

  ParamScope child(const std::string& name) const {
    return ParamScope(*set_, prefix_.empty() ? name : prefix_ + "." + name);
  }
  std::string qualified(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }
  Var glorot(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    return set_->glorot(qualified(name), rows, cols);
  }
  Var constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) const {
    return set_->constant(qualified(name), rows, cols, value);
  }

 private:
  ParameterSet* set_;
  std::string prefix_;
};

enum class Init { Glorot, Zero };

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out

  Linear() = default;
  Linear(const ParamScope& scope, Eigen::Index in, Eigen::Index out, Init init = Init::Glorot);

  Var operator()(const Var& x) const { return affine(x, weight, bias); }
  Eigen::Index in_features() const { return weight.rows(); }
  Eigen::Index out_features() const { return weight.cols(); }
};

struct LayerNorm {
  Var gamma;
  Var beta;

  LayerNorm() = default;
  LayerNorm(const ParamScope& scope, Eigen::Index dim);

  Var operator()(const Var& x) const { return layer_norm_rows(x, gamma, beta); }
};

/// Two affine layers with a GELU in between.
struct Mlp {
  Linear fc1;
  Linear fc2;

  Mlp() = default;
  Mlp(const ParamScope& scope, Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Init output_init = Init::Glorot);

  Var operator()(const Var& x) const { return fc2(gelu(fc1(x))); }
};

struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(const ParamScope& scope, Eigen::Index dim, Eigen::Index context_dim, int heads,
                     Init output_init = Init::Glorot);

  Var operator()(const Var& x, const Var& context) const;
};

/// Pre-norm transformer encoder layer.
struct EncoderLayer {
  LayerNorm attention_norm;
  MultiHeadAttention attention;
  LayerNorm ffn_norm;
  Mlp ffn;

  EncoderLayer() = default;
  EncoderLayer(const ParamScope& scope, Eigen::Index dim, int heads, Eigen::Index ffn_dim,
               Init output_init = Init::Glorot);

  Var operator()(const Var& x) const;
};

/// Pre-norm transformer decoder layer: self-attention, cross-attention over a
/// memory sequence, feed-forward.
struct DecoderLayer {
  LayerNorm self_norm;
  MultiHeadAttention self_attention;
  LayerNorm cross_norm;
  MultiHeadAttention cross_attention;
  LayerNorm ffn_norm;
  Mlp ffn;

  DecoderLayer() = default;
  DecoderLayer(const ParamScope& scope, Eigen::Index dim, Eigen::Index memory_dim, int heads, Eigen::Index ffn_dim,
               Init output_init = Init::Glorot);

  Var operator()(const Var& x, const Var& memory) const;
};

/// Fixed sinusoidal position table (rows x dim).
Matrix sinusoidal_encoding(Eigen::Index rows, Eigen::Index dim);

/// softmax(q k^T * scale) v for a single head.
Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, double scale);

}  // namespace sif3d::nn
