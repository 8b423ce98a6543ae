#include "sif3d/nn/layers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sif3d::nn {

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mt19937_64 stream_for(std::uint64_t seed, const std::string& name) {
  const std::uint64_t h = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Var ParameterSet::add(const std::string& name, Matrix init) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, Var::parameter(std::move(init)));
  return entries_.back().second;
}

Var ParameterSet::glorot(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  auto rng = stream_for(seed_, name);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return add(name, std::move(m));
}

Var ParameterSet::constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
  return add(name, Matrix::Constant(rows, cols, value));
}

Var& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].second;
}

const Var& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) n += static_cast<std::size_t>(v.value().size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, v] : entries_) v.zero_grad();
}

void ParameterSet::zero_matching(const std::string& pattern) {
  for (auto& [name, v] : entries_)
    if (name.find(pattern) != std::string::npos) v.mutable_value().setZero();
}

bool ParameterSet::all_finite() const {
  for (const auto& [name, v] : entries_)
    if (!v.value().allFinite()) return false;
  return true;
}

Linear::Linear(const ParamScope& scope, Eigen::Index in, Eigen::Index out, Init init) {
  weight = init == Init::Zero ? scope.constant("weight", in, out, 0.0) : scope.glorot("weight", in, out);
  bias = scope.constant("bias", 1, out, 0.0);
}

LayerNorm::LayerNorm(const ParamScope& scope, Eigen::Index dim)
    : gamma(scope.constant("gamma", 1, dim, 1.0)), beta(scope.constant("beta", 1, dim, 0.0)) {}

Mlp::Mlp(const ParamScope& scope, Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Init output_init)
    : fc1(scope.child("fc1"), in, hidden), fc2(scope.child("fc2"), hidden, out, output_init) {}

MultiHeadAttention::MultiHeadAttention(const ParamScope& scope, Eigen::Index dim, Eigen::Index context_dim, int heads_,
                                       Init output_init)
    : query(scope.child("query"), dim, dim),
      key(scope.child("key"), context_dim, dim),
      value(scope.child("value"), context_dim, dim),
      output(scope.child("output"), dim, dim, output_init),
      heads(heads_) {
  if (heads < 1 || dim % heads != 0) throw std::invalid_argument("attention width must be divisible by the head count");
}

Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, double scale_factor) {
  return matmul(softmax_rows(scale(matmul_nt(q, k), scale_factor)), v);
}

Var MultiHeadAttention::operator()(const Var& x, const Var& context) const {
  const Var q = query(x);
  const Var k = key(context);
  const Var v = value(context);
  const Eigen::Index width = q.cols() / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(width));
  if (heads == 1) return output(scaled_dot_attention(q, k, v, s));
  std::vector<Var> parts;
  parts.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index off = h * width;
    parts.push_back(scaled_dot_attention(slice_cols(q, off, width), slice_cols(k, off, width),
                                         slice_cols(v, off, width), s));
  }
  return output(concat_cols(parts));
}

EncoderLayer::EncoderLayer(const ParamScope& scope, Eigen::Index dim, int heads, Eigen::Index ffn_dim, Init output_init)
    : attention_norm(scope.child("attention_norm"), dim),
      attention(scope.child("attention"), dim, dim, heads, output_init),
      ffn_norm(scope.child("ffn_norm"), dim),
      ffn(scope.child("ffn"), dim, ffn_dim, dim, output_init) {}

Var EncoderLayer::operator()(const Var& x) const {
  const Var normed = attention_norm(x);
  const Var h = x + attention(normed, normed);
  return h + ffn(ffn_norm(h));
}

DecoderLayer::DecoderLayer(const ParamScope& scope, Eigen::Index dim, Eigen::Index memory_dim, int heads,
                           Eigen::Index ffn_dim, Init output_init)
    : self_norm(scope.child("self_norm"), dim),
      self_attention(scope.child("self_attention"), dim, dim, heads, output_init),
      cross_norm(scope.child("cross_norm"), dim),
      cross_attention(scope.child("cross_attention"), dim, memory_dim, heads, output_init),
      ffn_norm(scope.child("ffn_norm"), dim),
      ffn(scope.child("ffn"), dim, ffn_dim, dim, output_init) {}

Var DecoderLayer::operator()(const Var& x, const Var& memory) const {
  const Var normed = self_norm(x);
  Var h = x + self_attention(normed, normed);
  h = h + cross_attention(cross_norm(h), memory);
  return h + ffn(ffn_norm(h));
}

Matrix sinusoidal_encoding(Eigen::Index rows, Eigen::Index dim) {
  Matrix pe(rows, dim);
  for (Eigen::Index pos = 0; pos < rows; ++pos)
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

}  // namespace sif3d::nn
