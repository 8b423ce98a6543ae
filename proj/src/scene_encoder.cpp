#include "sif3d/scene_encoder.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace sif3d {

namespace {

using Index = Eigen::Index;

bool lex_less(const PointMatrixd& p, Index a, Index b) {
  for (int c = 0; c < 3; ++c) {
    if (p(a, c) < p(b, c)) return true;
    if (p(a, c) > p(b, c)) return false;
  }
  return a < b;
}

// Index of the best candidate under (score desc, coordinates asc, index asc).
Index pick_farthest(const PointMatrixd& p, const Eigen::VectorXd& score) {
  Index best = 0;
  for (Index i = 1; i < score.size(); ++i) {
    if (score[i] > score[best] || (score[i] == score[best] && lex_less(p, i, best))) best = i;
  }
  return best;
}

using Candidate = std::pair<double, Index>;

std::vector<Candidate> nearest(const PointMatrixd& points, const Eigen::RowVector3d& q, std::size_t count) {
  std::vector<Candidate> all(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) all[static_cast<std::size_t>(i)] = {(points.row(i) - q).squaredNorm(), i};
  count = std::min(count, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count), all.end());
  all.resize(count);
  return all;
}

nn::Var pointwise_mlp(const std::vector<nn::Linear>& layers, nn::Var x) {
  for (const auto& layer : layers) x = nn::relu(layer(x));
  return x;
}

}  // namespace

std::vector<Index> farthest_point_sample(const PointMatrixd& points, Index m) {
  const Index n = points.rows();
  if (m < 1 || m > n)
    throw std::invalid_argument("farthest_point_sample: need 1 <= m <= n (m=" + std::to_string(m) +
                                ", n=" + std::to_string(n) + ")");
  const Eigen::RowVector3d centroid = points.colwise().mean();
  Eigen::VectorXd score = (points.rowwise() - centroid).rowwise().squaredNorm();
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(m));
  Index next = pick_farthest(points, score);
  score = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (Index step = 0; step < m; ++step) {
    chosen.push_back(next);
    const Eigen::RowVector3d c = points.row(next);
    for (Index i = 0; i < n; ++i) score[i] = std::min(score[i], (points.row(i) - c).squaredNorm());
    for (Index i : chosen) score[i] = -1.0;
    if (step + 1 < m) next = pick_farthest(points, score);
  }
  return chosen;
}

IndexMatrix ball_query(const PointMatrixd& centers, const PointMatrixd& points, double radius, Index k) {
  if (points.rows() == 0) throw std::invalid_argument("ball_query: empty cloud");
  if (!(radius > 0.0) || k < 1) throw std::invalid_argument("ball_query: need radius > 0 and k >= 1");
  const double r2 = radius * radius;
  IndexMatrix out(centers.rows(), k);
  std::vector<Candidate> inside;
  for (Index c = 0; c < centers.rows(); ++c) {
    const Eigen::RowVector3d q = centers.row(c);
    inside.clear();
    Candidate closest{std::numeric_limits<double>::infinity(), 0};
    for (Index i = 0; i < points.rows(); ++i) {
      const double d2 = (points.row(i) - q).squaredNorm();
      if (d2 <= r2) inside.emplace_back(d2, i);
      if (d2 < closest.first) closest = {d2, i};
    }
    if (inside.empty()) {
      out.row(c).setConstant(closest.second);
      continue;
    }
    const auto take = std::min<std::size_t>(inside.size(), static_cast<std::size_t>(k));
    std::partial_sort(inside.begin(), inside.begin() + static_cast<std::ptrdiff_t>(take), inside.end());
    for (Index j = 0; j < k; ++j)
      out(c, j) = static_cast<std::size_t>(j) < take ? inside[static_cast<std::size_t>(j)].second : inside[0].second;
  }
  return out;
}

nn::SparseMatrix interpolation_weights(const PointMatrixd& fine, const PointMatrixd& coarse) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(fine.rows()) * 3);
  for (Index i = 0; i < fine.rows(); ++i) {
    const auto near = nearest(coarse, fine.row(i), 3);
    double total = 0.0;
    double w[3];
    for (std::size_t j = 0; j < near.size(); ++j) {
      w[j] = 1.0 / (std::sqrt(near[j].first) + 1e-8);
      total += w[j];
    }
    for (std::size_t j = 0; j < near.size(); ++j) triplets.emplace_back(i, near[j].second, w[j] / total);
  }
  nn::SparseMatrix m(fine.rows(), coarse.rows());
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

nn::IndexList context_indices(const PointMatrixd& points, Eigen::Index count) {
  if (count > 0 && count < points.rows()) return farthest_point_sample(points, count);
  nn::IndexList all(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

SceneGeometry SceneGeometry::build(const PointMatrixd& points, const SetAbstractionSpec& spec, Eigen::Index context_points) {
  spec.validate();
  if (points.rows() < spec.min_points())
    throw std::invalid_argument("scene has " + std::to_string(points.rows()) + " points; the hierarchy needs at least " +
                                std::to_string(spec.min_points()));
  SceneGeometry g;
  g.point_count = points.rows();
  g.level_points.push_back(points);
  for (const auto& level : spec.levels) {
    const PointMatrixd& src = g.level_points.back();
    Abstraction a;
    if (level.group_all) {
      a.centers = src.colwise().mean();
      a.group_size = src.rows();
      a.members.resize(static_cast<std::size_t>(src.rows()));
      for (Index i = 0; i < src.rows(); ++i) a.members[static_cast<std::size_t>(i)] = i;
      a.local = src.rowwise() - a.centers.row(0);
    } else {
      const auto picks = farthest_point_sample(src, level.centroids);
      a.centers.resize(level.centroids, 3);
      for (Index c = 0; c < level.centroids; ++c) a.centers.row(c) = src.row(picks[static_cast<std::size_t>(c)]);
      const IndexMatrix groups = ball_query(a.centers, src, level.radius, level.neighbors);
      a.group_size = level.neighbors;
      a.members.assign(groups.data(), groups.data() + groups.size());
      a.local.resize(static_cast<Index>(a.members.size()), 3);
      for (Index c = 0; c < groups.rows(); ++c)
        for (Index j = 0; j < groups.cols(); ++j)
          a.local.row(c * groups.cols() + j) = src.row(groups(c, j)) - a.centers.row(c);
    }
    g.level_points.push_back(a.centers);
    g.abstraction.push_back(std::move(a));
  }
  g.context = context_indices(points, context_points);
  g.context_points.resize(static_cast<Index>(g.context.size()), 3);
  for (std::size_t i = 0; i < g.context.size(); ++i) g.context_points.row(static_cast<Index>(i)) = points.row(g.context[i]);
  g.propagation.push_back(interpolation_weights(g.context_points, g.level_points[1]));
  for (std::size_t l = 1; l + 1 < g.level_points.size(); ++l)
    g.propagation.push_back(interpolation_weights(g.level_points[l], g.level_points[l + 1]));
  return g;
}

PointNetEncoder::PointNetEncoder(const nn::ParamScope& scope, const SetAbstractionSpec& spec) : spec_(spec) {
  spec_.validate();
  std::vector<int> widths;  // feature width per level, 0 for raw points
  widths.push_back(0);
  for (std::size_t l = 0; l < spec_.levels.size(); ++l) {
    const auto sa = scope.child("sa" + std::to_string(l));
    std::vector<nn::Linear> layers;
    int in = 3 + widths.back();
    for (std::size_t i = 0; i < spec_.levels[l].mlp.size(); ++i) {
      const int out = spec_.levels[l].mlp[i];
      layers.emplace_back(sa.child("fc" + std::to_string(i)), in, out);
      in = out;
    }
    widths.push_back(in);
    abstraction_mlps_.push_back(std::move(layers));
  }
  // Propagation runs from the top level down; stage l lands on level l.
  propagation_mlps_.resize(spec_.levels.size());
  int coarse = widths.back();
  for (std::size_t l = spec_.levels.size(); l-- > 0;) {
    const auto fp = scope.child("fp" + std::to_string(l));
    std::vector<nn::Linear> layers;
    int in = coarse + widths[l];
    for (std::size_t i = 0; i < spec_.propagation_widths.size(); ++i) {
      const int out = spec_.propagation_widths[i];
      layers.emplace_back(fp.child("fc" + std::to_string(i)), in, out);
      in = out;
    }
    coarse = in;
    propagation_mlps_[l] = std::move(layers);
  }
}

SceneFeatures PointNetEncoder::operator()(const SceneGeometry& geometry) const {
  if (geometry.abstraction.size() != spec_.levels.size())
    throw std::invalid_argument("scene geometry was built for a different hierarchy");
  std::vector<nn::Var> level_features(spec_.levels.size() + 1);
  for (std::size_t l = 0; l < spec_.levels.size(); ++l) {
    const auto& a = geometry.abstraction[l];
    nn::Var grouped = nn::Var::constant(a.local);
    if (level_features[l].defined())
      grouped = nn::concat_cols({grouped, nn::gather_rows(level_features[l], a.members)});
    level_features[l + 1] = nn::group_max(pointwise_mlp(abstraction_mlps_[l], grouped), a.group_size);
  }
  SceneFeatures out;
  out.global_embedding = level_features.back();
  nn::Var coarse = level_features.back();
  for (std::size_t l = spec_.levels.size(); l-- > 0;) {
    nn::Var x = nn::sparse_matmul(geometry.propagation[l], coarse);
    if (level_features[l].defined()) x = nn::concat_cols({x, level_features[l]});
    coarse = pointwise_mlp(propagation_mlps_[l], x);
  }
  out.per_point = coarse;
  return out;
}

PointwiseEncoder::PointwiseEncoder(const nn::ParamScope& scope, int width)
    : fc1_(scope.child("fc1"), 3, width), fc2_(scope.child("fc2"), width, width) {}

SceneFeatures PointwiseEncoder::operator()(const PointMatrixd& points, const nn::IndexList& context) const {
  const PointMatrixd centered = points.rowwise() - points.colwise().mean();
  SceneFeatures out;
  const nn::Var all = nn::relu(fc2_(nn::relu(fc1_(nn::Var::constant(centered)))));
  out.global_embedding = nn::max_rows(all);
  out.per_point = static_cast<Index>(context.size()) == points.rows() ? all : nn::gather_rows(all, context);
  return out;
}

SceneContext SceneContext::make(const SceneFeatures& features, const PointMatrixd& points) {
  if (features.per_point.rows() != points.rows()) throw std::invalid_argument("scene features do not match the cloud");
  SceneContext ctx;
  ctx.features = features;
  ctx.points = points;
  ctx.point_rows = nn::concat_cols({features.per_point, nn::Var::constant(points)});
  return ctx;
}

SceneContext SceneContext::disabled(const PointMatrixd& points, Eigen::Index dim) {
  SceneContext ctx;
  ctx.features.per_point = nn::Var::zeros(points.rows(), dim);
  ctx.features.global_embedding = nn::Var::zeros(1, dim);
  ctx.points = points;
  ctx.point_rows = nn::Var::zeros(points.rows(), dim + 3);
  ctx.active = false;
  return ctx;
}

SceneFeatures encode_scene(const ScenePointCloudd& cloud, const PointNetEncoder& encoder) {
  return encoder(SceneGeometry::build(cloud.points, encoder.spec()));
}

}  // namespace sif3d
