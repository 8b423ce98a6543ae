#include "sif3d/synthworld.hpp"

#include "sif3d/body_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <tuple>

namespace sif3d {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kStrideLength = 1.4;
constexpr double kInteractionRamp = 1.0;
constexpr double kGazeNoise = 0.05;
constexpr int kStartRetries = 20;
constexpr double kMinPathLength = 4.0;
constexpr double kMaxPathLength = 10.0;

struct LabelShape {
  const char* label;
  double x, y, z;  // long side along x
};

constexpr std::array<LabelShape, 7> kGoalShapes = {{{"chair", 0.5, 0.5, 0.9},
                                                    {"table", 1.2, 0.8, 0.75},
                                                    {"bed", 2.0, 1.4, 0.5},
                                                    {"sofa", 1.8, 0.8, 0.8},
                                                    {"shelf", 1.0, 0.4, 1.8},
                                                    {"desk", 1.2, 0.6, 0.75},
                                                    {"cabinet", 0.8, 0.5, 1.2}}};

bool boxes_overlap(const Box& a, const Box& b, double margin = 0.0) {
  const Eigen::Vector3d amin = a.min(), amax = a.max(), bmin = b.min(), bmax = b.max();
  for (int i = 0; i < 3; ++i) {
    const double m = i < 2 ? margin : 0.0;
    if (amax[i] + m <= bmin[i] || bmax[i] + m <= amin[i]) return false;
  }
  return true;
}

std::vector<const Box*> all_boxes(const SceneSpec& spec) {
  std::vector<const Box*> out;
  for (const auto& b : spec.obstacles) out.push_back(&b);
  for (const auto& g : spec.goals) out.push_back(&g.box);
  return out;
}

void add_box_faces(const Box& box, std::vector<SurfacePatch>& out) {
  const Eigen::Vector3d m = box.min(), M = box.max(), s = box.size;
  out.push_back({{m.x(), m.y(), M.z()}, {s.x(), 0, 0}, {0, s.y(), 0}});
  out.push_back({m, {0, s.y(), 0}, {0, 0, s.z()}});
  out.push_back({{M.x(), m.y(), m.z()}, {0, s.y(), 0}, {0, 0, s.z()}});
  out.push_back({m, {s.x(), 0, 0}, {0, 0, s.z()}});
  out.push_back({{m.x(), M.y(), m.z()}, {s.x(), 0, 0}, {0, 0, s.z()}});
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool segment_clear(const SceneSpec& spec, const Eigen::Vector2d& a, const Eigen::Vector2d& b, double radius) {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.02)));
  for (int i = 0; i <= steps; ++i) {
    const Eigen::Vector2d p = a + (b - a) * (static_cast<double>(i) / steps);
    if (clearance(spec, p) < radius) return false;
  }
  return true;
}

double polyline_length(const std::vector<Eigen::Vector2d>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  return len;
}

std::vector<Eigen::Vector2d> resample(const std::vector<Eigen::Vector2d>& path, double spacing) {
  const double len = polyline_length(path);
  const int count = std::max(2, static_cast<int>(std::ceil(len / spacing)) + 1);
  std::vector<Eigen::Vector2d> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t seg = 1;
  double seg_start = 0.0;
  for (int i = 0; i < count; ++i) {
    const double s = len * static_cast<double>(i) / (count - 1);
    while (seg + 1 < path.size() && seg_start + (path[seg] - path[seg - 1]).norm() < s) {
      seg_start += (path[seg] - path[seg - 1]).norm();
      ++seg;
    }
    const double seg_len = (path[seg] - path[seg - 1]).norm();
    const double f = seg_len > 0.0 ? std::clamp((s - seg_start) / seg_len, 0.0, 1.0) : 0.0;
    out.push_back(path[seg - 1] + f * (path[seg] - path[seg - 1]));
  }
  return out;
}

std::vector<Eigen::Vector2d> moving_average(const std::vector<Eigen::Vector2d>& pts, int half) {
  if (half <= 0) return pts;
  const int n = static_cast<int>(pts.size());
  std::vector<Eigen::Vector2d> out(pts.size());
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});  // shrink near the fixed endpoints
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (int j = i - h; j <= i + h; ++j) acc += pts[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = acc / (2 * h + 1);
  }
  return out;
}

double min_path_clearance(const SceneSpec& spec, const std::vector<Eigen::Vector2d>& pts) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Eigen::Vector2d a = pts[i - 1], b = pts[i];
    for (int k = 0; k <= 4; ++k) m = std::min(m, clearance(spec, a + (b - a) * (k / 4.0)));
  }
  return m;
}

// Point and unit tangent at arc length s.
std::pair<Eigen::Vector2d, Eigen::Vector2d> along(const std::vector<Eigen::Vector2d>& path, double s) {
  double acc = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Eigen::Vector2d d = path[i] - path[i - 1];
    const double len = d.norm();
    if (acc + len >= s || i + 1 == path.size()) {
      const double f = len > 0.0 ? std::clamp((s - acc) / len, 0.0, 1.0) : 0.0;
      return {path[i - 1] + f * d, len > 0.0 ? Eigen::Vector2d(d / len) : Eigen::Vector2d(1.0, 0.0)};
    }
    acc += len;
  }
  return {path.back(), Eigen::Vector2d(1.0, 0.0)};
}

Eigen::Matrix<double, kPoseEmbeddingDim, 3> gait_basis() {
  std::mt19937_64 rng(0x6a17b451ULL);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix<double, kPoseEmbeddingDim, 3> b;
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < kPoseEmbeddingDim; ++r) b(r, c) = n(rng);
    b.col(c).normalize();
  }
  return b;
}

}  // namespace

int SceneSpec::point_count() const {
  if (surface_density > 0.0) return static_cast<int>(std::lround(surface_density * surface_area()));
  return target_points;
}

double SceneSpec::surface_area() const {
  double a = 0.0;
  for (const auto& p : scene_surfaces(*this)) a += p.area();
  return a;
}

void SceneSpec::validate() const {
  if (!(extents.array() > 0.0).all() || !extents.allFinite()) throw std::invalid_argument("room extents must be positive");
  const auto inside = [&](const Box& b) {
    return (b.size.array() > 0.0).all() && (b.min().array() >= -1e-9).all() &&
           (b.max().array() <= extents.array() + 1e-9).all();
  };
  for (const auto& b : obstacles)
    if (!inside(b)) throw std::invalid_argument("obstacle lies outside the room");
  for (const auto& g : goals) {
    if (!inside(g.box)) throw std::invalid_argument("goal object '" + g.label + "' lies outside the room");
    for (const auto& b : obstacles)
      if (boxes_overlap(g.box, b)) throw std::invalid_argument("goal object '" + g.label + "' overlaps an obstacle");
  }
  for (std::size_t i = 0; i < goals.size(); ++i)
    for (std::size_t j = i + 1; j < goals.size(); ++j)
      if (boxes_overlap(goals[i].box, goals[j].box)) throw std::invalid_argument("goal objects overlap");
  if (point_count() < 512) throw std::invalid_argument("scene needs at least 512 points");
}

SceneSpec SceneSpec::random(std::uint64_t seed, int target_points) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SceneSpec spec;
  spec.target_points = target_points;
  spec.extents = {7.0 + 2.0 * unit(rng), 5.0 + 2.0 * unit(rng), 2.6};
  const double X = spec.extents.x(), Y = spec.extents.y();

  std::array<std::size_t, kGoalShapes.size()> order{};
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  constexpr double kGap = 0.05;
  constexpr double kSpacing = 0.9;
  for (std::size_t gi = 0; gi < 3; ++gi) {
    const LabelShape& shape = kGoalShapes[order[gi]];
    for (int attempt = 0; attempt < 200; ++attempt) {
      const int wall = static_cast<int>(unit(rng) * 4.0) % 4;
      Box box;
      box.size = (wall < 2) ? Eigen::Vector3d(shape.y, shape.x, shape.z) : Eigen::Vector3d(shape.x, shape.y, shape.z);
      box.center.z() = 0.5 * box.size.z();
      if (wall < 2) {
        box.center.x() = wall == 0 ? kGap + 0.5 * box.size.x() : X - kGap - 0.5 * box.size.x();
        box.center.y() = 0.3 + 0.5 * box.size.y() + unit(rng) * (Y - 0.6 - box.size.y());
      } else {
        box.center.y() = wall == 2 ? kGap + 0.5 * box.size.y() : Y - kGap - 0.5 * box.size.y();
        box.center.x() = 0.3 + 0.5 * box.size.x() + unit(rng) * (X - 0.6 - box.size.x());
      }
      bool ok = true;
      for (const auto& g : spec.goals) ok = ok && !boxes_overlap(box, g.box, kSpacing);
      if (ok) {
        spec.goals.push_back({shape.label, box});
        break;
      }
    }
  }
  const int obstacle_count = 2 + static_cast<int>(unit(rng) * 2.0);
  for (int oi = 0; oi < obstacle_count; ++oi) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      Box box;
      box.size = {0.4 + 0.6 * unit(rng), 0.4 + 0.6 * unit(rng), 0.4 + 0.8 * unit(rng)};
      box.center.x() = 1.0 + 0.5 * box.size.x() + unit(rng) * (X - 2.0 - box.size.x());
      box.center.y() = 1.0 + 0.5 * box.size.y() + unit(rng) * (Y - 2.0 - box.size.y());
      box.center.z() = 0.5 * box.size.z();
      bool ok = true;
      for (const auto& g : spec.goals) ok = ok && !boxes_overlap(box, g.box, kSpacing);
      for (const auto& o : spec.obstacles) ok = ok && !boxes_overlap(box, o, kSpacing);
      if (ok) {
        spec.obstacles.push_back(box);
        break;
      }
    }
  }
  spec.validate();
  return spec;
}

Eigen::Vector3d SurfacePatch::closest_point(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d d = p - origin;
  const double s = std::clamp(d.dot(u) / u.squaredNorm(), 0.0, 1.0);
  const double t = std::clamp(d.dot(v) / v.squaredNorm(), 0.0, 1.0);
  return origin + s * u + t * v;
}

double SurfacePatch::intersect(const Eigen::Vector3d& from, const Eigen::Vector3d& dir) const {
  const Eigen::Vector3d n = u.cross(v);
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-12) return -1.0;
  const double t = n.dot(origin - from) / denom;
  if (t <= 1e-9) return -1.0;
  const Eigen::Vector3d d = from + t * dir - origin;
  const double s = d.dot(u) / u.squaredNorm();
  const double w = d.dot(v) / v.squaredNorm();
  if (s < -1e-9 || s > 1.0 + 1e-9 || w < -1e-9 || w > 1.0 + 1e-9) return -1.0;
  return t;
}

std::vector<SurfacePatch> scene_surfaces(const SceneSpec& spec) {
  const double X = spec.extents.x(), Y = spec.extents.y(), H = spec.extents.z();
  std::vector<SurfacePatch> out;
  out.push_back({{0, 0, 0}, {X, 0, 0}, {0, Y, 0}});
  out.push_back({{0, 0, 0}, {0, Y, 0}, {0, 0, H}});
  out.push_back({{X, 0, 0}, {0, Y, 0}, {0, 0, H}});
  out.push_back({{0, 0, 0}, {X, 0, 0}, {0, 0, H}});
  out.push_back({{0, Y, 0}, {X, 0, 0}, {0, 0, H}});
  for (const auto& b : spec.obstacles) add_box_faces(b, out);
  for (const auto& g : spec.goals) add_box_faces(g.box, out);
  return out;
}

Eigen::Vector3d nearest_surface_point(const SceneSpec& spec, const Eigen::Vector3d& p) {
  Eigen::Vector3d best = p;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& patch : scene_surfaces(spec)) {
    const Eigen::Vector3d q = patch.closest_point(p);
    const double d = (q - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

double surface_distance(const SceneSpec& spec, const Eigen::Vector3d& p) {
  return (nearest_surface_point(spec, p) - p).norm();
}

ScenePointCloudd generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto patches = scene_surfaces(spec);
  const int total = spec.point_count();
  double area = 0.0;
  for (const auto& p : patches) area += p.area();

  std::vector<int> counts(patches.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const double quota = total * patches[i].area() / area;
    counts[i] = static_cast<int>(std::floor(quota));
    assigned += counts[i];
    remainders.emplace_back(quota - counts[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < total - assigned; ++k) ++counts[remainders[static_cast<std::size_t>(k)].second];

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointMatrixd pts(total, 3);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < patches.size(); ++i)
    for (int c = 0; c < counts[i]; ++c) {
      const double s = unit(rng);
      const double t = unit(rng);
      pts.row(row++) = (patches[i].origin + s * patches[i].u + t * patches[i].v).transpose();
    }
  return ScenePointCloudd(std::move(pts));
}

double clearance(const SceneSpec& spec, const Eigen::Vector2d& p) {
  double c = std::min({p.x(), spec.extents.x() - p.x(), p.y(), spec.extents.y() - p.y()});
  for (const Box* b : all_boxes(spec)) {
    const Eigen::Vector3d m = b->min(), M = b->max();
    const double dx = std::max({m.x() - p.x(), 0.0, p.x() - M.x()});
    const double dy = std::max({m.y() - p.y(), 0.0, p.y() - M.y()});
    c = std::min(c, std::hypot(dx, dy));
  }
  return c;
}

std::vector<Eigen::Vector2d> plan_path(const SceneSpec& spec, const Eigen::Vector2d& start, const Eigen::Vector2d& goal) {
  if (clearance(spec, start) < kAgentRadius) throw UnreachableGoal("start position is too close to an obstacle");
  if (clearance(spec, goal) < kAgentRadius) throw UnreachableGoal("goal position is too close to an obstacle");
  const int nx = static_cast<int>(std::floor(spec.extents.x() / kGridResolution));
  const int ny = static_cast<int>(std::floor(spec.extents.y() / kGridResolution));
  const auto center = [&](int id) {
    return Eigen::Vector2d((id % nx + 0.5) * kGridResolution, (id / nx + 0.5) * kGridResolution);
  };
  std::vector<char> free(static_cast<std::size_t>(nx * ny));
  for (int id = 0; id < nx * ny; ++id) free[static_cast<std::size_t>(id)] = clearance(spec, center(id)) >= kAgentRadius;

  // Nearest free cell reachable in a straight line from a continuous position.
  const auto attach = [&](const Eigen::Vector2d& p) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const int cx = static_cast<int>(p.x() / kGridResolution), cy = static_cast<int>(p.y() / kGridResolution);
    for (int j = std::max(0, cy - 3); j <= std::min(ny - 1, cy + 3); ++j)
      for (int i = std::max(0, cx - 3); i <= std::min(nx - 1, cx + 3); ++i) {
        const int id = j * nx + i;
        if (!free[static_cast<std::size_t>(id)]) continue;
        const double d = (center(id) - p).norm();
        if (d < best_d && segment_clear(spec, p, center(id), kMinClearance)) {
          best_d = d;
          best = id;
        }
      }
    if (best < 0) throw UnreachableGoal("position is not connected to the free-space grid");
    return best;
  };
  const int s_id = attach(start);
  const int g_id = attach(goal);

  const double diag = std::sqrt(2.0);
  const auto heuristic = [&](int id) {
    const double dx = std::abs(id % nx - g_id % nx), dy = std::abs(id / nx - g_id / nx);
    return (dx + dy) + (diag - 2.0) * std::min(dx, dy);
  };
  std::vector<double> cost(free.size(), std::numeric_limits<double>::infinity());
  std::vector<int> parent(free.size(), -1);
  std::vector<char> closed(free.size(), 0);
  using Entry = std::tuple<double, double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  cost[static_cast<std::size_t>(s_id)] = 0.0;
  open.emplace(heuristic(s_id), heuristic(s_id), s_id);
  bool found = false;
  while (!open.empty()) {
    const auto [f, h, id] = open.top();
    open.pop();
    if (closed[static_cast<std::size_t>(id)]) continue;
    closed[static_cast<std::size_t>(id)] = 1;
    if (id == g_id) {
      found = true;
      break;
    }
    const int x = id % nx, y = id / nx;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int X = x + dx, Y = y + dy;
        if (X < 0 || Y < 0 || X >= nx || Y >= ny) continue;
        const int nid = Y * nx + X;
        if (!free[static_cast<std::size_t>(nid)] || closed[static_cast<std::size_t>(nid)]) continue;
        if (dx != 0 && dy != 0 &&
            (!free[static_cast<std::size_t>(y * nx + X)] || !free[static_cast<std::size_t>(Y * nx + x)]))
          continue;
        const double c = cost[static_cast<std::size_t>(id)] + ((dx != 0 && dy != 0) ? diag : 1.0);
        if (c < cost[static_cast<std::size_t>(nid)]) {
          cost[static_cast<std::size_t>(nid)] = c;
          parent[static_cast<std::size_t>(nid)] = id;
          open.emplace(c + heuristic(nid), heuristic(nid), nid);
        }
      }
  }
  if (!found) throw UnreachableGoal("no collision-free path to the goal");

  std::vector<Eigen::Vector2d> raw{goal};
  for (int id = g_id; id >= 0; id = parent[static_cast<std::size_t>(id)]) raw.push_back(center(id));
  raw.push_back(start);
  std::reverse(raw.begin(), raw.end());

  // String pulling against the agent radius.
  std::vector<Eigen::Vector2d> pulled{raw.front()};
  std::size_t i = 0;
  while (i + 1 < raw.size()) {
    std::size_t j = i + 1;
    while (j + 1 < raw.size() && segment_clear(spec, raw[i], raw[j + 1], kAgentRadius)) ++j;
    pulled.push_back(raw[j]);
    i = j;
  }

  const auto dense = resample(pulled, 0.05);
  for (int half : {4, 2, 1, 0}) {
    auto smooth = moving_average(dense, half);
    if (min_path_clearance(spec, smooth) >= kMinClearance + 0.01) return smooth;
  }
  throw UnreachableGoal("path clearance below the agent limit");
}

bool EpisodeRecord::operator==(const EpisodeRecord& other) const {
  return id == other.id && scene_id == other.scene_id && observed == other.observed &&
         gaze.points == other.gaze.points && future == other.future && goal_label == other.goal_label &&
         goal_center == other.goal_center;
}

PoseEmbedding<double> gait_embedding(double phase, double amplitude) {
  static const Eigen::Matrix<double, kPoseEmbeddingDim, 3> basis = gait_basis();
  return amplitude * (std::sin(phase) * basis.col(0) + std::cos(phase) * basis.col(1) +
                      0.5 * std::sin(2.0 * phase) * basis.col(2));
}

PoseEmbedding<double> interaction_embedding(const std::string& label) {
  std::mt19937_64 rng(fnv1a(label));
  std::normal_distribution<double> n(0.0, 1.0);
  PoseEmbedding<double> p;
  for (int i = 0; i < kPoseEmbeddingDim; ++i) p[i] = n(rng);
  return 1.5 * p.normalized();
}

EpisodeRecord generate_episode(const SceneSpec& spec, std::uint64_t seed, const HorizonConfig& horizon,
                               const std::string& scene_id) {
  horizon.validate();
  spec.validate();
  if (spec.goals.empty()) throw std::invalid_argument("scene has no goal objects");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const GoalObject& goal = spec.goals[static_cast<std::size_t>(unit(rng) * spec.goals.size()) % spec.goals.size()];
  std::vector<Eigen::Vector2d> approaches;
  {
    const Eigen::Vector3d m = goal.box.min(), M = goal.box.max(), c = goal.box.center;
    const double off = kAgentRadius + 0.15;
    for (const Eigen::Vector2d& p : {Eigen::Vector2d(m.x() - off, c.y()), Eigen::Vector2d(M.x() + off, c.y()),
                                    Eigen::Vector2d(c.x(), m.y() - off), Eigen::Vector2d(c.x(), M.y() + off)})
      if (clearance(spec, p) >= kAgentRadius + 0.05) approaches.push_back(p);
  }
  if (approaches.empty()) throw UnreachableGoal("goal object '" + goal.label + "' has no free approach side");
  const Eigen::Vector2d dest = approaches[static_cast<std::size_t>(unit(rng) * approaches.size()) % approaches.size()];
  const double speed = 0.9 + 0.4 * unit(rng);

  std::vector<Eigen::Vector2d> path;
  for (int attempt = 0; attempt < kStartRetries && path.empty(); ++attempt) {
    Eigen::Vector2d start;
    bool placed = false;
    for (int tries = 0; tries < 1000 && !placed; ++tries) {
      start = {unit(rng) * spec.extents.x(), unit(rng) * spec.extents.y()};
      placed = clearance(spec, start) >= kAgentRadius + 0.05;
    }
    if (!placed) continue;
    try {
      auto candidate = plan_path(spec, start, dest);
      const double len = polyline_length(candidate);
      if (len >= kMinPathLength && len <= kMaxPathLength) path = std::move(candidate);
    } catch (const UnreachableGoal&) {
    }
  }
  if (path.empty()) throw UnreachableGoal("no reachable start for goal '" + goal.label + "'");

  const double length = polyline_length(path);
  const int frames = horizon.total();
  MotionSequenced motion;
  motion.frame_rate = horizon.frame_rate;
  const PoseEmbedding<double> interact = interaction_embedding(goal.label);
  for (int k = 0; k < frames; ++k) {
    const double s = std::min(speed * k / horizon.frame_rate, length);
    const auto [pos, tangent] = along(path, std::min(s, length - 1e-6));
    PoseStated pose;
    pose.translation = {pos.x(), pos.y(), 0.0};
    pose.orientation =
        canonical_quaternion(Eigen::Quaterniond(Eigen::AngleAxisd(std::atan2(tangent.y(), tangent.x()),
                                                                  Eigen::Vector3d::UnitZ())));
    const double ramp = std::clamp(1.0 - (length - s) / kInteractionRamp, 0.0, 1.0);
    pose.pose_embedding = (1.0 - ramp) * gait_embedding(2.0 * kPi * s / kStrideLength, 1.0) + ramp * interact;
    motion.frames.push_back(pose);
  }

  EpisodeRecord ep;
  ep.scene_id = scene_id;
  ep.goal_label = goal.label;
  ep.goal_center = goal.box.center;
  ep.observed.frame_rate = ep.future.frame_rate = horizon.frame_rate;
  ep.observed.frames.assign(motion.frames.begin(), motion.frames.begin() + horizon.observed_frames);
  ep.future.frames.assign(motion.frames.begin() + horizon.observed_frames, motion.frames.end());

  const auto patches = scene_surfaces(spec);
  std::normal_distribution<double> noise(0.0, kGazeNoise);
  ep.gaze.points.resize(horizon.observed_frames, 3);
  for (int k = 0; k < horizon.observed_frames; ++k) {
    const Eigen::Vector3d head = body_joints(ep.observed.frames[static_cast<std::size_t>(k)]).row(kHeadJoint);
    const Eigen::Vector3d dir = (goal.box.center - head).normalized();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& patch : patches) {
      const double t = patch.intersect(head, dir);
      if (t > 0.0) best = std::min(best, t);
    }
    const Eigen::Vector3d hit = std::isfinite(best) ? Eigen::Vector3d(head + best * dir) : goal.box.center;
    const Eigen::Vector3d noisy = hit + Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
    ep.gaze.points.row(k) = nearest_surface_point(spec, noisy).transpose();
  }
  return ep;
}

}  // namespace sif3d
