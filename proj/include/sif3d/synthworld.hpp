#pragma once

#include "sif3d/core.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sif3d {

/// Axis-aligned box resting on the floor; `center` is its volumetric center.
struct Box {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();

  Eigen::Vector3d min() const { return center - 0.5 * size; }
  Eigen::Vector3d max() const { return center + 0.5 * size; }
  bool operator==(const Box&) const = default;
};

struct GoalObject {
  std::string label;
  Box box;
  bool operator==(const GoalObject&) const = default;
};

/// Room spanning [0, extents.x] x [0, extents.y] x [0, extents.z]; floor and
/// four walls, no ceiling.
struct SceneSpec {
  Eigen::Vector3d extents{8.0, 6.0, 2.6};
  std::vector<Box> obstacles;
  std::vector<GoalObject> goals;
  /// Points per square meter; when positive it overrides `target_points`.
  double surface_density = 0.0;
  int target_points = 4096;

  int point_count() const;
  double surface_area() const;
  void validate() const;
  bool operator==(const SceneSpec&) const = default;

  /// Procedural furnished room.
  static SceneSpec random(std::uint64_t seed, int target_points = 4096);
};

/// Planar rectangle origin + s*u + t*v, s, t in [0, 1].
struct SurfacePatch {
  Eigen::Vector3d origin;
  Eigen::Vector3d u;
  Eigen::Vector3d v;

  double area() const { return u.cross(v).norm(); }
  Eigen::Vector3d closest_point(const Eigen::Vector3d& p) const;
  /// Ray parameter of the hit, or a negative value when the ray misses.
  double intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const;
};

std::vector<SurfacePatch> scene_surfaces(const SceneSpec& spec);
/// Distance from `p` to the nearest scene surface.
double surface_distance(const SceneSpec& spec, const Eigen::Vector3d& p);
Eigen::Vector3d nearest_surface_point(const SceneSpec& spec, const Eigen::Vector3d& p);

/// Uniform surface sampling with exactly `spec.point_count()` points, split
/// across patches in proportion to area (largest remainder).
ScenePointCloudd generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Horizontal distance from a floor position to the nearest wall or box.
double clearance(const SceneSpec& spec, const Eigen::Vector2d& p);

inline constexpr double kGridResolution = 0.1;
inline constexpr double kAgentRadius = 0.3;
inline constexpr double kMinClearance = 0.25;

/// Collision-free smoothed path on the floor plane. Throws UnreachableGoal
/// when the grid search fails.
std::vector<Eigen::Vector2d> plan_path(const SceneSpec& spec, const Eigen::Vector2d& start, const Eigen::Vector2d& goal);

class UnreachableGoal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpisodeRecord {
  std::string id;
  std::string scene_id;
  MotionSequenced observed;
  GazeSequenced gaze;
  MotionSequenced future;
  std::string goal_label;
  Eigen::Vector3d goal_center = Eigen::Vector3d::Zero();

  bool operator==(const EpisodeRecord& other) const;
};

/// Goal-directed walk with gaze toward the goal. `seed` selects goal, start,
/// speed and noise.
EpisodeRecord generate_episode(const SceneSpec& spec, std::uint64_t seed, const HorizonConfig& horizon,
                               const std::string& scene_id = "scene0");

/// Fixed embedding basis of the walking gait and goal interactions.
PoseEmbedding<double> gait_embedding(double phase, double amplitude);
PoseEmbedding<double> interaction_embedding(const std::string& label);

}  // namespace sif3d
