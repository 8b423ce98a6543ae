#include "oracles.hpp"

#include "sif3d/dataset.hpp"
#include "sif3d/synthworld.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>

using namespace sif3d;
using namespace sif3d::testing;
namespace fs = std::filesystem;

namespace {

const Dataset& default_benchmark() {
  static const Dataset data = generate_dataset(BenchmarkSpec{}, 0);
  return data;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sif3d_synthworld_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("scene generation is deterministic") {
  const SceneSpec spec = SceneSpec::random(11);
  const ScenePointCloudd a = generate_scene(spec, 5), b = generate_scene(spec, 5);
  CHECK(a.points == b.points);
  CHECK(generate_scene(spec, 6).points != a.points);
  CHECK(SceneSpec::random(11) == spec);
}

TEST_CASE("default scenes hold exactly 4096 points") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const SceneSpec spec = SceneSpec::random(s);
    CHECK(spec.target_points == 4096);
    CHECK(generate_scene(spec, s).size() == 4096);
  }
}

TEST_CASE("an empty room samples only its shell") {
  SceneSpec spec;
  const ScenePointCloudd cloud = generate_scene(spec, 1);
  REQUIRE(cloud.size() == 4096);
  const Eigen::Vector3d e = spec.extents;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d p = cloud.points.row(i).transpose();
    const double d = std::min({std::abs(p.z()), std::abs(p.x()), std::abs(p.x() - e.x()), std::abs(p.y()),
                               std::abs(p.y() - e.y())});
    REQUIRE(d < 1e-9);
    REQUIRE(p.z() <= e.z() + 1e-9);
  }
}

TEST_CASE("sampled points lie on scene surfaces") {
  const SceneSpec spec = SceneSpec::random(3);
  const ScenePointCloudd cloud = generate_scene(spec, 3);
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    REQUIRE(oracle_surface_distance(spec, cloud.points.row(i).transpose()) < 1e-9);
}

TEST_CASE("infeasible scene specs are rejected") {
  SceneSpec overlap;
  Box b;
  b.center = {2, 2, 0.5};
  overlap.obstacles.push_back(b);
  overlap.goals.push_back({"table", b});
  CHECK_THROWS_AS(generate_scene(overlap, 0), std::invalid_argument);

  SceneSpec outside;
  b.center = {-1, 2, 0.5};
  outside.obstacles.push_back(b);
  CHECK_THROWS_AS(generate_scene(outside, 0), std::invalid_argument);

  SceneSpec sparse;
  sparse.target_points = 100;
  CHECK_THROWS_AS(generate_scene(sparse, 0), std::invalid_argument);
}

TEST_CASE("a path across an empty room is straight") {
  SceneSpec spec;
  const std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> cases = {
      {{1.0, 1.0}, {7.0, 5.0}}, {{1.2, 3.0}, {6.5, 3.0}}, {{4.0, 0.8}, {4.3, 5.1}}, {{6.9, 1.1}, {1.3, 4.4}}};
  for (const auto& [start, goal] : cases) {
    const auto path = plan_path(spec, start, goal);
    REQUIRE(path.size() >= 2);
    CHECK((path.front() - start).norm() < 1e-9);
    CHECK((path.back() - goal).norm() < 1e-9);
    const Eigen::Vector2d dir = (goal - start).normalized();
    double worst = 0.0;
    for (const auto& p : path) {
      const Eigen::Vector2d d = p - start;
      worst = std::max(worst, std::abs(d.x() * dir.y() - d.y() * dir.x()));
    }
    CHECK(worst < 0.05);
  }
}

TEST_CASE("planned paths keep their clearance") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const SceneSpec spec = SceneSpec::random(s);
    std::mt19937_64 rng(s);
    int planned = 0;
    for (int trial = 0; trial < 200 && planned < 5; ++trial) {
      const Eigen::Vector2d a(uniform(rng, 0, spec.extents.x()), uniform(rng, 0, spec.extents.y()));
      const Eigen::Vector2d b(uniform(rng, 0, spec.extents.x()), uniform(rng, 0, spec.extents.y()));
      if (oracle_clearance(spec, a.x(), a.y()) < kAgentRadius || oracle_clearance(spec, b.x(), b.y()) < kAgentRadius)
        continue;
      std::vector<Eigen::Vector2d> path;
      try {
        path = plan_path(spec, a, b);
      } catch (const UnreachableGoal&) {
        continue;
      }
      ++planned;
      for (const auto& p : path) REQUIRE(oracle_clearance(spec, p.x(), p.y()) >= kMinClearance);
    }
    CHECK(planned > 0);
  }
}

TEST_CASE("blocked goals are unreachable") {
  SceneSpec spec;
  Box wall;
  wall.center = {4.0, 3.0, 1.0};
  wall.size = {0.2, 6.0, 2.0};
  spec.obstacles.push_back(wall);
  CHECK_THROWS_AS(plan_path(spec, {1.0, 3.0}, {7.0, 3.0}), UnreachableGoal);
  CHECK_THROWS_AS(plan_path(spec, {4.0, 3.0}, {7.0, 3.0}), UnreachableGoal);
}

TEST_CASE("every default-benchmark episode passes the clearance and surface oracles") {
  const Dataset& d = default_benchmark();
  REQUIRE(d.scenes.size() == 8);
  REQUIRE(d.episodes.size() == 400);
  for (const auto& ep : d.episodes) {
    const SceneSpec& spec = d.scene(ep.scene_id).spec;
    REQUIRE(ep.observed.size() == static_cast<std::size_t>(d.horizon.observed_frames));
    REQUIRE(ep.future.size() == static_cast<std::size_t>(d.horizon.future_frames));
    REQUIRE(ep.gaze.size() == d.horizon.observed_frames);
    for (const auto* seq : {&ep.observed, &ep.future})
      for (const auto& f : seq->frames) REQUIRE(oracle_clearance(spec, f.translation.x(), f.translation.y()) >= kMinClearance);
    for (Eigen::Index k = 0; k < ep.gaze.points.rows(); ++k)
      REQUIRE(oracle_surface_distance(spec, ep.gaze.points.row(k).transpose()) <= 1e-6);
    bool known_goal = false;
    for (const auto& g : spec.goals) known_goal = known_goal || g.label == ep.goal_label;
    REQUIRE(known_goal);
  }
}

TEST_CASE("gaze at the last observed frame is informative about the destination") {
  const Dataset& d = default_benchmark();
  std::mt19937_64 rng(2024);
  int informative = 0;
  for (const auto& ep : d.episodes) {
    const SceneSpec& spec = d.scene(ep.scene_id).spec;
    const Eigen::Vector3d dest = ep.future.frames.back().translation;
    const Eigen::Vector3d gaze = ep.gaze.points.bottomRows(1).transpose();
    Eigen::Vector3d other;
    do {
      other = {uniform(rng, 0, spec.extents.x()), uniform(rng, 0, spec.extents.y()), dest.z()};
    } while (oracle_clearance(spec, other.x(), other.y()) < kAgentRadius);
    if ((gaze - dest).norm() < (gaze - other).norm()) ++informative;
  }
  MESSAGE("informative episodes: " << informative << " / " << d.episodes.size());
  CHECK(informative >= 0.9 * static_cast<double>(d.episodes.size()));
}

TEST_CASE("dataset generation is a pure function of its seed") {
  BenchmarkSpec spec;
  spec.scenes = 2;
  spec.episodes_per_scene = 6;
  spec.points = 512;
  const Dataset a = generate_dataset(spec, 9), b = generate_dataset(spec, 9);
  REQUIRE(a.episodes.size() == 12);
  for (std::size_t i = 0; i < a.episodes.size(); ++i) CHECK(a.episodes[i] == b.episodes[i]);
  for (std::size_t s = 0; s < a.scenes.size(); ++s) CHECK(a.scenes[s].cloud.points == b.scenes[s].cloud.points);
  CHECK_FALSE(generate_dataset(spec, 10).episodes[0] == a.episodes[0]);

  // Fewer scenes or episodes reproduce the shared prefix.
  BenchmarkSpec shorter = spec;
  shorter.scenes = 1;
  shorter.episodes_per_scene = 3;
  const Dataset c = generate_dataset(shorter, 9);
  for (std::size_t i = 0; i < c.episodes.size(); ++i) CHECK(c.episodes[i] == a.episodes[i]);
  CHECK(c.scenes[0].cloud.points == a.scenes[0].cloud.points);
}

TEST_CASE("episodes generated out of order agree") {
  const SceneSpec spec = SceneSpec::random(4);
  const HorizonConfig h;
  std::vector<EpisodeRecord> forward, backward(6);
  for (std::uint64_t s = 0; s < 6; ++s) forward.push_back(generate_episode(spec, 1000 + s, h));
  for (int s = 5; s >= 0; --s) backward[static_cast<std::size_t>(s)] = generate_episode(spec, 1000 + static_cast<std::uint64_t>(s), h);
  for (std::size_t i = 0; i < 6; ++i) CHECK(forward[i] == backward[i]);
}

TEST_CASE("datasets round-trip through disk") {
  BenchmarkSpec spec;
  spec.scenes = 2;
  spec.episodes_per_scene = 5;
  spec.points = 600;
  const Dataset d = generate_dataset(spec, 21);
  const fs::path dir = scratch("roundtrip");
  write_dataset(d, dir);
  const Dataset back = read_dataset(dir);
  CHECK(back.seed == d.seed);
  CHECK(back.horizon == d.horizon);
  REQUIRE(back.episodes.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(back.episodes[i] == d.episodes[i]);
  REQUIRE(back.scenes.size() == 2);
  for (std::size_t s = 0; s < 2; ++s) {
    CHECK(back.scenes[s].cloud.points == d.scenes[s].cloud.points);
    CHECK(back.scenes[s].spec == d.scenes[s].spec);
    CHECK(back.scenes[s].seed == d.scenes[s].seed);
  }

  std::ifstream in(dir / "manifest.json");
  const nlohmann::json manifest = nlohmann::json::parse(in);
  CHECK(manifest.at("episode_count").get<std::size_t>() == d.episodes.size());
  CHECK(manifest.at("episodes").size() == d.episodes.size());

  const fs::path again = scratch("roundtrip_again");
  write_dataset(d, again);
  CHECK(dataset_hash(dir) == dataset_hash(again));
}

TEST_CASE("damaged dataset files are detected") {
  BenchmarkSpec spec;
  spec.scenes = 1;
  spec.episodes_per_scene = 3;
  spec.points = 512;
  const Dataset d = generate_dataset(spec, 22);
  const fs::path dir = scratch("damaged");
  write_dataset(d, dir);

  const fs::path cloud = dir / "scenes" / (d.scenes[0].id + ".pcd");
  REQUIRE(fs::exists(cloud));
  const auto size = fs::file_size(cloud);
  fs::resize_file(cloud, size / 2);
  CHECK_THROWS_AS(read_dataset(dir), CorruptDataset);

  write_dataset(d, dir);
  const fs::path ep = dir / "episodes" / (d.episodes[1].id + ".json");
  REQUIRE(fs::exists(ep));
  fs::resize_file(ep, fs::file_size(ep) - 10);
  CHECK_THROWS_AS(read_dataset(dir), CorruptDataset);

  CHECK_THROWS_AS(decode_cloud("SIF3DPCD"), CorruptDataset);
  CHECK_THROWS_AS(episode_from_json("{"), CorruptDataset);
}

TEST_CASE("cloud encoding round-trips") {
  Rng rng(5);
  const ScenePointCloudd cloud(random_points(rng, 33));
  std::uint64_t seed = 0;
  const ScenePointCloudd back = decode_cloud(encode_cloud(cloud, 77), &seed);
  CHECK(back.points == cloud.points);
  CHECK(seed == 77);
}
