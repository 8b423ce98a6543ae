#pragma once

#include "sif3d/core.hpp"
#include "sif3d/synthworld.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sif3d {

class CorruptDataset : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SceneRecord {
  std::string id;
  std::uint64_t seed = 0;
  SceneSpec spec;
  ScenePointCloudd cloud;
};

struct Dataset {
  std::uint64_t seed = 0;
  HorizonConfig horizon;
  std::vector<SceneRecord> scenes;
  std::vector<EpisodeRecord> episodes;

  const SceneRecord& scene(const std::string& id) const;
};

struct BenchmarkSpec {
  int scenes = 8;
  int episodes_per_scene = 50;
  int points = 4096;
  HorizonConfig horizon;
};

/// Pure function of (spec, seed). Episode e of scene s draws its randomness
/// from (seed, s, e) only, so any generation order gives the same result.
Dataset generate_dataset(const BenchmarkSpec& spec, std::uint64_t seed);

/// Seed for one (scene, episode, attempt) triple.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Directory with manifest.json, scenes/<id>.pcd and episodes/<id>.json.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Verifies every content hash; throws CorruptDataset on any mismatch.
Dataset read_dataset(const std::filesystem::path& dir);
/// SHA-256 of the manifest file, which covers every content hash.
std::string dataset_hash(const std::filesystem::path& dir);

std::string sha256_hex(const std::string& bytes);

/// Cloud file: "SIF3DPCD", u32 version, u64 count, u64 seed, 8-byte units
/// tag, then x, y and z arrays of little-endian doubles.
std::string encode_cloud(const ScenePointCloudd& cloud, std::uint64_t seed);
ScenePointCloudd decode_cloud(const std::string& bytes, std::uint64_t* seed = nullptr);

std::string episode_to_json(const EpisodeRecord& ep);
EpisodeRecord episode_from_json(const std::string& text);

/// Indices of training and held-out episodes: within each scene, every fifth
/// episode is held out.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
Split split_dataset(const Dataset& data);

/// Replaces every cloud with a fresh sample of `points` points on the same
/// surfaces (point-cloud size sweeps).
Dataset resample_clouds(const Dataset& data, int points);

}  // namespace sif3d
