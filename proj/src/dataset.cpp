#include "sif3d/dataset.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sif3d {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr char kCloudMagic[8] = {'S', 'I', 'F', '3', 'D', 'P', 'C', 'D'};
constexpr std::uint32_t kCloudVersion = 1;
constexpr int kFormatVersion = 1;
constexpr int kEpisodeAttempts = 10;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw CorruptDataset("cloud file is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw CorruptDataset("cloud file is truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptDataset("missing dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d json_vec(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json box_json(const Box& b) { return json{{"center", vec_json(b.center)}, {"size", vec_json(b.size)}}; }
Box json_box(const json& j) { return {json_vec(j.at("center")), json_vec(j.at("size"))}; }

json spec_json(const SceneSpec& s) {
  json j;
  j["extents"] = vec_json(s.extents);
  j["obstacles"] = json::array();
  for (const auto& b : s.obstacles) j["obstacles"].push_back(box_json(b));
  j["goals"] = json::array();
  for (const auto& g : s.goals) {
    json gj = box_json(g.box);
    gj["label"] = g.label;
    j["goals"].push_back(gj);
  }
  j["surface_density"] = s.surface_density;
  j["target_points"] = s.target_points;
  return j;
}

SceneSpec json_spec(const json& j) {
  SceneSpec s;
  s.extents = json_vec(j.at("extents"));
  for (const auto& b : j.at("obstacles")) s.obstacles.push_back(json_box(b));
  for (const auto& g : j.at("goals")) s.goals.push_back({g.at("label").get<std::string>(), json_box(g)});
  s.surface_density = j.at("surface_density").get<double>();
  s.target_points = j.at("target_points").get<int>();
  return s;
}

json frames_json(const MotionSequenced& m) {
  json arr = json::array();
  for (const auto& f : m.frames) {
    json p = json::array();
    for (int i = 0; i < kPoseEmbeddingDim; ++i) p.push_back(f.pose_embedding[i]);
    arr.push_back(json{{"t", vec_json(f.translation)},
                       {"q", json::array({f.orientation.w(), f.orientation.x(), f.orientation.y(), f.orientation.z()})},
                       {"p", p}});
  }
  return arr;
}

MotionSequenced json_frames(const json& arr, double rate) {
  MotionSequenced m;
  m.frame_rate = rate;
  for (const auto& f : arr) {
    PoseStated s;
    s.translation = json_vec(f.at("t"));
    const auto& q = f.at("q");
    s.orientation = Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                                       q.at(3).get<double>());
    const auto& p = f.at("p");
    if (p.size() != kPoseEmbeddingDim) throw CorruptDataset("pose embedding has the wrong length");
    for (int i = 0; i < kPoseEmbeddingDim; ++i) s.pose_embedding[i] = p.at(i).get<double>();
    m.frames.push_back(s);
  }
  return m;
}

std::string scene_file(const std::string& id) { return "scenes/" + id + ".pcd"; }
std::string episode_file(const std::string& id) { return "episodes/" + id + ".json"; }

}  // namespace

const SceneRecord& Dataset::scene(const std::string& id) const {
  for (const auto& s : scenes)
    if (s.id == id) return s;
  throw std::out_of_range("unknown scene id " + id);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 over the concatenated words
  std::uint64_t h = seed;
  for (std::uint64_t w : {a, b, c}) {
    h += 0x9e3779b97f4a7c15ULL + w;
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    h = z ^ (z >> 31);
  }
  return h;
}

Dataset generate_dataset(const BenchmarkSpec& spec, std::uint64_t seed) {
  spec.horizon.validate();
  if (spec.scenes < 1 || spec.episodes_per_scene < 1) throw std::invalid_argument("benchmark needs scenes and episodes");
  Dataset data;
  data.seed = seed;
  data.horizon = spec.horizon;
  for (int s = 0; s < spec.scenes; ++s) {
    SceneRecord rec;
    std::ostringstream id;
    id << "scene" << std::setw(2) << std::setfill('0') << s;
    rec.id = id.str();
    rec.seed = derive_seed(seed, 2, static_cast<std::uint64_t>(s));
    rec.spec = SceneSpec::random(derive_seed(seed, 1, static_cast<std::uint64_t>(s)), spec.points);
    rec.cloud = generate_scene(rec.spec, rec.seed);
    for (int e = 0; e < spec.episodes_per_scene; ++e) {
      bool done = false;
      for (int attempt = 0; attempt < kEpisodeAttempts && !done; ++attempt) {
        try {
          EpisodeRecord ep = generate_episode(
              rec.spec, derive_seed(seed, 3, static_cast<std::uint64_t>(s) * 100000 + e, attempt), spec.horizon,
              rec.id);
          std::ostringstream eid;
          eid << rec.id << "_ep" << std::setw(3) << std::setfill('0') << e;
          ep.id = eid.str();
          data.episodes.push_back(std::move(ep));
          done = true;
        } catch (const UnreachableGoal&) {
        }
      }
      if (!done) throw UnreachableGoal("could not generate episode " + std::to_string(e) + " of " + rec.id);
    }
    data.scenes.push_back(std::move(rec));
  }
  return data;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string encode_cloud(const ScenePointCloudd& cloud, std::uint64_t seed) {
  std::string out(kCloudMagic, sizeof(kCloudMagic));
  put_u32(out, kCloudVersion);
  put_u64(out, static_cast<std::uint64_t>(cloud.size()));
  put_u64(out, seed);
  const char units[8] = {'m', 'e', 't', 'e', 'r', 's', 0, 0};
  out.append(units, sizeof(units));
  for (int axis = 0; axis < 3; ++axis)
    for (Eigen::Index i = 0; i < cloud.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(cloud.points(i, axis)));
  return out;
}

ScenePointCloudd decode_cloud(const std::string& bytes, std::uint64_t* seed) {
  if (bytes.size() < sizeof(kCloudMagic) || std::memcmp(bytes.data(), kCloudMagic, sizeof(kCloudMagic)) != 0)
    throw CorruptDataset("not a point-cloud file");
  std::size_t pos = sizeof(kCloudMagic);
  if (get_u32(bytes, pos) != kCloudVersion) throw CorruptDataset("unsupported point-cloud version");
  const std::uint64_t count = get_u64(bytes, pos);
  const std::uint64_t file_seed = get_u64(bytes, pos);
  if (pos + 8 > bytes.size() || std::string(bytes.data() + pos) != "meters") throw CorruptDataset("unknown cloud units");
  pos += 8;
  if (bytes.size() != pos + 24 * count) throw CorruptDataset("cloud file size does not match its point count");
  PointMatrixd pts(static_cast<Eigen::Index>(count), 3);
  for (int axis = 0; axis < 3; ++axis)
    for (Eigen::Index i = 0; i < pts.rows(); ++i) pts(i, axis) = std::bit_cast<double>(get_u64(bytes, pos));
  if (seed) *seed = file_seed;
  try {
    return ScenePointCloudd(std::move(pts));
  } catch (const std::invalid_argument& e) {
    throw CorruptDataset(e.what());
  }
}

std::string episode_to_json(const EpisodeRecord& ep) {
  json j;
  j["format"] = "sif3d-episode";
  j["version"] = kFormatVersion;
  j["id"] = ep.id;
  j["scene"] = ep.scene_id;
  j["goal_label"] = ep.goal_label;
  j["goal_center"] = vec_json(ep.goal_center);
  j["frame_rate"] = ep.observed.frame_rate;
  j["observed"] = frames_json(ep.observed);
  j["future"] = frames_json(ep.future);
  j["gaze"] = json::array();
  for (Eigen::Index k = 0; k < ep.gaze.size(); ++k) j["gaze"].push_back(vec_json(ep.gaze.points.row(k).transpose()));
  return j.dump(1);
}

EpisodeRecord episode_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "sif3d-episode" || j.at("version").get<int>() != kFormatVersion)
      throw CorruptDataset("not an episode record");
    EpisodeRecord ep;
    ep.id = j.at("id").get<std::string>();
    ep.scene_id = j.at("scene").get<std::string>();
    ep.goal_label = j.at("goal_label").get<std::string>();
    ep.goal_center = json_vec(j.at("goal_center"));
    const double rate = j.at("frame_rate").get<double>();
    ep.observed = json_frames(j.at("observed"), rate);
    ep.future = json_frames(j.at("future"), rate);
    const auto& gaze = j.at("gaze");
    ep.gaze.points.resize(static_cast<Eigen::Index>(gaze.size()), 3);
    for (std::size_t k = 0; k < gaze.size(); ++k)
      ep.gaze.points.row(static_cast<Eigen::Index>(k)) = json_vec(gaze.at(k)).transpose();
    return ep;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDataset(std::string("malformed episode record: ") + e.what());
  }
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir / "scenes");
  fs::create_directories(dir / "episodes");
  json manifest;
  manifest["format"] = "sif3d-dataset";
  manifest["version"] = kFormatVersion;
  manifest["seed"] = data.seed;
  manifest["horizon"] = json{{"observed_frames", data.horizon.observed_frames},
                             {"future_frames", data.horizon.future_frames},
                             {"frame_rate", data.horizon.frame_rate}};
  manifest["scenes"] = json::array();
  for (const auto& s : data.scenes) {
    const std::string bytes = encode_cloud(s.cloud, s.seed);
    write_file(dir / scene_file(s.id), bytes);
    manifest["scenes"].push_back(json{{"id", s.id},
                                      {"seed", s.seed},
                                      {"file", scene_file(s.id)},
                                      {"points", s.cloud.size()},
                                      {"sha256", sha256_hex(bytes)},
                                      {"spec", spec_json(s.spec)}});
  }
  manifest["episodes"] = json::array();
  for (const auto& ep : data.episodes) {
    const std::string text = episode_to_json(ep);
    write_file(dir / episode_file(ep.id), text);
    manifest["episodes"].push_back(
        json{{"id", ep.id}, {"scene", ep.scene_id}, {"file", episode_file(ep.id)}, {"sha256", sha256_hex(text)}});
  }
  manifest["episode_count"] = data.episodes.size();
  write_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

Dataset read_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDataset(std::string("malformed manifest: ") + e.what());
  }
  try {
    if (manifest.at("format") != "sif3d-dataset" || manifest.at("version").get<int>() != kFormatVersion)
      throw CorruptDataset("not a dataset manifest");
    Dataset data;
    data.seed = manifest.at("seed").get<std::uint64_t>();
    const auto& h = manifest.at("horizon");
    data.horizon.observed_frames = h.at("observed_frames").get<int>();
    data.horizon.future_frames = h.at("future_frames").get<int>();
    data.horizon.frame_rate = h.at("frame_rate").get<double>();
    for (const auto& s : manifest.at("scenes")) {
      const std::string bytes = read_file(dir / s.at("file").get<std::string>());
      if (sha256_hex(bytes) != s.at("sha256").get<std::string>())
        throw CorruptDataset("hash mismatch for " + s.at("file").get<std::string>());
      SceneRecord rec;
      rec.id = s.at("id").get<std::string>();
      rec.cloud = decode_cloud(bytes, &rec.seed);
      rec.spec = json_spec(s.at("spec"));
      data.scenes.push_back(std::move(rec));
    }
    for (const auto& e : manifest.at("episodes")) {
      const std::string text = read_file(dir / e.at("file").get<std::string>());
      if (sha256_hex(text) != e.at("sha256").get<std::string>())
        throw CorruptDataset("hash mismatch for " + e.at("file").get<std::string>());
      EpisodeRecord ep = episode_from_json(text);
      if (ep.observed.size() != static_cast<std::size_t>(data.horizon.observed_frames) ||
          ep.future.size() != static_cast<std::size_t>(data.horizon.future_frames) ||
          ep.gaze.size() != data.horizon.observed_frames)
        throw CorruptDataset("episode " + ep.id + " does not match the dataset horizon");
      data.episodes.push_back(std::move(ep));
    }
    if (manifest.at("episode_count").get<std::size_t>() != data.episodes.size())
      throw CorruptDataset("manifest episode count does not match its entries");
    return data;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDataset(std::string("malformed manifest: ") + e.what());
  }
}

std::string dataset_hash(const fs::path& dir) { return sha256_hex(read_file(dir / "manifest.json")); }

Split split_dataset(const Dataset& data) {
  Split split;
  std::map<std::string, int> counter;
  for (std::size_t i = 0; i < data.episodes.size(); ++i) {
    const int k = counter[data.episodes[i].scene_id]++;
    (k % 5 == 4 ? split.test : split.train).push_back(i);
  }
  return split;
}

Dataset resample_clouds(const Dataset& data, int points) {
  Dataset out = data;
  for (auto& s : out.scenes) {
    s.spec.surface_density = 0.0;
    s.spec.target_points = points;
    s.cloud = generate_scene(s.spec, derive_seed(s.seed, static_cast<std::uint64_t>(points)));
  }
  return out;
}

}  // namespace sif3d
