#include "sif3d/body_model.hpp"

#include <json.hpp>

#include <fstream>
#include <random>
#include <sstream>

namespace sif3d {

extern const char* const kEmbeddedBodyModelJson;

namespace {

// Canonical body-frame joint positions in meters, before seeded jitter.
constexpr double kTemplate[kNumJoints][3] = {
    {0.00, 0.00, 0.95},   {0.00, 0.09, 0.88},   {0.00, -0.09, 0.88},  {-0.01, 0.00, 1.05},
    {0.01, 0.10, 0.50},   {0.01, -0.10, 0.50},  {-0.01, 0.00, 1.18},  {-0.02, 0.10, 0.08},
    {-0.02, -0.10, 0.08}, {0.00, 0.00, 1.25},   {0.10, 0.11, 0.02},   {0.10, -0.11, 0.02},
    {0.00, 0.00, 1.48},   {0.00, 0.07, 1.42},   {0.00, -0.07, 1.42},  {0.02, 0.00, 1.62},
    {0.00, 0.18, 1.42},   {0.00, -0.18, 1.42},  {0.00, 0.20, 1.15},   {0.00, -0.20, 1.15},
    {0.02, 0.21, 0.90},   {0.02, -0.21, 0.90},  {0.06, 0.00, 1.56}};

constexpr double kRestJitter = 0.005;
constexpr double kBlendScale = 0.03;

}  // namespace

BodyModel BodyModel::generate(std::uint64_t seed) {
  BodyModel model;
  model.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, kRestJitter);
  for (int j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) model.rest(j, a) = kTemplate[j][a] + jitter(rng);
  std::normal_distribution<double> blend(0.0, kBlendScale);
  for (int r = 0; r < model.blend.rows(); ++r)
    for (int c = 0; c < model.blend.cols(); ++c) model.blend(r, c) = blend(rng);
  return model;
}

const BodyModel& BodyModel::standard() {
  static const BodyModel model = from_json(kEmbeddedBodyModelJson);
  return model;
}

std::string BodyModel::to_json() const {
  nlohmann::ordered_json doc;
  doc["format"] = "sif3d-body-model";
  doc["version"] = kFormatVersion;
  doc["seed"] = seed;
  doc["units"] = "meters";
  doc["joints"] = kJointNames;
  doc["parents"] = kJointParents;
  auto& rest_json = doc["rest"] = nlohmann::ordered_json::array();
  for (int j = 0; j < kNumJoints; ++j) rest_json.push_back({rest(j, 0), rest(j, 1), rest(j, 2)});
  auto& blend_json = doc["blend"] = nlohmann::ordered_json::array();
  for (int r = 0; r < blend.rows(); ++r) {
    std::vector<double> row(blend.row(r).data(), blend.row(r).data() + blend.cols());
    blend_json.push_back(row);
  }
  return doc.dump(1);
}

BodyModel BodyModel::from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.at("format") != "sif3d-body-model") throw std::runtime_error("not a body model file");
  if (doc.at("version").get<int>() != kFormatVersion)
    throw std::runtime_error("unsupported body model version");
  BodyModel model;
  model.seed = doc.at("seed").get<std::uint64_t>();
  const auto& rest = doc.at("rest");
  const auto& blend = doc.at("blend");
  if (rest.size() != kNumJoints || blend.size() != 3 * kNumJoints)
    throw std::runtime_error("body model has wrong dimensions");
  for (int j = 0; j < kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) model.rest(j, a) = rest[j].at(a).get<double>();
  for (int r = 0; r < 3 * kNumJoints; ++r) {
    if (blend[r].size() != kPoseEmbeddingDim) throw std::runtime_error("body model has wrong dimensions");
    for (int c = 0; c < kPoseEmbeddingDim; ++c) model.blend(r, c) = blend[r][c].get<double>();
  }
  return model;
}

BodyModel BodyModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open body model file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

void BodyModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write body model file " + path.string());
  out << to_json() << '\n';
}

}  // namespace sif3d
