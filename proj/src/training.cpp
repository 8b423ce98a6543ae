#include "sif3d/training.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace sif3d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw std::invalid_argument("config key " + key + ": expected a number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw std::invalid_argument("config key " + key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw std::invalid_argument("config key " + key + ": expected an unsigned integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw std::invalid_argument("config key " + key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string widths_text(const std::vector<int>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

std::vector<int> parse_widths(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) out.push_back(static_cast<int>(parse_int(key, trim(part))));
  return out;
}

// Levels as "centroids/radius/neighbors/w1,w2" or "all/w1,w2", joined by ';',
// then '|' and the propagation widths.
std::string hierarchy_text(const SetAbstractionSpec& s) {
  std::string out;
  for (std::size_t i = 0; i < s.levels.size(); ++i) {
    const auto& lv = s.levels[i];
    if (i) out += ";";
    if (lv.group_all)
      out += "all/" + widths_text(lv.mlp);
    else
      out += std::to_string(lv.centroids) + "/" + fmt(lv.radius) + "/" + std::to_string(lv.neighbors) + "/" +
             widths_text(lv.mlp);
  }
  return out + "|" + widths_text(s.propagation_widths);
}

SetAbstractionSpec parse_hierarchy(const std::string& key, const std::string& text) {
  const auto halves = split(text, '|');
  if (halves.size() != 2) throw std::invalid_argument("config key " + key + ": expected levels|widths");
  SetAbstractionSpec s;
  for (const auto& level : split(halves[0], ';')) {
    const auto f = split(trim(level), '/');
    SetAbstractionLevel lv;
    if (f.size() == 2 && f[0] == "all") {
      lv.group_all = true;
      lv.mlp = parse_widths(key, f[1]);
    } else if (f.size() == 4) {
      lv.centroids = static_cast<int>(parse_int(key, f[0]));
      lv.radius = parse_double(key, f[1]);
      lv.neighbors = static_cast<int>(parse_int(key, f[2]));
      lv.mlp = parse_widths(key, f[3]);
    } else {
      throw std::invalid_argument("config key " + key + ": malformed level '" + level + "'");
    }
    s.levels.push_back(lv);
  }
  s.propagation_widths = parse_widths(key, halves[1]);
  return s;
}

// Little-endian binary stream helpers for checkpoints.
class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    buf_ += s;
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  void matrix(const nn::Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : buf_(std::move(bytes)), origin_(std::move(origin)) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void matrix(nn::Matrix& m) {
    need(8 * static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
  }
  bool done() const { return pos_ == buf_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("checkpoint " + origin_ + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) fail("file is truncated");
  }
  std::string buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

constexpr char kCheckpointMagic[8] = {'S', 'I', 'F', '3', 'D', 'C', 'K', 'P'};
constexpr std::uint64_t kCheckpointVersion = 1;

void write_section(Writer& w, const nn::ParameterSet& params, const AdamW& opt) {
  w.u64(static_cast<std::uint64_t>(opt.steps()));
  w.u64(params.size());
  for (const auto& [name, var] : params.entries()) {
    w.str(name);
    w.u64(static_cast<std::uint64_t>(var.rows()));
    w.u64(static_cast<std::uint64_t>(var.cols()));
    w.matrix(var.value());
    const auto it = opt.moments().find(name);
    w.u64(it != opt.moments().end() ? 1 : 0);
    if (it != opt.moments().end()) {
      w.matrix(it->second.m);
      w.matrix(it->second.v);
    }
  }
}

void read_section(Reader& r, nn::ParameterSet& params, AdamW& opt) {
  const auto steps = static_cast<long long>(r.u64());
  const std::uint64_t count = r.u64();
  if (count != params.size()) r.fail("tensor count does not match the model architecture");
  std::map<std::string, AdamW::Moments> moments;
  std::vector<nn::Matrix> values;
  for (const auto& [name, var] : params.entries()) {
    const std::string stored = r.str();
    if (stored != name) r.fail("expected tensor " + name + ", found " + stored);
    const auto rows = static_cast<Eigen::Index>(r.u64());
    const auto cols = static_cast<Eigen::Index>(r.u64());
    if (rows != var.rows() || cols != var.cols()) r.fail("shape mismatch for tensor " + name);
    nn::Matrix value(rows, cols);
    r.matrix(value);
    values.push_back(std::move(value));
    if (r.u64() != 0) {
      AdamW::Moments mo{nn::Matrix(rows, cols), nn::Matrix(rows, cols)};
      r.matrix(mo.m);
      r.matrix(mo.v);
      moments.emplace(name, std::move(mo));
    }
  }
  std::size_t i = 0;
  for (const auto& entry : params.entries()) {
    nn::Var var = entry.second;
    var.mutable_value() = std::move(values[i++]);
  }
  opt.moments() = std::move(moments);
  opt.set_steps(steps);
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CheckpointHeader {
  std::string config_text;
  std::uint64_t seed = 0;
  int epoch = 0;
};

CheckpointHeader read_header(Reader& r) {
  if (r.raw(8) != std::string(kCheckpointMagic, 8)) r.fail("not a checkpoint file");
  if (r.u64() != kCheckpointVersion) r.fail("unsupported checkpoint version");
  CheckpointHeader h;
  h.config_text = r.str();
  h.seed = r.u64();
  h.epoch = static_cast<int>(r.u64());
  return h;
}

nn::Matrix rotation_rows(const MotionSequenced& motion) {
  nn::Matrix out(static_cast<Eigen::Index>(motion.size()), 9);
  for (std::size_t k = 0; k < motion.size(); ++k) {
    const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r = motion.frames[k].orientation.normalized().toRotationMatrix();
    out.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const nn::RowVector>(r.data(), 9);
  }
  return out;
}

void check_horizons(int observed, int frames, const EpisodeRecord& truth, const char* where) {
  if (static_cast<std::size_t>(observed) != truth.observed.size() ||
      static_cast<std::size_t>(frames - observed) != truth.future.size() || truth.future.empty())
    throw std::invalid_argument(std::string(where) + ": prediction horizon " + std::to_string(observed) + "+" +
                                std::to_string(frames - observed) + " does not match the episode horizon " +
                                std::to_string(truth.observed.size()) + "+" + std::to_string(truth.future.size()));
}

}  // namespace

// --- configuration -----------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !(decay > 0.0) || !std::isfinite(learning_rate) || !std::isfinite(decay))
    throw std::invalid_argument("learning rate must be nonnegative and decay positive");
  if (epochs < 0 || batch_size < 1) throw std::invalid_argument("epochs must be nonnegative and batch size positive");
  for (double w : {weights.traj, weights.orient, weights.pose, weights.joints, weights.adv})
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be finite and nonnegative");
  if (!(weight_decay >= 0.0) || !(clip_norm > 0.0)) throw std::invalid_argument("bad weight decay or clip norm");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint interval must be nonnegative");
  model.validate();
}

double TrainConfig::learning_rate_at(int epoch) const { return learning_rate * std::pow(decay, epoch); }

std::string TrainConfig::to_text() const {
  std::ostringstream o;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  o << "learning_rate = " << fmt(learning_rate) << "\n"
    << "decay = " << fmt(decay) << "\n"
    << "epochs = " << epochs << "\n"
    << "batch_size = " << batch_size << "\n"
    << "lambda_traj = " << fmt(weights.traj) << "\n"
    << "lambda_orient = " << fmt(weights.orient) << "\n"
    << "lambda_pose = " << fmt(weights.pose) << "\n"
    << "lambda_joints = " << fmt(weights.joints) << "\n"
    << "lambda_adv = " << fmt(weights.adv) << "\n"
    << "weight_decay = " << fmt(weight_decay) << "\n"
    << "clip_norm = " << fmt(clip_norm) << "\n"
    << "checkpoint_every = " << checkpoint_every << "\n"
    << "seed = " << seed << "\n"
    << "motion_dim = " << model.motion_dim << "\n"
    << "scene_dim = " << model.scene_dim << "\n"
    << "attention_dim = " << model.attention_dim << "\n"
    << "heads = " << model.heads << "\n"
    << "ffn_dim = " << model.ffn_dim << "\n"
    << "mlp_hidden = " << model.mlp_hidden << "\n"
    << "motion_layers = " << model.motion_layers << "\n"
    << "tia_blocks = " << model.tia_blocks << "\n"
    << "sca_blocks = " << model.sca_blocks << "\n"
    << "gcn_layers = " << model.gcn_layers << "\n"
    << "gcn_width = " << model.gcn_width << "\n"
    << "disc_layers = " << model.disc_layers << "\n"
    << "disc_dim = " << model.disc_dim << "\n"
    << "scene_hierarchy = " << hierarchy_text(model.scene) << "\n"
    << "context_points = " << model.context_points << "\n"
    << "aggregator = " << to_string(model.aggregator) << "\n"
    << "positional_encoding = " << b(model.positional_encoding) << "\n"
    << "zero_init_residual = " << b(model.zero_init_residual) << "\n"
    << "use_scene = " << b(model.use_scene) << "\n"
    << "use_gaze = " << b(model.use_gaze) << "\n"
    << "use_tia = " << b(model.use_tia) << "\n"
    << "use_sca = " << b(model.use_sca) << "\n"
    << "use_decoder = " << b(model.use_decoder) << "\n"
    << "use_discriminator = " << b(model.use_discriminator) << "\n"
    << "use_pointnet = " << b(model.use_pointnet) << "\n";
  return o.str();
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  const auto i = [&] { return static_cast<int>(parse_int(key, v)); };
  const auto d = [&] { return parse_double(key, v); };
  const auto bl = [&] { return parse_bool(key, v); };
  if (key == "preset") {
    if (v == "default")
      model = ModelConfig{};
    else if (v == "small")
      model = ModelConfig::small();
    else if (v == "tiny")
      model = ModelConfig::tiny();
    else
      throw std::invalid_argument("unknown model preset '" + v + "'");
  } else if (key == "learning_rate") {
    learning_rate = d();
  } else if (key == "decay") {
    decay = d();
  } else if (key == "epochs") {
    epochs = i();
  } else if (key == "batch_size") {
    batch_size = i();
  } else if (key == "lambda_traj") {
    weights.traj = d();
  } else if (key == "lambda_orient") {
    weights.orient = d();
  } else if (key == "lambda_pose") {
    weights.pose = d();
  } else if (key == "lambda_joints") {
    weights.joints = d();
  } else if (key == "lambda_adv") {
    weights.adv = d();
  } else if (key == "weight_decay") {
    weight_decay = d();
  } else if (key == "clip_norm") {
    clip_norm = d();
  } else if (key == "checkpoint_every") {
    checkpoint_every = i();
  } else if (key == "seed") {
    seed = parse_u64(key, v);
  } else if (key == "motion_dim") {
    model.motion_dim = i();
  } else if (key == "scene_dim") {
    model.scene_dim = i();
  } else if (key == "attention_dim") {
    model.attention_dim = i();
  } else if (key == "heads") {
    model.heads = i();
  } else if (key == "ffn_dim") {
    model.ffn_dim = i();
  } else if (key == "mlp_hidden") {
    model.mlp_hidden = i();
  } else if (key == "motion_layers") {
    model.motion_layers = i();
  } else if (key == "tia_blocks") {
    model.tia_blocks = i();
  } else if (key == "sca_blocks") {
    model.sca_blocks = i();
  } else if (key == "gcn_layers") {
    model.gcn_layers = i();
  } else if (key == "gcn_width") {
    model.gcn_width = i();
  } else if (key == "disc_layers") {
    model.disc_layers = i();
  } else if (key == "disc_dim") {
    model.disc_dim = i();
  } else if (key == "scene_hierarchy") {
    model.scene = parse_hierarchy(key, v);
  } else if (key == "context_points") {
    model.context_points = i();
  } else if (key == "aggregator") {
    model.aggregator = parse_aggregator(v);
  } else if (key == "positional_encoding") {
    model.positional_encoding = bl();
  } else if (key == "zero_init_residual") {
    model.zero_init_residual = bl();
  } else if (key == "use_scene") {
    model.use_scene = bl();
  } else if (key == "use_gaze") {
    model.use_gaze = bl();
  } else if (key == "use_tia") {
    model.use_tia = bl();
  } else if (key == "use_sca") {
    model.use_sca = bl();
  } else if (key == "use_decoder") {
    model.use_decoder = bl();
  } else if (key == "use_discriminator") {
    model.use_discriminator = bl();
  } else if (key == "use_pointnet") {
    model.use_pointnet = bl();
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return from_text(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::optional<std::filesystem::path> apply_env_overrides(TrainConfig& config) {
  if (const char* seed = std::getenv("SIF3D_SEED"); seed && *seed) config.seed = parse_u64("SIF3D_SEED", seed);
  if (const char* dir = std::getenv("SIF3D_OUT_DIR"); dir && *dir) return std::filesystem::path(dir);
  return std::nullopt;
}

// --- losses --------------------------------------------------------------------

bool LossReport::finite() const {
  for (double v : {l_traj, l_orient, l_pose, l_joints, l_adv_g, l_adv_d, total})
    if (!std::isfinite(v)) return false;
  return true;
}

nn::Matrix joint_rows(const MotionSequenced& motion, const BodyModel& model) {
  nn::Matrix out(static_cast<Eigen::Index>(motion.size()), 3 * kNumJoints);
  for (std::size_t k = 0; k < motion.size(); ++k) {
    const JointSetd j = body_joints(motion.frames[k], model);
    out.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const nn::RowVector>(j.data(), 3 * kNumJoints);
  }
  return out;
}

LossReport compute_losses(const PredictionBundle& pred, const EpisodeRecord& truth,
                          const std::optional<AdversarialLosses>& scores, const LossWeights& weights) {
  check_horizons(pred.observed_frames, pred.frames(), truth, "compute_losses");
  if (static_cast<int>(pred.traj_orientation.size()) != pred.frames() || pred.pose_embeddings.rows() != pred.frames() ||
      static_cast<int>(pred.decoded.size()) != pred.frames())
    throw std::invalid_argument("compute_losses: prediction fields have inconsistent lengths");
  const int t0 = pred.observed_frames;
  const int n = static_cast<int>(truth.future.size());
  LossReport r;
  for (int k = 0; k < n; ++k) {
    const PoseStated& gt = truth.future.frames[static_cast<std::size_t>(k)];
    r.l_traj += (pred.traj_translation.row(t0 + k).transpose() - gt.translation).norm();
    r.l_orient += geodesic_angle(pred.traj_orientation[static_cast<std::size_t>(t0 + k)], gt.orientation);
    r.l_pose += (pred.pose_embeddings.row(t0 + k).transpose() - gt.pose_embedding).squaredNorm();
    const JointSetd j = body_joints(gt);
    r.l_joints += (pred.decoded[static_cast<std::size_t>(t0 + k)] - j).rowwise().norm().mean();
  }
  r.l_traj /= n;
  r.l_orient /= n;
  r.l_pose /= n;
  r.l_joints /= n;
  if (scores) {
    r.l_adv_g = scores->g_loss;
    r.l_adv_d = scores->d_loss;
  }
  r.total = weights.traj * r.l_traj + weights.orient * r.l_orient + weights.pose * r.l_pose +
            weights.joints * r.l_joints + weights.adv * r.l_adv_g;
  return r;
}

LossGraph loss_graph(const ForwardPass& pass, const EpisodeRecord& truth, const LossWeights& weights,
                     const nn::Var& fake_score) {
  const int frames = static_cast<int>(pass.trajectory.translation.rows());
  check_horizons(pass.observed_frames, frames, truth, "loss_graph");
  const Eigen::Index t0 = pass.observed_frames;
  const Eigen::Index n = static_cast<Eigen::Index>(truth.future.size());

  nn::Matrix t(n, 3), p(n, kPoseEmbeddingDim);
  for (Eigen::Index k = 0; k < n; ++k) {
    t.row(k) = truth.future.frames[static_cast<std::size_t>(k)].translation.transpose();
    p.row(k) = truth.future.frames[static_cast<std::size_t>(k)].pose_embedding.transpose();
  }
  LossGraph g;
  g.traj = nn::mean(nn::row_norms(nn::slice_rows(pass.trajectory.translation, t0, n) - nn::Var::constant(t)));
  g.orient = nn::mean(nn::geodesic_angles(nn::slice_rows(pass.trajectory.rotation, t0, n), rotation_rows(truth.future)));
  g.pose = nn::scale(nn::sum(nn::square(nn::slice_rows(pass.pose, t0, n) - nn::Var::constant(p))), 1.0 / n);
  const nn::Var diff = nn::slice_rows(pass.decoded, t0, n) - nn::Var::constant(joint_rows(truth.future));
  g.joints = nn::mean(nn::row_norms(nn::reshape(diff, n * kNumJoints, 3)));
  g.total = weights.traj * g.traj + weights.orient * g.orient + weights.pose * g.pose + weights.joints * g.joints;
  if (fake_score.defined()) {
    g.adv = generator_adversarial_loss(fake_score);
    g.total = g.total + weights.adv * g.adv;
  }
  return g;
}

// --- optimizer -------------------------------------------------------------------

double gradient_norm(const nn::ParameterSet& params) {
  double sq = 0.0;
  for (const auto& [name, var] : params.entries())
    if (var.grad().size() != 0) sq += var.grad().squaredNorm();
  return std::sqrt(sq);
}

double AdamW::step(nn::ParameterSet& params, double lr) {
  const double norm = gradient_norm(params);
  if (!std::isfinite(norm)) throw NonFiniteLoss("AdamW: gradient norm is not finite");
  const double clip = norm > clip_norm_ ? clip_norm_ / norm : 1.0;
  ++steps_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
  for (const auto& [name, cvar] : params.entries()) {
    if (cvar.grad().size() == 0) continue;
    nn::Var var = cvar;
    auto [it, fresh] = moments_.try_emplace(name);
    Moments& mo = it->second;
    if (fresh) {
      mo.m = nn::Matrix::Zero(var.rows(), var.cols());
      mo.v = nn::Matrix::Zero(var.rows(), var.cols());
    }
    const nn::Matrix g = var.grad() * clip;
    mo.m = kBeta1 * mo.m + (1.0 - kBeta1) * g;
    mo.v = kBeta2 * mo.v + (1.0 - kBeta2) * g.cwiseProduct(g);
    nn::Matrix& w = var.mutable_value();
    w -= (lr * weight_decay_) * w;
    w.array() -= lr * (mo.m.array() / bc1) / ((mo.v.array() / bc2).sqrt() + kEps);
  }
  return norm;
}

// --- trainer ---------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& config)
    : config_(config),
      generator_(config.model, config.seed),
      critic_(config.model, config.seed),
      gen_opt_(config.weight_decay, config.clip_norm),
      disc_opt_(config.weight_decay, config.clip_norm) {
  config_.validate();
}

const PreparedScene& Trainer::prepared(const SceneRecord& scene) {
  auto it = scenes_.find(scene.id);
  if (it == scenes_.end()) it = scenes_.emplace(scene.id, prepare_scene(scene.cloud, config_.model)).first;
  return it->second;
}

PredictionBundle Trainer::predict(const EpisodeRecord& episode, const Dataset& data) {
  return generator_.predict(episode.observed, episode.gaze, prepared(data.scene(episode.scene_id)),
                            static_cast<int>(episode.future.size()));
}

LossReport Trainer::train_step(const std::vector<const EpisodeRecord*>& batch, const Dataset& data, double lr) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const bool adversarial = config_.model.use_discriminator;
  const double inv = 1.0 / static_cast<double>(batch.size());
  nn::ParameterSet& gp = generator_.parameters();
  nn::ParameterSet& dp = critic_.parameters();
  gp.zero_grad();
  dp.zero_grad();

  struct Sample {
    nn::Matrix real;
    nn::Matrix fake;
    nn::Matrix scene_global;
  };
  std::vector<Sample> samples;
  LossReport report;
  for (const EpisodeRecord* ep : batch) {
    const int t0 = static_cast<int>(ep->observed.size());
    const int n = static_cast<int>(ep->future.size());
    const ForwardPass pass = generator_.forward(ep->observed, ep->gaze, prepared(data.scene(ep->scene_id)), n);
    Sample s;
    s.real.resize(t0 + n, 3 * kNumJoints);
    s.real << joint_rows(ep->observed), joint_rows(ep->future);
    s.scene_global = pass.scene.features.global_embedding.value();
    nn::Var score;
    if (adversarial) {
      const nn::Var fake =
          nn::concat_rows({nn::Var::constant(s.real.topRows(t0)), nn::slice_rows(pass.decoded, t0, n)});
      s.fake = fake.value();
      score = critic_(fake, nn::Var::constant(s.scene_global));
    }
    const LossGraph g = loss_graph(pass, *ep, config_.weights, score);
    const double total = g.total.item();
    if (!std::isfinite(total)) {
      std::ostringstream msg;
      msg << "non-finite generator loss on episode " << ep->id << ": traj=" << g.traj.item()
          << " orient=" << g.orient.item() << " pose=" << g.pose.item() << " joints=" << g.joints.item();
      if (g.adv.defined()) msg << " adv=" << g.adv.item();
      throw NonFiniteLoss(msg.str());
    }
    nn::backward(nn::scale(g.total, inv));
    report.l_traj += inv * g.traj.item();
    report.l_orient += inv * g.orient.item();
    report.l_pose += inv * g.pose.item();
    report.l_joints += inv * g.joints.item();
    if (g.adv.defined()) report.l_adv_g += inv * g.adv.item();
    report.total += inv * total;
    samples.push_back(std::move(s));
  }
  if (!std::isfinite(gradient_norm(gp))) throw NonFiniteLoss("non-finite generator gradient");

  // The critic saw the generator loss; its own update starts from clean grads.
  dp.zero_grad();
  if (adversarial) {
    for (const Sample& s : samples) {
      const nn::Var sg = nn::Var::constant(s.scene_global);
      const nn::Var d = discriminator_loss(critic_(nn::Var::constant(s.real), sg), critic_(nn::Var::constant(s.fake), sg));
      if (!std::isfinite(d.item())) throw NonFiniteLoss("non-finite discriminator loss");
      nn::backward(nn::scale(d, inv));
      report.l_adv_d += inv * d.item();
    }
    if (!std::isfinite(gradient_norm(dp))) throw NonFiniteLoss("non-finite discriminator gradient");
  }

  gen_opt_.step(gp, lr);
  if (adversarial) disc_opt_.step(dp, lr);
  if (!gp.all_finite() || !dp.all_finite()) throw NonFiniteLoss("weights became non-finite after the update");
  gp.zero_grad();
  dp.zero_grad();
  return report;
}

LossReport Trainer::train_epoch(const Dataset& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("train_epoch: no training episodes");
  std::vector<std::size_t> order = indices;
  std::mt19937_64 rng(derive_seed(config_.seed, 0x747261696eULL, static_cast<std::uint64_t>(epoch_)));
  std::shuffle(order.begin(), order.end(), rng);
  const double lr = config_.learning_rate_at(epoch_);
  LossReport mean;
  const auto bs = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    std::vector<const EpisodeRecord*> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(&data.episodes[order[i]]);
    const LossReport r = train_step(batch, data, lr);
    const double w = static_cast<double>(batch.size()) / static_cast<double>(order.size());
    mean.l_traj += w * r.l_traj;
    mean.l_orient += w * r.l_orient;
    mean.l_pose += w * r.l_pose;
    mean.l_joints += w * r.l_joints;
    mean.l_adv_g += w * r.l_adv_g;
    mean.l_adv_d += w * r.l_adv_d;
    mean.total += w * r.total;
  }
  ++epoch_;
  return mean;
}

void Trainer::save(const std::filesystem::path& path) const {
  Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u64(kCheckpointVersion);
  w.str(config_.to_text());
  w.u64(config_.seed);
  w.u64(static_cast<std::uint64_t>(epoch_));
  write_section(w, generator_.parameters(), gen_opt_);
  write_section(w, critic_.parameters(), disc_opt_);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void Trainer::load(const std::filesystem::path& path) {
  Reader r(read_bytes(path), path.string());
  const CheckpointHeader h = read_header(r);
  if (h.seed != config_.seed) r.fail("seed does not match the trainer configuration");
  read_section(r, generator_.parameters(), gen_opt_);
  read_section(r, critic_.parameters(), disc_opt_);
  if (!r.done()) r.fail("trailing bytes after the last tensor");
  epoch_ = h.epoch;
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  Reader r(read_bytes(path), path.string());
  const CheckpointHeader h = read_header(r);
  CheckpointInfo info;
  try {
    info.config = TrainConfig::from_text(h.config_text);
  } catch (const std::invalid_argument& e) {
    r.fail(std::string("bad configuration echo: ") + e.what());
  }
  info.seed = h.seed;
  info.epoch = h.epoch;
  return info;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch) {
  std::ostringstream name;
  name << "epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
  return dir / name.str();
}

TrainingResult run_training(Trainer& trainer, const Dataset& data, const std::filesystem::path& out_dir,
                            const EpochCallback& on_epoch) {
  const Split split = split_dataset(data);
  if (split.train.empty()) throw std::invalid_argument("run_training: the dataset has no training episodes");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

  TrainingResult result;
  const TrainConfig& cfg = trainer.config();
  if (trainer.epoch() == 0) {
    trainer.save(checkpoint_path(out_dir, 0));
    result.checkpoints.push_back(checkpoint_path(out_dir, 0));
  }
  while (trainer.epoch() < cfg.epochs) {
    const LossReport r = trainer.train_epoch(data, split.train);
    result.epoch_losses.push_back(r);
    if (on_epoch) on_epoch(trainer.epoch(), r);
    const int e = trainer.epoch();
    if (e == cfg.epochs || (cfg.checkpoint_every > 0 && e % cfg.checkpoint_every == 0)) {
      trainer.save(checkpoint_path(out_dir, e));
      result.checkpoints.push_back(checkpoint_path(out_dir, e));
    }
  }
  return result;
}

}  // namespace sif3d
