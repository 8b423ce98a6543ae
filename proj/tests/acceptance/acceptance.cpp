// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.

#include "oracles.hpp"

#include "sif3d/dataset.hpp"
#include "sif3d/evaluation.hpp"
#include "sif3d/report.hpp"
#include "sif3d/training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

using namespace sif3d;
using namespace sif3d::testing;
using nn::Matrix;
using nn::Var;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kMetricTol = 1e-9;
constexpr double kMetricSeconds = 10.0;
constexpr double kSalienceTol = 1e-6;
constexpr double kPermutationTol = 1e-6;
constexpr double kRigidTol = 1e-9;
constexpr double kScaRigidTol = 1e-5;
constexpr double kBlockGradTol = 1e-4;
constexpr double kPipelineGradTol = 1e-3;
constexpr double kGradSeconds = 300.0;
constexpr double kOverfitRatio = 0.10;
constexpr double kOverfitSeconds = 300.0;
constexpr double kTable1Seconds = 45.0 * 60.0;
constexpr double kMinClearanceOracle = 0.25;
constexpr double kGazeSurfaceTol = 1e-6;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << std::scientific << v;
  return s.str();
}

std::string fixed(double v, int digits = 1) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng, sd);
  return m;
}

Matrix rotation_rows(const std::vector<Eigen::Quaterniond>& qs) {
  Matrix out(static_cast<Eigen::Index>(qs.size()), 9);
  for (std::size_t k = 0; k < qs.size(); ++k) {
    const Eigen::Matrix3d r = qs[k].toRotationMatrix();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out(static_cast<Eigen::Index>(k), 3 * i + j) = r(i, j);
  }
  return out;
}

void randomize(nn::ParameterSet& set, Rng& rng, double sd) {
  for (const auto& [name, v] : set.entries()) {
    Var w = v;
    w.mutable_value() = random_matrix(rng, w.rows(), w.cols(), sd);
  }
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// --- 1 ------------------------------------------------------------------------

Outcome metric_oracle() {
  const auto t0 = Clock::now();
  Rng rng(1);
  const PointMatrixd scene = random_points(rng, 16);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int observed = 1 + static_cast<int>(rng() % 8), future = 1 + static_cast<int>(rng() % 12);
    const EpisodeRecord ep = random_episode(rng, observed, future, scene);
    const PredictionBundle b = random_prediction(rng, observed, future);
    const Metrics m = compute_metrics(b, ep).mean;
    const OracleMetrics o = oracle_metrics(b, ep, BodyModel::standard());
    for (auto [got, want] : {std::pair{m.traj_path, o.traj_path}, {m.traj_dest, o.traj_dest},
                             {m.mpjpe_path, o.mpjpe_path}, {m.mpjpe_dest, o.mpjpe_dest}})
      worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
  }
  const double secs = seconds_since(t0);
  return {worst <= kMetricTol && secs < kMetricSeconds,
          "1000 instances, max relative error " + sci(worst) + " (tol " + sci(kMetricTol) + "), " + fixed(secs, 2) +
              " s (limit " + fixed(kMetricSeconds, 0) + " s)"};
}

// --- 2 ------------------------------------------------------------------------

Outcome salience_normalization() {
  Rng rng(2);
  const ModelConfig cfg = ModelConfig::tiny();
  double worst_sum = 0.0, min_weight = 1.0;
  int rows = 0;
  for (int draw = 0; draw < 100; ++draw) {
    Generator gen(cfg, static_cast<std::uint64_t>(draw));
    // Spread the weights well beyond their initialization, including the
    // zero-initialized spatial-bias output.
    randomize(gen.parameters(), rng, uniform(rng, 0.05, 0.6));
    const PointMatrixd pts = random_points(rng, 40 + static_cast<int>(rng() % 40), uniform(rng, 0.5, 4.0));
    const PreparedScene scene = prepare_scene(ScenePointCloudd(pts), cfg);
    const int observed = 1 + static_cast<int>(rng() % 6), future = 1 + static_cast<int>(rng() % 6);
    const EpisodeRecord ep = random_episode(rng, observed, future, pts);
    const ForwardPass pass = gen.forward(ep.observed, ep.gaze, scene, future);
    std::vector<Matrix> maps;
    for (const auto& s : pass.tia.salience) maps.push_back(s.value());
    for (const auto& s : pass.sca.salience) maps.push_back(s.weights.value());
    for (const Matrix& m : maps) {
      if (!m.allFinite()) return {false, "non-finite salience at draw " + std::to_string(draw)};
      min_weight = std::min(min_weight, m.minCoeff());
      for (Eigen::Index r = 0; r < m.rows(); ++r, ++rows) worst_sum = std::max(worst_sum, std::abs(m.row(r).sum() - 1.0));
    }
  }
  return {worst_sum <= kSalienceTol && min_weight >= 0.0,
          "100 draws, " + std::to_string(rows) + " rows, max |sum-1| " + sci(worst_sum) + " (tol " + sci(kSalienceTol) +
              "), min weight " + sci(min_weight)};
}

// --- 3 ------------------------------------------------------------------------

Outcome permutation_invariance() {
  Rng rng(3);
  ModelConfig cfg = ModelConfig::small();
  cfg.context_points = 0;
  nn::ParameterSet set(3);
  const PointNetEncoder encoder(nn::ParamScope(set, "scene"), cfg.scene);
  const TiaStack tia(nn::ParamScope(set, "tia"), cfg);
  const PointMatrixd pts = random_points(rng, 300);
  const Var f_m = Var::constant(random_matrix(rng, 16, cfg.motion_dim));
  const Var f_gaze = Var::constant(random_matrix(rng, 16, cfg.motion_dim));

  const auto run = [&](const PointMatrixd& p) {
    const SceneFeatures f = encoder(SceneGeometry::build(p, cfg.scene));
    return std::pair{f, tia(f_m, SceneContext::make(f, p), f_gaze)};
  };
  const auto [base_f, base_out] = run(pts);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(pts.rows()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    PointMatrixd shuffled(pts.rows(), 3);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) shuffled.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
    const auto [f, out] = run(shuffled);
    worst = std::max(worst, (f.global_embedding.value() - base_f.global_embedding.value()).cwiseAbs().maxCoeff());
    worst = std::max(worst, (out.values.value() - base_out.values.value()).cwiseAbs().maxCoeff());
    for (std::size_t b = 0; b < out.salience.size(); ++b)
      for (Eigen::Index i = 0; i < pts.rows(); ++i)
        worst = std::max(worst, std::abs(out.salience[b].value()(0, i) -
                                         base_out.salience[b].value()(0, perm[static_cast<std::size_t>(i)])));
  }
  return {worst <= kPermutationTol,
          "20 permutations of 300 points, max abs change " + sci(worst) + " (tol " + sci(kPermutationTol) + ")"};
}

// --- 4 ------------------------------------------------------------------------

Outcome rigid_invariance() {
  Rng rng(4);
  double worst_rel = 0.0, worst_block = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ScenePointCloudd cloud(random_points(rng, 50));
    const PointMatrixd t = random_points(rng, 6);
    std::vector<Eigen::Quaterniond> q;
    for (int k = 0; k < 6; ++k) q.push_back(random_quaternion(rng));
    const Eigen::Quaterniond g = random_quaternion(rng);
    const Eigen::Matrix3d r = g.toRotationMatrix();
    const Eigen::RowVector3d v(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    std::vector<Eigen::Quaterniond> q2;
    for (const auto& qk : q) q2.push_back(canonical_quaternion(g * qk));
    const RelativeScene a = relative_normalize(cloud, t, q);
    const RelativeScene b =
        relative_normalize(ScenePointCloudd((cloud.points * r.transpose()).rowwise() + v), (t * r.transpose()).rowwise() + v, q2);
    for (std::size_t k = 0; k < a.positions.size(); ++k)
      worst_rel = std::max(worst_rel, (a.positions[k] - b.positions[k]).cwiseAbs().maxCoeff());
  }

  const ModelConfig cfg = ModelConfig::tiny();
  for (int trial = 0; trial < 20; ++trial) {
    nn::ParameterSet set(static_cast<std::uint64_t>(trial));
    ScaBlock block(nn::ParamScope(set, "sca"), cfg);
    randomize(set, rng, 0.3);  // includes the spatial-bias output layer
    const Eigen::Index n = 30, frames = 8;
    const SceneFeatures f{Var::constant(random_matrix(rng, n, cfg.scene_dim)), Var::constant(random_matrix(rng, 1, cfg.scene_dim))};
    const PointMatrixd pts = random_points(rng, n);
    const PointMatrixd t = random_points(rng, frames);
    std::vector<Eigen::Quaterniond> q;
    for (Eigen::Index k = 0; k < frames; ++k) q.push_back(random_quaternion(rng));
    const Eigen::Quaterniond g = random_quaternion(rng);
    const Eigen::Matrix3d r = g.toRotationMatrix();
    const Eigen::RowVector3d v(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    std::vector<Eigen::Quaterniond> q2;
    for (const auto& qk : q) q2.push_back(g * qk);
    const PointMatrixd pts2 = (pts * r.transpose()).rowwise() + v;
    const PointMatrixd t2 = (t * r.transpose()).rowwise() + v;
    const Var f_in = Var::constant(random_matrix(rng, frames, cfg.motion_dim));

    const auto run = [&](const PointMatrixd& p, const PointMatrixd& tr, const std::vector<Eigen::Quaterniond>& rot) {
      const SceneContext scene = SceneContext::make(f, p);
      const Var rel = nn::relative_positions(scene.points, Var::constant(tr), Var::constant(rotation_rows(rot)));
      return block(f_in, scene, rel).value();
    };
    worst_block = std::max(worst_block, (run(pts, t, q) - run(pts2, t2, q2)).cwiseAbs().maxCoeff());
  }
  return {worst_rel <= kRigidTol && worst_block <= kScaRigidTol,
          "relative_normalize max change " + sci(worst_rel) + " (tol " + sci(kRigidTol) + "), SCA block max change " +
              sci(worst_block) + " (tol " + sci(kScaRigidTol) + ")"};
}

// --- 5 ------------------------------------------------------------------------

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  Rng rng(5);
  const ModelConfig cfg = ModelConfig::tiny();
  std::ostringstream detail;
  bool pass = true;
  const auto record = [&](const std::string& name, const GradCheck& g, double tol) {
    pass = pass && g.relative_error <= tol && g.checked > 0;
    detail << name << " " << sci(g.relative_error) << " (" << g.checked << " entries, tol " << sci(tol) << "), ";
  };

  {
    nn::ParameterSet set(51);
    TiaBlock block(nn::ParamScope(set, "tia"), cfg);
    const SceneFeatures f{Var::parameter(random_matrix(rng, 24, cfg.scene_dim)),
                          Var::parameter(random_matrix(rng, 1, cfg.scene_dim))};
    const PointMatrixd pts = random_points(rng, 24);
    Var f_in = Var::parameter(random_matrix(rng, 6, cfg.motion_dim));
    Var gaze = Var::parameter(random_matrix(rng, 6, cfg.motion_dim));
    const Var w = Var::constant(random_matrix(rng, 6, cfg.motion_dim));
    auto vars = all_parameters(set);
    for (const Var& v : {f_in, gaze, f.per_point, f.global_embedding}) vars.push_back(v);
    // The context concatenates feature values, so it is rebuilt per evaluation.
    record("tia_block",
           check_gradients(vars, [&] { return nn::sum(nn::mul(block(f_in, SceneContext::make(f, pts), gaze), w)); }, rng),
           kBlockGradTol);
  }
  {
    nn::ParameterSet set(52);
    ScaBlock block(nn::ParamScope(set, "sca"), cfg);
    randomize(set, rng, 0.3);
    const SceneFeatures f{Var::parameter(random_matrix(rng, 20, cfg.scene_dim)),
                          Var::parameter(random_matrix(rng, 1, cfg.scene_dim))};
    const PointMatrixd pts = random_points(rng, 20);
    std::vector<Eigen::Quaterniond> q;
    for (int k = 0; k < 5; ++k) q.push_back(random_quaternion(rng));
    Var trans = Var::parameter(random_matrix(rng, 5, 3));
    Var rot = Var::parameter(rotation_rows(q));
    Var f_in = Var::parameter(random_matrix(rng, 5, cfg.motion_dim));
    const Var w = Var::constant(random_matrix(rng, 5, cfg.motion_dim));
    auto vars = all_parameters(set);
    for (const Var& v : {f_in, trans, rot, f.per_point}) vars.push_back(v);
    record("sca_block",
           check_gradients(vars,
                           [&] {
                             const SceneContext scene = SceneContext::make(f, pts);
                             const Var rel = nn::relative_positions(scene.points, trans, rot);
                             return nn::sum(nn::mul(block(f_in, scene, rel), w));
                           },
                           rng),
           kBlockGradTol);
  }
  {
    nn::ParameterSet set(53);
    Discriminator d(nn::ParamScope(set, "disc"), cfg);
    randomize(set, rng, 0.3);
    Var joints = Var::parameter(random_matrix(rng, 6, 3 * kNumJoints));
    Var g = Var::parameter(random_matrix(rng, 1, cfg.scene_dim));
    auto vars = all_parameters(set);
    vars.push_back(joints);
    vars.push_back(g);
    record("discriminate", check_gradients(vars, [&] { return d(joints, g); }, rng), kBlockGradTol);
  }
  {
    // c_m = c_s = 16, n = 32, T + dT = 4.
    Generator gen(cfg, 54);
    Critic critic(cfg, 55);
    randomize(gen.parameters(), rng, 0.15);
    const PointMatrixd pts = random_points(rng, 32);
    const PreparedScene scene = prepare_scene(ScenePointCloudd(pts), cfg);
    const EpisodeRecord ep = random_episode(rng, 2, 2, pts);
    const Matrix observed_joints = joint_rows(ep.observed);
    const LossWeights weights;
    const auto loss = [&] {
      const ForwardPass pass = gen.forward(ep.observed, ep.gaze, scene, 2);
      const Var fake = nn::concat_rows({Var::constant(observed_joints), nn::slice_rows(pass.decoded, 2, 2)});
      return loss_graph(pass, ep, weights, critic(fake, pass.scene.features.global_embedding)).total;
    };
    auto vars = all_parameters(gen.parameters());
    record("full pipeline", check_gradients(vars, loss, rng, 4), kPipelineGradTol);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < kGradSeconds;
  detail << fixed(secs, 1) << " s (limit " << fixed(kGradSeconds, 0) << " s)";
  return {pass, detail.str()};
}

// --- 6 ------------------------------------------------------------------------

Outcome identity_at_init() {
  Rng rng(6);
  ModelConfig cfg;
  cfg.zero_init_residual = true;
  nn::ParameterSet set(6);
  const TiaStack tia(nn::ParamScope(set, "tia"), cfg);
  const ScaStack sca(nn::ParamScope(set, "sca"), cfg);
  const MotionDecoder decoder(nn::ParamScope(set, "decoder"), cfg);
  const SceneFeatures f{Var::constant(random_matrix(rng, 64, cfg.scene_dim)), Var::constant(random_matrix(rng, 1, cfg.scene_dim))};
  const SceneContext scene = SceneContext::make(f, random_points(rng, 64));
  const Var f_in = Var::constant(random_matrix(rng, 16, cfg.motion_dim));
  std::vector<Eigen::Quaterniond> q;
  for (int k = 0; k < 16; ++k) q.push_back(random_quaternion(rng));
  const bool tia_ok = tia(f_in, scene, Var::constant(random_matrix(rng, 16, cfg.motion_dim))).values.value() == f_in.value();
  const bool sca_ok =
      sca(f_in, scene, Var::constant(random_matrix(rng, 16, 3)), Var::constant(rotation_rows(q))).values.value() == f_in.value();
  const Matrix j = random_matrix(rng, 16, 3 * kNumJoints);
  const bool dec_ok = decoder(Var::constant(j)).value() == j;
  const auto word = [](bool b) { return b ? "exact" : "differs"; };
  return {tia_ok && sca_ok && dec_ok, std::string("TIA ") + word(tia_ok) + ", SCA " + word(sca_ok) + ", decoder " + word(dec_ok)};
}

// --- 7 ------------------------------------------------------------------------

double batch_joint_loss(Trainer& t, const Dataset& d, const std::vector<const EpisodeRecord*>& batch) {
  double sum = 0.0;
  for (const auto* ep : batch) sum += compute_losses(t.predict(*ep, d), *ep).l_joints;
  return sum / static_cast<double>(batch.size());
}

Outcome overfit() {
  const auto t0 = Clock::now();
  BenchmarkSpec spec;
  spec.scenes = 1;
  spec.episodes_per_scene = 4;
  spec.points = 512;
  const Dataset d = generate_dataset(spec, 7);
  TrainConfig cfg;
  cfg.model = ModelConfig::tiny();
  cfg.seed = 7;
  Trainer t(cfg);
  std::vector<const EpisodeRecord*> batch;
  for (const auto& ep : d.episodes) batch.push_back(&ep);
  const double initial = batch_joint_loss(t, d, batch);
  constexpr double kLearningRate = 2e-3;
  for (int step = 0; step < 500; ++step) t.train_step(batch, d, kLearningRate);
  const double final_loss = batch_joint_loss(t, d, batch);
  const double secs = seconds_since(t0);
  const double ratio = final_loss / initial;
  return {ratio <= kOverfitRatio && secs < kOverfitSeconds,
          "l_joints " + sci(initial) + " -> " + sci(final_loss) + " after 500 steps, ratio " + fixed(ratio, 4) +
              " (limit " + fixed(kOverfitRatio, 2) + "), " + fixed(secs, 1) + " s (limit " + fixed(kOverfitSeconds, 0) + " s)"};
}

// --- 8 ------------------------------------------------------------------------

std::string train_and_report(const fs::path& dir) {
  fs::remove_all(dir);
  BenchmarkSpec spec;
  spec.scenes = 2;
  spec.episodes_per_scene = 10;
  spec.points = 1024;
  write_dataset(generate_dataset(spec, 8), dir / "data");
  const Dataset data = read_dataset(dir / "data");
  TrainConfig cfg;
  cfg.model = ModelConfig::small();
  cfg.epochs = 3;
  cfg.checkpoint_every = 1;
  cfg.seed = 8;
  Trainer trainer(cfg);
  run_training(trainer, data, dir / "ckpt");
  const CheckpointInfo info = read_checkpoint_info(checkpoint_path(dir / "ckpt", 3));
  Trainer reloaded(info.config);
  reloaded.load(checkpoint_path(dir / "ckpt", 3));
  const AblationRow row{"SIF3D", info.seed, info.epoch, evaluate(reloaded, data, split_dataset(data).test)};
  write_metric_files({row}, dir / "report");
  return read_bytes(dir / "report" / "metrics.csv");
}

Outcome determinism(const fs::path& work) {
  const std::string a = train_and_report(work / "determinism_a");
  const std::string b = train_and_report(work / "determinism_b");
  const bool json_same =
      read_bytes(work / "determinism_a" / "report" / "metrics.json") == read_bytes(work / "determinism_b" / "report" / "metrics.json");
  const bool ckpt_same = read_bytes(checkpoint_path(work / "determinism_a" / "ckpt", 3)) ==
                         read_bytes(checkpoint_path(work / "determinism_b" / "ckpt", 3));
  return {!a.empty() && a == b && json_same,
          std::string("metrics.csv ") + (a == b ? "identical" : "differs") + " (" + std::to_string(a.size()) +
              " bytes), metrics.json " + (json_same ? "identical" : "differs") + ", final checkpoint " +
              (ckpt_same ? "identical" : "differs")};
}

// --- 9 and 10 -----------------------------------------------------------------

struct AblationRuns {
  std::vector<AblationRow> rows;
  std::map<std::string, double> seconds;
};

const std::vector<AblationVariant>& benchmark_variants() {
  static const std::vector<AblationVariant> v = {
      {"full", {}},
      {"gaze-only", {{"use_scene", "false"}}},
      {"motion-only", {{"use_scene", "false"}, {"use_gaze", "false"}}},
      {"w/o TIA", {{"use_tia", "false"}}},
      {"w/o SCA", {{"use_sca", "false"}}},
  };
  return v;
}

AblationRuns& ablation_runs(const fs::path& work, const std::set<int>& wanted) {
  static AblationRuns runs;
  static bool done = false;
  if (done) return runs;
  done = true;
  const Dataset data = generate_dataset(BenchmarkSpec{}, 0);
  TrainConfig base;
  base.model = ModelConfig::small();
  base.epochs = 30;
  const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  for (const auto& variant : benchmark_variants()) {
    const bool for_9 = variant.name == "full" || variant.name == "gaze-only" || variant.name == "motion-only";
    const bool for_10 = variant.name == "full" || variant.name.rfind("w/o", 0) == 0;
    if (!((for_9 && wanted.count(9)) || (for_10 && wanted.count(10)))) continue;
    const auto t0 = Clock::now();
    auto rows = run_ablation(base, data, AblationGrid{variant.name, {variant}}, seeds,
                             [](const std::string& v, std::uint64_t seed, int epoch, const LossReport& r) {
                               if (epoch % 10 == 0)
                                 std::cerr << "  " << v << " seed " << seed << " epoch " << epoch
                                           << " total " << format_number(r.total) << "\n";
                             });
    runs.seconds[variant.name] = seconds_since(t0);
    for (auto& r : rows) runs.rows.push_back(std::move(r));
    write_metric_files(runs.rows, work / "ablation");
  }
  return runs;
}

Outcome table1_ordering(const fs::path& work, const std::set<int>& wanted) {
  const AblationRuns& runs = ablation_runs(work, wanted);
  const auto med = [&](const std::string& v) { return median_metric(runs.rows, v, &Metrics::traj_dest); };
  const double full = med("full"), gaze = med("gaze-only"), motion = med("motion-only");
  const double secs = runs.seconds.at("full") + runs.seconds.at("gaze-only") + runs.seconds.at("motion-only");
  return {full < gaze && gaze < motion && secs <= kTable1Seconds,
          "median Traj-dest mm: full " + fixed(full) + ", gaze-only " + fixed(gaze) + ", motion-only " + fixed(motion) +
              " (need full < gaze-only < motion-only), " + fixed(secs / 60.0) + " min (limit " +
              fixed(kTable1Seconds / 60.0, 0) + " min)"};
}

Outcome table3_direction(const fs::path& work, const std::set<int>& wanted) {
  const AblationRuns& runs = ablation_runs(work, wanted);
  const auto med = [&](const std::string& v, double Metrics::*field) { return median_metric(runs.rows, v, field); };
  const double full_traj = med("full", &Metrics::traj_dest), no_tia = med("w/o TIA", &Metrics::traj_dest);
  const double full_mpjpe = med("full", &Metrics::mpjpe_dest), no_sca = med("w/o SCA", &Metrics::mpjpe_dest);
  return {no_tia > full_traj && no_sca > full_mpjpe,
          "median Traj-dest mm: w/o TIA " + fixed(no_tia) + " vs full " + fixed(full_traj) + "; median MPJPE-dest mm: w/o SCA " +
              fixed(no_sca) + " vs full " + fixed(full_mpjpe)};
}

// --- 11 -----------------------------------------------------------------------

bool well_formed(const std::vector<AblationRow>& rows, const AblationGrid& grid, const fs::path& dir, std::string& why) {
  const std::string csv = read_bytes(dir / "metrics.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != "variant,traj_path_mm,traj_dest_mm,mpjpe_path_mm,mpjpe_dest_mm,seed,epochs") {
    why = "bad CSV header";
    return false;
  }
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() != 7 || cells[0] != grid.variants[count].name) {
      why = "bad CSV row: " + line;
      return false;
    }
    for (int k = 1; k <= 4; ++k) {
      const double v = std::stod(cells[static_cast<std::size_t>(k)]);
      if (!std::isfinite(v) || v < 0) {
        why = "bad metric value in: " + line;
        return false;
      }
    }
    ++count;
  }
  if (count != grid.variants.size() || rows.size() != grid.variants.size()) {
    why = "expected " + std::to_string(grid.variants.size()) + " rows";
    return false;
  }
  const auto back = rows_from_json(read_bytes(dir / "metrics.json"));
  if (back.size() != rows.size() || metrics_json(back) != read_bytes(dir / "metrics.json")) {
    why = "metrics.json does not round-trip";
    return false;
  }
  for (const auto& r : back)
    if (r.report.episodes.empty()) {
      why = "row without episodes";
      return false;
    }
  return true;
}

Outcome harness_sweeps(const fs::path& work) {
  const auto t0 = Clock::now();
  const Dataset data = generate_dataset(BenchmarkSpec{}, 0);
  TrainConfig base;
  base.model = ModelConfig::small();
  base.epochs = 2;  // structural run; no numeric bar
  std::ostringstream detail;
  bool pass = true;
  for (const char* name : {"table4", "table5"}) {
    const AblationGrid grid = ablation_grid(name);
    const auto rows = run_ablation(base, data, grid, {0});
    const fs::path dir = work / name;
    write_metric_files(rows, dir);
    std::string why;
    const bool ok = well_formed(rows, grid, dir, why);
    pass = pass && ok;
    detail << name << " " << rows.size() << "/" << grid.variants.size() << " variants " << (ok ? "well formed" : why) << ", ";
  }
  detail << fixed(seconds_since(t0), 1) << " s";
  return {pass, detail.str()};
}

// --- 12 -----------------------------------------------------------------------

Outcome synthetic_world(const fs::path& work) {
  const Dataset d = generate_dataset(BenchmarkSpec{}, 0);
  std::size_t clear = 0, on_surface = 0;
  double min_clearance = std::numeric_limits<double>::infinity(), max_gaze = 0.0;
  for (const auto& ep : d.episodes) {
    const SceneSpec& spec = d.scene(ep.scene_id).spec;
    bool ok = true;
    for (const auto* seq : {&ep.observed, &ep.future})
      for (const auto& f : seq->frames) {
        const double c = oracle_clearance(spec, f.translation.x(), f.translation.y());
        min_clearance = std::min(min_clearance, c);
        ok = ok && c >= kMinClearanceOracle;
      }
    clear += ok;
    bool gaze_ok = true;
    for (Eigen::Index k = 0; k < ep.gaze.points.rows(); ++k) {
      const double g = oracle_surface_distance(spec, ep.gaze.points.row(k).transpose());
      max_gaze = std::max(max_gaze, g);
      gaze_ok = gaze_ok && g <= kGazeSurfaceTol;
    }
    on_surface += gaze_ok;
  }
  write_dataset(d, work / "world_a");
  write_dataset(generate_dataset(BenchmarkSpec{}, 0), work / "world_b");
  const bool same = dataset_hash(work / "world_a") == dataset_hash(work / "world_b");
  const std::size_t n = d.episodes.size();
  return {clear == n && on_surface == n && same && n == 400,
          std::to_string(clear) + "/" + std::to_string(n) + " episodes clear (min " + fixed(min_clearance, 3) + " m, need " +
              fixed(kMinClearanceOracle, 2) + " m), " + std::to_string(on_surface) + "/" + std::to_string(n) +
              " gaze tracks on surfaces (max distance " + sci(max_gaze) + "), regenerated dataset hash " +
              (same ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance checks");
  std::vector<int> criteria;
  fs::path work = fs::temp_directory_path() / "sif3d_acceptance";
  app.add_option("--criteria", criteria, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 12));
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty())
    for (int c = 1; c <= 12; ++c) criteria.push_back(c);
  const std::set<int> wanted(criteria.begin(), criteria.end());
  fs::create_directories(work);

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> table = {
      {1, {"metric oracle", metric_oracle}},
      {2, {"salience normalization", salience_normalization}},
      {3, {"permutation invariance", permutation_invariance}},
      {4, {"rigid-frame invariance", rigid_invariance}},
      {5, {"gradient checks", gradient_checks}},
      {6, {"identity at init", identity_at_init}},
      {7, {"overfit", overfit}},
      {8, {"determinism", [&] { return determinism(work); }}},
      {9, {"modality ordering", [&] { return table1_ordering(work, wanted); }}},
      {10, {"module ablation direction", [&] { return table3_direction(work, wanted); }}},
      {11, {"sweep harness", [&] { return harness_sweeps(work); }}},
      {12, {"synthetic world validity", [&] { return synthetic_world(work); }}},
  };

  int failures = 0;
  for (int c : wanted) {
    const auto& [name, fn] = table.at(c);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c << " (" << name << "): " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
