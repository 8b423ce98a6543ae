#include "oracles.hpp"

#include "sif3d/evaluation.hpp"
#include "sif3d/training.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace sif3d;
using namespace sif3d::testing;
namespace fs = std::filesystem;

namespace {

const Dataset& small_dataset() {
  static const Dataset data = [] {
    BenchmarkSpec spec;
    spec.scenes = 1;
    spec.episodes_per_scene = 10;
    spec.points = 512;
    return generate_dataset(spec, 3);
  }();
  return data;
}

TrainConfig tiny_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.model = ModelConfig::tiny();
  c.seed = seed;
  c.batch_size = 4;
  c.epochs = 2;
  c.checkpoint_every = 1;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sif3d_training_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<const EpisodeRecord*> first_batch(const Dataset& d, std::size_t n) {
  std::vector<const EpisodeRecord*> b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(&d.episodes[i]);
  return b;
}

bool same_parameters(const nn::ParameterSet& a, const nn::ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.entries()[i].first != b.entries()[i].first || a.entries()[i].second.value() != b.entries()[i].second.value())
      return false;
  return true;
}

}  // namespace

TEST_CASE("config text round-trips") {
  TrainConfig c = tiny_config(9);
  c.learning_rate = 1.25e-3;
  c.weights.adv = 0.2;
  c.model.use_gaze = false;
  c.model.aggregator = Aggregator::Conv;
  const TrainConfig back = TrainConfig::from_text(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.seed == 9);
  CHECK_FALSE(back.model.use_gaze);
  CHECK(back.model.aggregator == Aggregator::Conv);
}

TEST_CASE("config parsing errors") {
  CHECK_THROWS_AS(TrainConfig::from_text("no_such_key = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::from_text("epochs = many\n"), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::from_text("learning_rate = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::from_text("lambda_traj = -0.5\n"), std::invalid_argument);
  const TrainConfig c = TrainConfig::from_text("# comment\n\npreset = tiny\nepochs = 3\n");
  CHECK(c.epochs == 3);
  CHECK(c.model.motion_dim == ModelConfig::tiny().motion_dim);
}

TEST_CASE("defaults follow the published schedule") {
  const TrainConfig c;
  CHECK(c.learning_rate == 0.0004);
  CHECK(c.decay == 0.98);
  CHECK(c.epochs == 100);
  CHECK(c.batch_size == 8);
  CHECK(c.learning_rate_at(0) == 0.0004);
  CHECK(c.learning_rate_at(10) == doctest::Approx(0.0004 * std::pow(0.98, 10)).epsilon(1e-15));
}

TEST_CASE("environment overrides") {
  TrainConfig c;
  ::setenv("SIF3D_SEED", "42", 1);
  ::setenv("SIF3D_OUT_DIR", "/tmp/somewhere", 1);
  const auto dir = apply_env_overrides(c);
  ::unsetenv("SIF3D_SEED");
  ::unsetenv("SIF3D_OUT_DIR");
  CHECK(c.seed == 42);
  REQUIRE(dir.has_value());
  CHECK(*dir == fs::path("/tmp/somewhere"));
  ::setenv("SIF3D_SEED", "abc", 1);
  CHECK_THROWS(apply_env_overrides(c));
  ::unsetenv("SIF3D_SEED");
}

TEST_CASE("perfect prediction has zero reconstruction loss") {
  const EpisodeRecord& ep = small_dataset().episodes[0];
  const LossReport r = compute_losses(oracle_prediction(ep), ep);
  CHECK(r.l_traj == 0.0);
  CHECK(r.l_orient == doctest::Approx(0.0));
  CHECK(r.l_pose == 0.0);
  CHECK(r.l_joints == 0.0);
}

TEST_CASE("uniform translation offset") {
  const EpisodeRecord& ep = small_dataset().episodes[1];
  PredictionBundle b = oracle_prediction(ep);
  b.traj_translation.col(0).array() += 0.01;
  CHECK(compute_losses(b, ep).l_traj == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("losses match the scalar oracle") {
  Rng rng(90);
  const PointMatrixd scene = random_points(rng, 10);
  for (int trial = 0; trial < 100; ++trial) {
    const EpisodeRecord ep = random_episode(rng, 2, 3, scene);
    const PredictionBundle b = random_prediction(rng, 2, 3);
    const AdversarialLosses adv = adversarial_losses(normal(rng), normal(rng));
    const LossWeights w;
    const LossReport r = compute_losses(b, ep, adv, w);
    const OracleLosses o = oracle_losses(b, ep, BodyModel::standard());
    REQUIRE(r.l_traj == doctest::Approx(o.traj).epsilon(1e-9));
    REQUIRE(r.l_orient == doctest::Approx(o.orient).epsilon(1e-7));
    REQUIRE(r.l_pose == doctest::Approx(o.pose).epsilon(1e-9));
    REQUIRE(r.l_joints == doctest::Approx(o.joints).epsilon(1e-9));
    const double total = w.traj * o.traj + w.orient * o.orient + w.pose * o.pose + w.joints * o.joints + w.adv * adv.g_loss;
    REQUIRE(r.total == doctest::Approx(total).epsilon(1e-7));
    REQUIRE(r.l_adv_d == adv.d_loss);
  }
}

TEST_CASE("loss horizon mismatch") {
  Rng rng(91);
  const EpisodeRecord ep = random_episode(rng, 2, 3, random_points(rng, 5));
  CHECK_THROWS_AS(compute_losses(random_prediction(rng, 2, 4), ep), std::invalid_argument);
}

TEST_CASE("loss graph agrees with the value-level losses") {
  const Dataset& d = small_dataset();
  Trainer t(tiny_config());
  const EpisodeRecord& ep = d.episodes[2];
  const ForwardPass pass =
      t.generator().forward(ep.observed, ep.gaze, t.prepared(d.scene(ep.scene_id)), static_cast<int>(ep.future.size()));
  const LossGraph g = loss_graph(pass, ep, LossWeights{});
  const LossReport r = compute_losses(PredictionBundle::from_pass(pass), ep);
  CHECK(g.traj.item() == doctest::Approx(r.l_traj).epsilon(1e-10));
  CHECK(g.orient.item() == doctest::Approx(r.l_orient).epsilon(1e-7));
  CHECK(g.pose.item() == doctest::Approx(r.l_pose).epsilon(1e-10));
  CHECK(g.joints.item() == doctest::Approx(r.l_joints).epsilon(1e-10));
  CHECK(g.total.item() == doctest::Approx(r.total).epsilon(1e-7));
}

TEST_CASE("AdamW step matches a hand computation") {
  nn::ParameterSet set(0);
  nn::Var w = set.add("w", nn::Matrix::Constant(1, 2, 1.0));
  w.mutable_grad() = nn::Matrix(1, 2);
  w.mutable_grad() << 0.3, -0.4;  // norm 0.5, below the clip
  AdamW opt(0.01, 1.0);
  opt.step(set, 0.1);
  // m = 0.1 g, v = 0.001 g^2; bias-corrected m/sqrt(v) = sign(g).
  const double eps_term0 = 0.3 / (0.3 + 1e-8);
  const double eps_term1 = 0.4 / (0.4 + 1e-8);
  CHECK(w.value()(0, 0) == doctest::Approx(1.0 - 0.1 * 0.01 - 0.1 * eps_term0).epsilon(1e-12));
  CHECK(w.value()(0, 1) == doctest::Approx(1.0 - 0.1 * 0.01 + 0.1 * eps_term1).epsilon(1e-12));
  CHECK(opt.steps() == 1);
}

TEST_CASE("AdamW clips by the global norm") {
  nn::ParameterSet set(0);
  nn::Var a = set.add("a", nn::Matrix::Zero(1, 1));
  nn::Var b = set.add("b", nn::Matrix::Zero(1, 1));
  a.mutable_grad() = nn::Matrix::Constant(1, 1, 30.0);
  b.mutable_grad() = nn::Matrix::Constant(1, 1, 40.0);
  AdamW opt(0.0, 1.0);
  CHECK(opt.step(set, 0.01) == doctest::Approx(50.0));
  CHECK(opt.moments().at("a").m(0, 0) == doctest::Approx(0.1 * 30.0 / 50.0));
  CHECK(opt.moments().at("b").m(0, 0) == doctest::Approx(0.1 * 40.0 / 50.0));
}

TEST_CASE("zero learning rate leaves every weight unchanged") {
  const Dataset& d = small_dataset();
  Trainer a(tiny_config()), b(tiny_config());
  a.train_step(first_batch(d, 3), d, 0.0);
  CHECK(same_parameters(a.generator().parameters(), b.generator().parameters()));
  CHECK(same_parameters(a.critic().parameters(), b.critic().parameters()));
}

TEST_CASE("non-finite losses abort before any update") {
  const Dataset& d = small_dataset();
  Trainer a(tiny_config()), ref(tiny_config());
  nn::Var poisoned = a.generator().parameters().at("planner.proj.bias");
  poisoned.mutable_value()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  ref.generator().parameters().at("planner.proj.bias").mutable_value()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(a.train_step(first_batch(d, 2), d, 1e-3), NonFiniteLoss);
  for (std::size_t i = 0; i < a.generator().parameters().size(); ++i) {
    const auto& [name, v] = a.generator().parameters().entries()[i];
    if (name == "planner.proj.bias") continue;
    CHECK(v.value() == ref.generator().parameters().entries()[i].second.value());
  }
  CHECK(same_parameters(a.critic().parameters(), ref.critic().parameters()));
}

TEST_CASE("training is deterministic under a seed") {
  const Dataset& d = small_dataset();
  const auto split = split_dataset(d);
  Trainer a(tiny_config(5)), b(tiny_config(5));
  for (int e = 0; e < 2; ++e) CHECK(a.train_epoch(d, split.train) == b.train_epoch(d, split.train));
  CHECK(same_parameters(a.generator().parameters(), b.generator().parameters()));
  CHECK(a.generator().parameters().all_finite());
  CHECK(a.critic().parameters().all_finite());
}

TEST_CASE("checkpoints round-trip bit-exactly and resume reproduces the run") {
  const Dataset& d = small_dataset();
  const auto split = split_dataset(d);
  const fs::path dir = scratch("resume");
  TrainConfig cfg = tiny_config(6);
  cfg.epochs = 3;
  Trainer full(cfg);
  full.train_epoch(d, split.train);
  full.save(dir / "e1.ckpt");
  const LossReport second = full.train_epoch(d, split.train);
  const LossReport third = full.train_epoch(d, split.train);

  const CheckpointInfo info = read_checkpoint_info(dir / "e1.ckpt");
  CHECK(info.epoch == 1);
  CHECK(info.seed == 6);
  Trainer resumed(info.config);
  resumed.load(dir / "e1.ckpt");
  CHECK(resumed.epoch() == 1);
  CHECK(resumed.generator_optimizer().steps() > 0);
  CHECK(resumed.train_epoch(d, split.train) == second);
  CHECK(resumed.train_epoch(d, split.train) == third);
  CHECK(same_parameters(resumed.generator().parameters(), full.generator().parameters()));

  Trainer reload(info.config);
  reload.load(dir / "e1.ckpt");
  reload.save(dir / "again.ckpt");
  std::ifstream x(dir / "e1.ckpt", std::ios::binary), y(dir / "again.ckpt", std::ios::binary);
  const std::string bx((std::istreambuf_iterator<char>(x)), {}), by((std::istreambuf_iterator<char>(y)), {});
  CHECK(bx == by);
}

TEST_CASE("checkpoint loading rejects mismatches and corruption") {
  const fs::path dir = scratch("reject");
  Trainer t(tiny_config(1));
  t.save(dir / "a.ckpt");
  TrainConfig other = tiny_config(1);
  other.model.motion_dim = 24;
  Trainer wrong(other);
  CHECK_THROWS(wrong.load(dir / "a.ckpt"));
  Trainer other_seed(tiny_config(2));
  CHECK_THROWS(other_seed.load(dir / "a.ckpt"));

  std::ifstream in(dir / "a.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::ofstream(dir / "cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  Trainer fresh(tiny_config(1));
  CHECK_THROWS(fresh.load(dir / "cut.ckpt"));
  std::ofstream(dir / "junk.ckpt", std::ios::binary) << "not a checkpoint";
  CHECK_THROWS(read_checkpoint_info(dir / "junk.ckpt"));
  CHECK_THROWS(fresh.load(dir / "missing.ckpt"));
}

TEST_CASE("zero epochs write only the initial checkpoint") {
  const fs::path dir = scratch("zero");
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  Trainer t(cfg);
  const TrainingResult r = run_training(t, small_dataset(), dir);
  REQUIRE(r.checkpoints.size() == 1);
  CHECK(r.checkpoints[0] == checkpoint_path(dir, 0));
  CHECK(fs::exists(dir / "epoch_0000.ckpt"));
  CHECK(r.epoch_losses.empty());
}

TEST_CASE("periodic and final checkpoints") {
  const fs::path dir = scratch("periodic");
  TrainConfig cfg = tiny_config();
  cfg.epochs = 3;
  cfg.checkpoint_every = 2;
  Trainer t(cfg);
  const TrainingResult r = run_training(t, small_dataset(), dir);
  CHECK(r.epoch_losses.size() == 3);
  REQUIRE(r.checkpoints.size() == 3);
  CHECK(r.checkpoints[1] == checkpoint_path(dir, 2));
  CHECK(r.checkpoints[2] == checkpoint_path(dir, 3));
}

TEST_CASE("reconstruction losses fall without the discriminator") {
  const Dataset& d = small_dataset();
  TrainConfig cfg = tiny_config(7);
  cfg.model.use_discriminator = false;
  cfg.weights.adv = 0.0;
  Trainer t(cfg);
  const auto batch = first_batch(d, 2);
  const LossReport first = t.train_step(batch, d, 3e-3);
  LossReport last;
  for (int i = 0; i < 60; ++i) last = t.train_step(batch, d, 3e-3);
  CHECK(last.l_adv_g == 0.0);
  CHECK(last.l_adv_d == 0.0);
  CHECK(last.l_joints < 0.5 * first.l_joints);
  CHECK(last.l_traj < first.l_traj);
}
