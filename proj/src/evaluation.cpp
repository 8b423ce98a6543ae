#include "sif3d/evaluation.hpp"

#include <algorithm>
#include <stdexcept>

namespace sif3d {

MetricReport compute_metrics(const PredictionBundle& pred, const EpisodeRecord& truth) {
  const int t0 = pred.observed_frames;
  const int n = pred.future_frames();
  if (static_cast<std::size_t>(t0) != truth.observed.size() || static_cast<std::size_t>(n) != truth.future.size() ||
      n < 1)
    throw std::invalid_argument("compute_metrics: prediction horizon " + std::to_string(t0) + "+" +
                                std::to_string(n) + " does not match the episode horizon " +
                                std::to_string(truth.observed.size()) + "+" + std::to_string(truth.future.size()));
  if (static_cast<int>(pred.decoded.size()) != pred.frames())
    throw std::invalid_argument("compute_metrics: decoded joints do not cover the horizon");

  Metrics m;
  double traj_last = 0.0, joints_last = 0.0;
  for (int k = 0; k < n; ++k) {
    const PoseStated& gt = truth.future.frames[static_cast<std::size_t>(k)];
    const double traj = (pred.traj_translation.row(t0 + k).transpose() - gt.translation).norm();
    const double joints = (pred.decoded[static_cast<std::size_t>(t0 + k)] - body_joints(gt)).rowwise().norm().mean();
    m.traj_path += traj;
    m.mpjpe_path += joints;
    traj_last = traj;
    joints_last = joints;
  }
  m.traj_path = 1000.0 * m.traj_path / n;
  m.mpjpe_path = 1000.0 * m.mpjpe_path / n;
  m.traj_dest = 1000.0 * traj_last;
  m.mpjpe_dest = 1000.0 * joints_last;

  MetricReport report;
  report.mean = m;
  report.episodes.push_back({truth.id, truth.scene_id, m});
  return report;
}

MetricReport aggregate_metrics(std::vector<EpisodeMetrics> episodes) {
  MetricReport report;
  if (!episodes.empty()) {
    for (const auto& e : episodes) {
      report.mean.traj_path += e.metrics.traj_path;
      report.mean.traj_dest += e.metrics.traj_dest;
      report.mean.mpjpe_path += e.metrics.mpjpe_path;
      report.mean.mpjpe_dest += e.metrics.mpjpe_dest;
    }
    const double n = static_cast<double>(episodes.size());
    report.mean.traj_path /= n;
    report.mean.traj_dest /= n;
    report.mean.mpjpe_path /= n;
    report.mean.mpjpe_dest /= n;
  }
  report.episodes = std::move(episodes);
  return report;
}

PredictionBundle oracle_prediction(const EpisodeRecord& truth) {
  PredictionBundle b;
  b.observed_frames = static_cast<int>(truth.observed.size());
  const auto frames = static_cast<Eigen::Index>(truth.observed.size() + truth.future.size());
  b.traj_translation.resize(frames, 3);
  b.pose_embeddings.resize(frames, kPoseEmbeddingDim);
  Eigen::Index k = 0;
  for (const auto* seq : {&truth.observed, &truth.future}) {
    for (const auto& f : seq->frames) {
      b.traj_translation.row(k) = f.translation.transpose();
      b.traj_orientation.push_back(canonical_quaternion(f.orientation));
      b.pose_embeddings.row(k) = f.pose_embedding.transpose();
      b.joints.push_back(body_joints(f));
      ++k;
    }
  }
  b.decoded = b.joints;
  return b;
}

MetricReport evaluate(Trainer& trainer, const Dataset& data, const std::vector<std::size_t>& indices) {
  std::vector<EpisodeMetrics> rows;
  rows.reserve(indices.size());
  for (std::size_t i : indices) {
    const EpisodeRecord& ep = data.episodes.at(i);
    rows.push_back(compute_metrics(trainer.predict(ep, data), ep).episodes.front());
  }
  return aggregate_metrics(std::move(rows));
}

MetricReport evaluate_oracle(const Dataset& data, const std::vector<std::size_t>& indices) {
  std::vector<EpisodeMetrics> rows;
  for (std::size_t i : indices) {
    const EpisodeRecord& ep = data.episodes.at(i);
    rows.push_back(compute_metrics(oracle_prediction(ep), ep).episodes.front());
  }
  return aggregate_metrics(std::move(rows));
}

std::vector<std::string> ablation_grid_names() { return {"full", "table1", "table3", "table4", "table5"}; }

AblationGrid ablation_grid(const std::string& name) {
  AblationGrid g;
  g.name = name;
  if (name == "full") {
    g.variants = {{"SIF3D", {}}};
  } else if (name == "table1") {
    g.variants = {{"motion-only", {{"use_scene", "false"}, {"use_gaze", "false"}}},
                  {"w/ Scene", {{"use_gaze", "false"}}},
                  {"w/ Gaze", {{"use_scene", "false"}}},
                  {"w/ Scene+Gaze", {}}};
  } else if (name == "table3") {
    g.variants = {{"w/o TIA", {{"use_tia", "false"}}},
                  {"w/o SCA", {{"use_sca", "false"}}},
                  {"w/o MotionDecoder", {{"use_decoder", "false"}}},
                  {"w/o Discriminator", {{"use_discriminator", "false"}, {"lambda_adv", "0"}}},
                  {"w/o PointNet++", {{"use_pointnet", "false"}}},
                  {"SIF3D", {}}};
  } else if (name == "table4") {
    for (int n : {512, 1024, 2048, 4096}) g.variants.push_back({"points=" + std::to_string(n), {{"points", std::to_string(n)}}});
  } else if (name == "table5") {
    for (const char* a : {"Last", "Mean", "Max", "Conv", "Transformer"}) g.variants.push_back({a, {{"aggregator", a}}});
  } else {
    throw std::invalid_argument("unknown ablation grid '" + name + "'");
  }
  return g;
}

TrainConfig variant_config(const TrainConfig& base, const AblationVariant& variant) {
  TrainConfig c = base;
  for (const auto& [key, value] : variant.overrides) {
    if (key == "points") {
      const int n = std::stoi(value);
      if (n < 1) throw std::invalid_argument("points override must be positive");
      continue;
    }
    c.set(key, value);
  }
  c.validate();
  return c;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const Dataset& data, const AblationGrid& grid,
                                      const std::vector<std::uint64_t>& seeds, const AblationProgress& progress) {
  if (grid.variants.empty()) throw std::invalid_argument("ablation grid has no variants");
  if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  const Split split = split_dataset(data);
  if (split.train.empty() || split.test.empty())
    throw std::invalid_argument("ablation needs training and held-out episodes");
  // Validate every variant before any training starts.
  std::vector<TrainConfig> configs;
  for (const auto& v : grid.variants) configs.push_back(variant_config(base, v));

  std::vector<AblationRow> rows;
  for (std::size_t vi = 0; vi < grid.variants.size(); ++vi) {
    const AblationVariant& variant = grid.variants[vi];
    const Dataset* variant_data = &data;
    Dataset resampled;
    for (const auto& [key, value] : variant.overrides) {
      if (key == "points") {
        resampled = resample_clouds(data, std::stoi(value));
        variant_data = &resampled;
      }
    }
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = configs[vi];
      cfg.seed = seed;
      Trainer trainer(cfg);
      while (trainer.epoch() < cfg.epochs) {
        const LossReport losses = trainer.train_epoch(*variant_data, split.train);
        if (progress) progress(variant.name, seed, trainer.epoch(), losses);
      }
      rows.push_back({variant.name, seed, cfg.epochs, evaluate(trainer, *variant_data, split.test)});
    }
  }
  return rows;
}

double median_metric(const std::vector<AblationRow>& rows, const std::string& variant, double Metrics::*field) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.variant == variant) v.push_back(r.report.mean.*field);
  if (v.empty()) throw std::invalid_argument("no rows for variant '" + variant + "'");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace sif3d
