#pragma once

#include "sif3d/dataset.hpp"
#include "sif3d/model.hpp"
#include "sif3d/training.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace sif3d {

/// Errors in millimeters over the predicted frames.
struct Metrics {
  double traj_path = 0.0;
  double traj_dest = 0.0;
  double mpjpe_path = 0.0;
  double mpjpe_dest = 0.0;

  bool operator==(const Metrics&) const = default;
};

struct EpisodeMetrics {
  std::string episode;
  std::string scene;
  Metrics metrics;
};

struct MetricReport {
  Metrics mean;
  std::vector<EpisodeMetrics> episodes;
};

/// Single-episode report; joints are the decoded output.
MetricReport compute_metrics(const PredictionBundle& pred, const EpisodeRecord& truth);

/// Unweighted mean over episodes.
MetricReport aggregate_metrics(std::vector<EpisodeMetrics> episodes);

/// Prediction that reproduces the ground truth exactly.
PredictionBundle oracle_prediction(const EpisodeRecord& truth);

/// Metrics of the trainer's generator on `indices`.
MetricReport evaluate(Trainer& trainer, const Dataset& data, const std::vector<std::size_t>& indices);
MetricReport evaluate_oracle(const Dataset& data, const std::vector<std::size_t>& indices);

struct AblationVariant {
  std::string name;
  /// Config key/value pairs; the key `points` resamples the scene clouds.
  std::vector<std::pair<std::string, std::string>> overrides;
};

struct AblationGrid {
  std::string name;
  std::vector<AblationVariant> variants;
};

/// Known grids: full, table1, table3, table4, table5.
AblationGrid ablation_grid(const std::string& name);
std::vector<std::string> ablation_grid_names();

/// Base config with a variant's overrides. Throws std::invalid_argument on
/// unknown toggles.
TrainConfig variant_config(const TrainConfig& base, const AblationVariant& variant);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  int epochs = 0;
  MetricReport report;
};

using AblationProgress = std::function<void(const std::string& variant, std::uint64_t seed, int epoch,
                                            const LossReport& losses)>;

/// Trains every variant for each seed from scratch on the training split and
/// evaluates it on the held-out split. Rows are ordered variant-major.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const Dataset& data, const AblationGrid& grid,
                                      const std::vector<std::uint64_t>& seeds, const AblationProgress& progress = {});

/// Median of one metric across the rows of a variant.
double median_metric(const std::vector<AblationRow>& rows, const std::string& variant,
                     double Metrics::*field);

}  // namespace sif3d
