#pragma once

#include "sif3d/evaluation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sif3d {

/// Header: variant, traj_path_mm, traj_dest_mm, mpjpe_path_mm, mpjpe_dest_mm, seed, epochs.
std::string metrics_csv(const std::vector<AblationRow>& rows);
/// Same rows with per-episode detail.
std::string metrics_json(const std::vector<AblationRow>& rows);
/// Inverse of metrics_json.
std::vector<AblationRow> rows_from_json(const std::string& text);

/// Top-down view: scene points, observed path, true and predicted futures.
std::string trajectory_svg(const ScenePointCloudd& cloud, const EpisodeRecord& episode, const PredictionBundle& pred);
/// Frames x points heatmap of one SCA block's local salience.
std::string local_salience_svg(const PredictionBundle& pred, std::size_t block = 0);
/// Top-down scatter of scene points shaded by one TIA block's global salience.
std::string global_salience_svg(const ScenePointCloudd& cloud, const PredictionBundle& pred, std::size_t block = 0);

/// Writes metrics.csv and metrics.json into `dir`.
void write_metric_files(const std::vector<AblationRow>& rows, const std::filesystem::path& dir);

/// Writes trajectory.svg, and the salience plots when the bundle carries them.
void write_plots(const ScenePointCloudd& cloud, const EpisodeRecord& episode, const PredictionBundle& pred,
                 const std::filesystem::path& dir);

/// Shortest round-trip decimal form; keeps reports byte-stable.
std::string format_number(double v);

}  // namespace sif3d
