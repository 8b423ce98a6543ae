#include "sif3d/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sif3d {

namespace {

using json = nlohmann::ordered_json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void put_metrics(json& j, const Metrics& m) {
  j["traj_path_mm"] = m.traj_path;
  j["traj_dest_mm"] = m.traj_dest;
  j["mpjpe_path_mm"] = m.mpjpe_path;
  j["mpjpe_dest_mm"] = m.mpjpe_dest;
}

Metrics metrics_from(const json& j) {
  return {j.at("traj_path_mm").get<double>(), j.at("traj_dest_mm").get<double>(), j.at("mpjpe_path_mm").get<double>(),
          j.at("mpjpe_dest_mm").get<double>()};
}

// Maps floor coordinates into a square canvas with a margin.
struct Canvas {
  double min_x = 0.0, min_y = 0.0, scale = 1.0, size = 640.0, margin = 20.0;

  Canvas(double x0, double y0, double x1, double y1) : min_x(x0), min_y(y0) {
    const double span = std::max({x1 - x0, y1 - y0, 1e-6});
    scale = (size - 2.0 * margin) / span;
  }
  double px(double x) const { return margin + (x - min_x) * scale; }
  // SVG y grows downward.
  double py(double y) const { return size - margin - (y - min_y) * scale; }
};

std::string svg_open(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_number(w) + "\" height=\"" + format_number(h) +
         "\" viewBox=\"0 0 " + format_number(w) + " " + format_number(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string polyline(const Canvas& c, const std::vector<Eigen::Vector3d>& pts, const std::string& color,
                     const std::string& extra = "") {
  std::string out = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"" + extra + " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i)
    out += (i ? " " : "") + format_number(std::round(c.px(pts[i].x()) * 100) / 100) + "," +
           format_number(std::round(c.py(pts[i].y()) * 100) / 100);
  return out + "\"/>\n";
}

// White to dark red.
std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - 95 * t));
  const int g = static_cast<int>(std::lround(255 * (1.0 - t)));
  const int b = static_cast<int>(std::lround(255 * (1.0 - t)));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string coord(double v) { return format_number(std::round(v * 100) / 100); }

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,traj_path_mm,traj_dest_mm,mpjpe_path_mm,mpjpe_dest_mm,seed,epochs\n";
  for (const auto& r : rows) {
    const Metrics& m = r.report.mean;
    out += csv_field(r.variant) + "," + format_number(m.traj_path) + "," + format_number(m.traj_dest) + "," +
           format_number(m.mpjpe_path) + "," + format_number(m.mpjpe_dest) + "," + std::to_string(r.seed) + "," +
           std::to_string(r.epochs) + "\n";
  }
  return out;
}

std::string metrics_json(const std::vector<AblationRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json row{{"variant", r.variant}, {"seed", r.seed}, {"epochs", r.epochs}};
    put_metrics(row, r.report.mean);
    json eps = json::array();
    for (const auto& e : r.report.episodes) {
      json ej{{"episode", e.episode}, {"scene", e.scene}};
      put_metrics(ej, e.metrics);
      eps.push_back(ej);
    }
    row["episodes"] = eps;
    arr.push_back(row);
  }
  return json{{"rows", arr}}.dump(1) + "\n";
}

std::vector<AblationRow> rows_from_json(const std::string& text) {
  std::vector<AblationRow> rows;
  try {
    const json j = json::parse(text);
    for (const auto& r : j.at("rows")) {
      AblationRow row;
      row.variant = r.at("variant").get<std::string>();
      row.seed = r.at("seed").get<std::uint64_t>();
      row.epochs = r.at("epochs").get<int>();
      row.report.mean = metrics_from(r);
      for (const auto& e : r.at("episodes"))
        row.report.episodes.push_back({e.at("episode").get<std::string>(), e.at("scene").get<std::string>(), metrics_from(e)});
      rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed metrics JSON: ") + e.what());
  }
  return rows;
}

std::string trajectory_svg(const ScenePointCloudd& cloud, const EpisodeRecord& episode, const PredictionBundle& pred) {
  const Eigen::Vector3d lo = cloud.points.colwise().minCoeff().transpose();
  const Eigen::Vector3d hi = cloud.points.colwise().maxCoeff().transpose();
  const Canvas c(lo.x(), lo.y(), hi.x(), hi.y());
  std::string out = svg_open(c.size, c.size);
  out += "<g fill=\"#b0b0b0\">\n";
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    out += "<circle cx=\"" + coord(c.px(cloud.points(i, 0))) + "\" cy=\"" + coord(c.py(cloud.points(i, 1))) +
           "\" r=\"1\"/>\n";
  out += "</g>\n";

  std::vector<Eigen::Vector3d> observed, future, predicted;
  for (const auto& f : episode.observed.frames) observed.push_back(f.translation);
  future.push_back(observed.back());
  for (const auto& f : episode.future.frames) future.push_back(f.translation);
  predicted.push_back(observed.back());
  for (int k = pred.observed_frames; k < pred.frames(); ++k) predicted.push_back(pred.traj_translation.row(k).transpose());

  out += polyline(c, observed, "#1f5fbf");
  out += polyline(c, future, "#2a9d3a");
  out += polyline(c, predicted, "#d62728", " stroke-dasharray=\"6,4\"");
  out += "<g fill=\"#ff9f1c\">\n";
  for (Eigen::Index k = 0; k < episode.gaze.size(); ++k)
    out += "<circle cx=\"" + coord(c.px(episode.gaze.points(k, 0))) + "\" cy=\"" + coord(c.py(episode.gaze.points(k, 1))) +
           "\" r=\"3\"/>\n";
  out += "</g>\n";
  out += "<text x=\"24\" y=\"16\" font-size=\"12\" font-family=\"sans-serif\">" + xml_escape(episode.id) +
         ": observed (blue), truth (green), predicted (red), gaze (orange)</text>\n";
  return out + "</svg>\n";
}

std::string local_salience_svg(const PredictionBundle& pred, std::size_t block) {
  if (block >= pred.local_salience.size()) throw std::invalid_argument("no local salience for the requested block");
  const nn::Matrix& w = pred.local_salience[block];
  constexpr Eigen::Index kMaxColumns = 256;
  const Eigen::Index bins = std::min<Eigen::Index>(kMaxColumns, w.cols());
  nn::Matrix binned = nn::Matrix::Zero(w.rows(), bins);
  for (Eigen::Index j = 0; j < w.cols(); ++j) binned.col(j * bins / w.cols()) += w.col(j);
  const double cell_w = 640.0 / static_cast<double>(bins);
  const double cell_h = 16.0;
  const double top = 24.0;
  std::string out = svg_open(660.0, top + cell_h * static_cast<double>(w.rows()) + 10.0);
  for (Eigen::Index r = 0; r < binned.rows(); ++r) {
    const double peak = std::max(binned.row(r).maxCoeff(), 1e-300);
    for (Eigen::Index j = 0; j < bins; ++j)
      out += "<rect x=\"" + coord(10.0 + cell_w * static_cast<double>(j)) + "\" y=\"" +
             coord(top + cell_h * static_cast<double>(r)) + "\" width=\"" + coord(cell_w + 0.01) + "\" height=\"" +
             coord(cell_h) + "\" fill=\"" + heat_color(binned(r, j) / peak) + "\"/>\n";
  }
  out += "<text x=\"10\" y=\"16\" font-size=\"12\" font-family=\"sans-serif\">local salience, block " +
         std::to_string(block) + " (rows: frames, columns: point bins)</text>\n";
  return out + "</svg>\n";
}

std::string global_salience_svg(const ScenePointCloudd& cloud, const PredictionBundle& pred, std::size_t block) {
  if (block >= pred.global_salience.size()) throw std::invalid_argument("no global salience for the requested block");
  const nn::RowVector& s = pred.global_salience[block];
  const PointMatrixd& pts = pred.scene_points;
  if (s.size() != pts.rows()) throw std::invalid_argument("salience length differs from the scene point count");
  const Eigen::Vector3d lo = cloud.points.colwise().minCoeff().transpose();
  const Eigen::Vector3d hi = cloud.points.colwise().maxCoeff().transpose();
  const Canvas c(lo.x(), lo.y(), hi.x(), hi.y());
  const double peak = std::max(s.maxCoeff(), 1e-300);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  // Draw salient points last so they stay visible.
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return s[a] < s[b]; });
  std::string out = svg_open(c.size, c.size);
  out += "<g fill=\"#e4e4e4\">\n";
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    out += "<circle cx=\"" + coord(c.px(cloud.points(i, 0))) + "\" cy=\"" + coord(c.py(cloud.points(i, 1))) +
           "\" r=\"1\"/>\n";
  out += "</g>\n";
  for (Eigen::Index i : order)
    out += "<circle cx=\"" + coord(c.px(pts(i, 0))) + "\" cy=\"" + coord(c.py(pts(i, 1))) + "\" r=\"3\" fill=\"" +
           heat_color(s[i] / peak) + "\"/>\n";
  out += "<text x=\"24\" y=\"16\" font-size=\"12\" font-family=\"sans-serif\">global salience, block " +
         std::to_string(block) + "</text>\n";
  return out + "</svg>\n";
}

void write_metric_files(const std::vector<AblationRow>& rows, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "metrics.csv", metrics_csv(rows));
  write_text(dir / "metrics.json", metrics_json(rows));
}

void write_plots(const ScenePointCloudd& cloud, const EpisodeRecord& episode, const PredictionBundle& pred,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "trajectory.svg", trajectory_svg(cloud, episode, pred));
  if (!pred.local_salience.empty()) write_text(dir / "local_salience.svg", local_salience_svg(pred, 0));
  if (!pred.global_salience.empty()) write_text(dir / "global_salience.svg", global_salience_svg(cloud, pred, 0));
}

}  // namespace sif3d
