// Command-line entry point: dataset generation, training, evaluation,
// ablation grids and report assembly.

#include "sif3d/dataset.hpp"
#include "sif3d/evaluation.hpp"
#include "sif3d/report.hpp"
#include "sif3d/training.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace sif3d;

namespace {

void apply_sets(TrainConfig& config, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  config.validate();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::size_t> select(const Dataset& data, const std::string& split) {
  if (split == "test") return split_dataset(data).test;
  if (split == "train") return split_dataset(data).train;
  std::vector<std::size_t> all(data.episodes.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

void print_losses(int epoch, const LossReport& r) {
  std::cout << "epoch " << epoch << " total=" << format_number(r.total) << " traj=" << format_number(r.l_traj)
            << " orient=" << format_number(r.l_orient) << " pose=" << format_number(r.l_pose)
            << " joints=" << format_number(r.l_joints) << " adv_g=" << format_number(r.l_adv_g)
            << " adv_d=" << format_number(r.l_adv_d) << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene- and gaze-informed 3D human motion forecasting"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic benchmark dataset");
  BenchmarkSpec spec;
  std::uint64_t gen_seed = 0;
  fs::path gen_out;
  gen->add_option("-o,--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Generation seed");
  gen->add_option("--scenes", spec.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--episodes", spec.episodes_per_scene, "Episodes per scene")->check(CLI::PositiveNumber);
  gen->add_option("--points", spec.points, "Points per scene cloud")->check(CLI::Range(512, 1 << 20));
  gen->add_option("--observed", spec.horizon.observed_frames, "Observed frames")->check(CLI::PositiveNumber);
  gen->add_option("--future", spec.horizon.future_frames, "Predicted frames")->check(CLI::PositiveNumber);
  gen->add_option("--frame-rate", spec.horizon.frame_rate, "Frames per second")->check(CLI::PositiveNumber);

  // train
  auto* train = app.add_subcommand("train", "Train a model and write checkpoints");
  fs::path train_config, train_data, train_out, train_resume;
  std::vector<std::string> train_sets;
  train->add_option("-c,--config", train_config, "key = value config file")->check(CLI::ExistingFile);
  train->add_option("-d,--data", train_data, "Dataset directory")->required();
  train->add_option("-o,--out", train_out, "Checkpoint directory (SIF3D_OUT_DIR overrides)");
  train->add_option("--set", train_sets, "Config override key=value");
  train->add_option("--resume", train_resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  fs::path eval_ckpt, eval_data, eval_out;
  std::string eval_split = "test";
  bool eval_oracle = false;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->check(CLI::ExistingFile);
  eval->add_option("-d,--data", eval_data, "Dataset directory")->required();
  eval->add_option("-o,--out", eval_out, "Report directory")->required();
  eval->add_option("--split", eval_split, "Episodes to score")->check(CLI::IsMember({"test", "train", "all"}));
  eval->add_flag("--oracle", eval_oracle, "Score a predictor that copies the ground truth");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and score an ablation grid");
  std::string grid_name;
  fs::path ablate_data, ablate_out, ablate_config;
  std::vector<std::string> ablate_sets;
  std::vector<std::uint64_t> ablate_seeds{0};
  std::uint64_t ablate_data_seed = 0;
  ablate->add_option("grid", grid_name, "Grid name")->required()->check(CLI::IsMember(ablation_grid_names()));
  ablate->add_option("-o,--out", ablate_out, "Report directory")->required();
  ablate->add_option("-d,--data", ablate_data, "Dataset directory (default: generate the default benchmark)");
  ablate->add_option("--data-seed", ablate_data_seed, "Seed of the generated benchmark");
  ablate->add_option("-c,--config", ablate_config, "Base config file")->check(CLI::ExistingFile);
  ablate->add_option("--set", ablate_sets, "Config override key=value");
  ablate->add_option("--seeds", ablate_seeds, "Training seeds")->delimiter(',');

  // report
  auto* report = app.add_subcommand("report", "Merge metric files and render plots");
  std::vector<fs::path> report_inputs;
  fs::path report_out, report_ckpt, report_data;
  std::string report_episode;
  report->add_option("-i,--inputs", report_inputs, "metrics.json files")->check(CLI::ExistingFile);
  report->add_option("-o,--out", report_out, "Report directory")->required();
  report->add_option("--checkpoint", report_ckpt, "Checkpoint for the plots")->check(CLI::ExistingFile);
  report->add_option("-d,--data", report_data, "Dataset for the plots");
  report->add_option("--episode", report_episode, "Episode to plot (default: first held-out episode)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) {
      write_dataset(generate_dataset(spec, gen_seed), gen_out);
      std::cout << dataset_hash(gen_out) << "\n";
    } else if (*train) {
      TrainConfig config = train_config.empty() ? TrainConfig{} : TrainConfig::load(train_config);
      if (!train_resume.empty()) config = read_checkpoint_info(train_resume).config;
      apply_sets(config, train_sets);
      if (auto dir = apply_env_overrides(config)) train_out = *dir;
      if (train_out.empty()) throw std::invalid_argument("train: no output directory (--out or SIF3D_OUT_DIR)");
      const Dataset data = read_dataset(train_data);
      Trainer trainer(config);
      if (!train_resume.empty()) trainer.load(train_resume);
      fs::create_directories(train_out);
      std::ofstream(train_out / "config.txt") << config.to_text();
      const TrainingResult result = run_training(trainer, data, train_out, print_losses);
      std::cout << "wrote " << result.checkpoints.size() << " checkpoints to " << train_out.string() << "\n";
    } else if (*eval) {
      const Dataset data = read_dataset(eval_data);
      const auto indices = select(data, eval_split);
      AblationRow row;
      if (eval_oracle) {
        row = {"oracle", 0, 0, evaluate_oracle(data, indices)};
      } else {
        if (eval_ckpt.empty()) throw std::invalid_argument("eval: --checkpoint is required unless --oracle is set");
        const CheckpointInfo info = read_checkpoint_info(eval_ckpt);
        Trainer trainer(info.config);
        trainer.load(eval_ckpt);
        row = {"checkpoint", info.seed, info.epoch, evaluate(trainer, data, indices)};
      }
      write_metric_files({row}, eval_out);
      std::cout << metrics_csv({row});
    } else if (*ablate) {
      TrainConfig config;
      config.model = ModelConfig::small();
      config.epochs = 30;
      if (!ablate_config.empty()) config = TrainConfig::load(ablate_config);
      apply_sets(config, ablate_sets);
      const Dataset data = ablate_data.empty() ? generate_dataset(BenchmarkSpec{}, ablate_data_seed) : read_dataset(ablate_data);
      const auto rows = run_ablation(config, data, ablation_grid(grid_name), ablate_seeds,
                                     [](const std::string& v, std::uint64_t seed, int epoch, const LossReport& r) {
                                       std::cout << v << " seed " << seed << " ";
                                       print_losses(epoch, r);
                                     });
      write_metric_files(rows, ablate_out);
      std::cout << metrics_csv(rows);
    } else if (*report) {
      std::vector<AblationRow> rows;
      for (const auto& in : report_inputs)
        for (auto& r : rows_from_json(read_text(in))) rows.push_back(std::move(r));
      write_metric_files(rows, report_out);
      if (!report_ckpt.empty()) {
        if (report_data.empty()) throw std::invalid_argument("report: plots need --data with --checkpoint");
        const Dataset data = read_dataset(report_data);
        const CheckpointInfo info = read_checkpoint_info(report_ckpt);
        Trainer trainer(info.config);
        trainer.load(report_ckpt);
        const EpisodeRecord* episode = nullptr;
        for (const auto& ep : data.episodes)
          if (ep.id == report_episode) episode = &ep;
        if (report_episode.empty()) {
          const auto test = split_dataset(data).test;
          if (test.empty()) throw std::invalid_argument("report: the dataset has no held-out episodes");
          episode = &data.episodes[test.front()];
        }
        if (!episode) throw std::invalid_argument("report: unknown episode '" + report_episode + "'");
        write_plots(data.scene(episode->scene_id).cloud, *episode, trainer.predict(*episode, data), report_out);
      }
      std::cout << "wrote report to " << report_out.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
