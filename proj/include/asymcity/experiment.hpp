#pragma once

// End-to-end experiment orchestration behind the `asymcity` command line.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymcity/asymmetry.hpp"
#include "asymcity/encoder.hpp"
#include "asymcity/morphology.hpp"
#include "asymcity/perception.hpp"
#include "asymcity/training.hpp"
#include "asymcity/trajectories.hpp"

namespace asymcity {

struct CitySpec {
  Layout layout = Layout::kGrid;
  HeightMode height_mode = HeightMode::kUniform;
  std::optional<std::string> import_path;
  GridParams grid;
  RadialParams radial;
  HeightParams heights;
};

struct TrajectorySpec {
  int K = 8;
  int N_k = 64;
  int L = 20;
  double train_fraction = 0.9;
};

struct ExperimentConfig {
  CitySpec city;
  PerceptionConfig perception;
  double grid_step = 10.0;
  TrajectorySpec trajectories;
  EncoderConfig encoder;  // seq_len and n_origins are derived from trajectories
  TrainConfig train;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::optional<std::string> dataset_path;
  std::optional<std::string> checkpoint_path;
  std::optional<std::string> resume_from;
};

/// Strict parse: unknown keys are rejected with their path.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Validates every sub-config and fills derived fields.
ExperimentConfig finalize(ExperimentConfig cfg);
std::string config_digest(const ExperimentConfig& cfg);

/// Sub-seed for a pipeline stage: master XOR fnv1a(tag).
std::uint64_t stage_seed(const ExperimentConfig& cfg, const std::string& tag);

City build_city(const ExperimentConfig& cfg);
Dataset build_experiment_dataset(const ExperimentConfig& cfg, const City& city);

struct CityResult {
  Layout layout = Layout::kGrid;
  HeightMode height_mode = HeightMode::kUniform;
  std::uint64_t seed = 0;
  AsymmetryReport report;
  TrainingLog log;
  double normalized_recon_error = 0.0;
  double separability = 0.0;
  double shared_dispersion_init = 0.0;
  double shared_dispersion_final = 0.0;
};

struct ExperimentReport {
  std::vector<CityResult> cities;
  double grid_spread = 0.0;    // (max - min) / min of D_origin over height modes
  double radial_spread = 0.0;
};

// Command bodies. Each writes its artifacts under cfg.output_dir.
City cmd_citygen(const ExperimentConfig& cfg);
Dataset cmd_featurize(const ExperimentConfig& cfg);
TrainResult cmd_train(const ExperimentConfig& cfg);
AsymmetryReport cmd_analyze(const ExperimentConfig& cfg);
ExperimentReport cmd_pipeline(const ExperimentConfig& cfg);

/// Runs one city end to end into `dir` (city, dataset, checkpoint, log,
/// report, SVGs).
CityResult run_city(const ExperimentConfig& cfg, const std::filesystem::path& dir);

double relative_spread(const std::vector<double>& values);
nlohmann::json experiment_report_to_json(const ExperimentReport& report);
std::string experiment_table_csv(const ExperimentReport& report);

std::string read_text(const std::filesystem::path& path, const std::string& what);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace asymcity
