#pragma once

// Grid experiments over (mode x layer count x object count) on synthetic
// data, with an optional generalization sweep and robustness table.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sgcanon/data.hpp"
#include "sgcanon/training.hpp"

namespace sgcanon {

struct ExperimentSpec {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  int workers = 1;
  SynthConfig synth;        // object counts are overridden per cell
  int train_count = 256;
  int val_count = 64;
  int test_count = 64;
  nlohmann::json train = nlohmann::json::object();  // TrainConfig overrides

  std::vector<Mode> modes;
  std::vector<int> layers;
  std::vector<int> objects;

  // Models trained at `train_objects` evaluated on fresh test sets.
  struct Generalization {
    int train_objects = 16;
    std::vector<int> eval_objects;
  };
  std::optional<Generalization> generalization;

  // Clean / equivalent / noisy evaluation of every cell on its test split.
  struct Robustness {
    double noise_fraction = 0.1;
  };
  std::optional<Robustness> robustness;

  bool save_checkpoints = false;
  bool plots = true;
};

ExperimentSpec experiment_from_json(const nlohmann::json& j);

struct CellResult {
  Mode mode = Mode::baseline;
  int layers = 0;
  int objects = 0;
  bool ok = false;
  std::string error;
  EvalResult test;
  double val_miou = 0.0;  // best validation mIOU, the selection criterion
  int best_epoch = 0;
  int epochs_run = 0;
  Eigen::VectorXd p_trans;
  Eigen::MatrixXd p_conv;
};

struct GeneralizationRow {
  Mode mode;
  int layers;
  int train_objects;
  int eval_objects;
  EvalResult result;
};

struct RobustnessRow {
  Mode mode;
  int layers;
  int objects;
  std::string condition;  // clean | equivalent | noisy
  EvalResult result;
};

struct ExperimentReport {
  std::vector<CellResult> cells;
  std::vector<GeneralizationRow> generalization;
  std::vector<RobustnessRow> robustness;
  int failures = 0;
};

// Datasets shared by every mode for one object count: the same seed gives
// the same scenes regardless of which cells run.
struct SplitData {
  std::vector<SceneRecord> train, val, test;
};
SplitData experiment_data(const ExperimentSpec& spec, int objects);

// Writes grid.csv, generalization.csv, robustness.csv, per-cell trajectory
// CSVs and SVG plots under `out_dir`. Cell failures are recorded in the
// report and in grid.csv; the remaining cells still run.
ExperimentReport run_experiment(const ExperimentSpec& spec,
                                const std::filesystem::path& out_dir);

}  // namespace sgcanon
