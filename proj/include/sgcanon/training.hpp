#pragma once

// End-to-end training of the canonicalization parameters and the layout
// GCN against ground-truth boxes with an L1 objective.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sgcanon/canon.hpp"
#include "sgcanon/core.hpp"
#include "sgcanon/metrics.hpp"
#include "sgcanon/neural.hpp"

namespace sgcanon {

enum class Mode { baseline, sgc_known, wsgc_s, wsgc_e };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct TrainConfig {
  Mode mode = Mode::wsgc_s;
  int layers = 5;
  int dim = 128;
  int hidden = 512;
  int box_hidden = 512;
  int epochs = 200;
  int batch_size = 32;
  double lr_canon = 1e-2;
  double lr_gcn = 1e-4;
  std::uint64_t seed = 0;
  // Running-mean reward baseline for the score-function estimator.
  bool reinforce_baseline = false;
  double baseline_decay = 0.9;
  int patience = 10;  // epochs without validation mIOU improvement
  double prune_eps = 1e-4;
  int threads = 1;
  std::optional<FormulaSet> formulas;  // required by sgc-known

  // Dataset and output locations, used by the command-line driver.
  std::string vocab_path;
  std::string train_path;
  std::string val_path;
  std::string formulas_path;
  std::string output_dir;

  void validate() const;
};

// Reads every field above from JSON; "formulas" is resolved later from
// formulas_path against a vocabulary.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double miou = 0.0;
  double r03 = 0.0;
  double r05 = 0.0;
  Eigen::VectorXd p_trans;  // per relation
  Eigen::MatrixXd p_conv;   // |R| x (|R|+1)
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_miou = 0.0;
  bool stopped_early = false;
  bool aborted = false;
  std::string message;
};

// Epoch, loss, miou, r03, r05, then p_trans per relation and p_conv per
// (relation, converse) pair including the no-converse outcome.
void write_report_csv(const std::filesystem::path& path, const TrainReport& report,
                      const RelationVocab& vocab);
nlohmann::json report_summary(const TrainReport& report, const RelationVocab& vocab);

// Mean absolute difference over all 4n coordinates.
double l1_loss(const Layout& pred, const Layout& gt);
// d l1_loss / d pred (subgradient 0 at ties).
Eigen::MatrixXd l1_loss_grad(const Layout& pred, const Layout& gt);

// reward * sum_e grad log p_conv(Z_e | r(e)), with tied entries folded.
Eigen::MatrixXd reinforce_grad(const SampleRecord& sample, double reward,
                               const CanonParams& params);

// Deterministic canonicalization used at inference time. wsgc-s takes the
// most probable converse outcome per edge.
WeightedSceneGraph canonicalize_for_inference(Mode mode, const SceneGraph& g,
                                              const CanonParams& params,
                                              const FormulaSet* formulas,
                                              double prune_eps = 1e-4);

Layout predict(Mode mode, const SceneGraph& g, const GcnModel& model,
               const CanonParams& params, const FormulaSet* formulas,
               double prune_eps = 1e-4);

std::vector<Layout> predict_all(Mode mode, const std::vector<SceneRecord>& scenes,
                                const GcnModel& model, const CanonParams& params,
                                const FormulaSet* formulas, double prune_eps = 1e-4);

// Loss and gradients of one scene for one optimizer step.
struct SceneStep {
  double loss = 0.0;
  GcnGradient gcn;
  CanonGradient canon;
  SampleRecord sample;  // wsgc-s only
};

// `reward_offset` is subtracted from the reward inside the estimator.
SceneStep scene_step(Mode mode, const SceneRecord& scene, const GcnModel& model,
                     const CanonParams& params, const FormulaSet* formulas,
                     Rng& rng, double prune_eps = 1e-4, double reward_offset = 0.0);

struct TrainResult {
  GcnModel model;
  CanonParams params;
  TrainReport report;
};

// The returned model and parameters are the best ones by validation mIOU
// (the last good ones if training aborted on a non-finite value).
TrainResult train(const TrainConfig& config, const RelationVocab& vocab,
                  const std::vector<SceneRecord>& train_set,
                  const std::vector<SceneRecord>& val_set);

// ------------------------------------------------------------ checkpoints

struct Checkpoint {
  Mode mode = Mode::baseline;
  RelationVocab vocab;
  std::optional<FormulaSet> formulas;
  CanonParams params;
  GcnModel model;
  double prune_eps = 1e-4;
};

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sgcanon
