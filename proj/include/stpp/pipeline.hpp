#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stpp/augment.hpp"
#include "stpp/model.hpp"
#include "stpp/pseudolabel.hpp"
#include "stpp/segcore.hpp"
#include "stpp/select.hpp"

namespace stpp::pipeline {

struct PipelineConfig {
  model::TrainConfig train;
  aug::WeakAugConfig weak;
  aug::StrongAugConfig strong;
  pl::TtaConfig tta;                                                // final pseudo labels
  pl::TtaConfig checkpoint_tta = pl::TtaConfig::single_scale();    // stability-score masks
  double reliable_fraction = 0.5;
  bool sda = true;  // strong augmentation on pseudo-labeled images
  double confidence_threshold = 0.5;
  std::uint64_t seed = 1;
  std::uint64_t config_hash = 0;

  void validate() const;
};

enum class Source { kLabeled, kPseudo };

struct StageSpec {
  std::string name;
  std::vector<SampleId> labeled;
  std::vector<SampleId> pseudo;  // unlabeled ids; each must carry a pseudo mask
  std::optional<aug::StrongAugConfig> strong_labeled;    // nullopt: weak only
  std::optional<aug::StrongAugConfig> strong_unlabeled;  // nullopt: weak only
  bool oversample = true;  // replicate labeled ids up to |pseudo|
};

/// One entry of a stage's training multiset.
struct TrainingItem {
  SampleId id = 0;
  Source source = Source::kLabeled;
  int copy = 0;  // replication index for oversampled labeled ids
  bool strong = false;
  bool operator==(const TrainingItem&) const = default;
};

std::vector<TrainingItem> training_set(const StageSpec& stage);

/// Each labeled id repeated ceil(target / M) times; once when target < M.
std::vector<SampleId> oversample_labeled(std::span<const SampleId> labeled, std::size_t target_count);

struct TrainLog {
  std::vector<std::vector<TrainingItem>> epoch_orders;
  std::vector<double> losses;
};

struct StageOutput {
  model::ModelParams params;
  std::vector<model::ModelParams> checkpoints;  // filled when requested
};

model::ModelParams initial_params(const PipelineConfig& cfg, int num_classes);

/// Trains from `init` on the stage's multiset for cfg.train.epochs. With
/// `checkpoints` true, snapshots are kept after ceil(j * total / 3) steps, j = 1..3.
StageOutput train_stage(const model::ModelParams& init, const StageSpec& stage, const Dataset& dataset,
                        const PipelineConfig& cfg, bool checkpoints = false, TrainLog* log = nullptr);

/// Teacher on the labeled set with weak augmentation only, plus K = 3 checkpoints.
StageOutput train_supervised(const Dataset& dataset, const PipelineConfig& cfg, TrainLog* log = nullptr);

/// Re-training stage: fresh parameters from `student_init`.
model::ModelParams retrain(const model::ModelParams& student_init, const StageSpec& stage, const Dataset& dataset,
                           const PipelineConfig& cfg, TrainLog* log = nullptr);

struct Evaluation {
  double miou = 0.0;
  std::vector<std::optional<double>> class_iou;
};

/// Single-scale argmax over the whole validation set, one global confusion matrix.
Evaluation evaluate(const model::ModelParams& params, std::span<const LabeledSample> validation, int num_classes);

// ---------------------------------------------------------------------------
// Reports

struct StageReport {
  std::string name;
  std::optional<Evaluation> validation;
  std::vector<std::pair<std::string, double>> metrics;

  /// CSV rows "stage,metric,class,value" for this stage (no header).
  std::string fragment() const;
};

struct RunReport {
  std::string pipeline;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<StageReport> stages;
  double wall_clock_seconds = 0.0;  // not part of body()

  const StageReport* find(std::string_view stage) const;
  std::optional<double> metric(std::string_view stage, std::string_view name) const;
  /// Header, run rows, then every stage fragment in order.
  std::string body() const;
};

/// Receives stage artifacts as they are produced; the CLI persists them.
class ArtifactSink {
 public:
  virtual ~ArtifactSink() = default;
  virtual void checkpoint(const std::string& stage, const std::string& name, const model::ModelParams& params,
                          model::CheckpointTag tag) = 0;
  virtual void pseudo_masks(const std::string& stage, const Dataset& dataset, std::span<const SampleId> ids) = 0;
  virtual void table(const std::string& stage, const std::string& file_name, const std::string& csv) = 0;
  virtual void stage_done(const StageReport& report) = 0;
  /// Called before each re-training stage with its training-set specification.
  virtual void stage_started(const StageSpec&) {}
};

struct RunResult {
  model::ModelParams params;
  RunReport report;
};

RunResult run_suponly(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                      ArtifactSink* sink = nullptr);
RunResult run_st(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                 ArtifactSink* sink = nullptr);
RunResult run_stpp(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                   ArtifactSink* sink = nullptr);

/// Modes: no-sda, sda-labeled-too, single-aug:<colorjitter|grayscale|blur|cutout>,
/// cutout-on-labeled, random-two-stage, pixel-two-stage, iterative:+k.
RunResult run_ablation(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                       std::string_view mode, ArtifactSink* sink = nullptr);

/// Throws ErrorKind::kConfig for an unknown ablation mode.
void validate_ablation_mode(std::string_view mode);

/// Dispatch on "suponly" | "st" | "stpp", with an optional ablation mode.
RunResult run_pipeline(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                       std::string_view pipeline, std::string_view ablation = {}, ArtifactSink* sink = nullptr);

}  // namespace stpp::pipeline
