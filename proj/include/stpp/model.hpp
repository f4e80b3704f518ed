#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stpp/segcore.hpp"

namespace stpp::model {

/// Per-pixel engineered features for the linear segmenter. For a 3-channel
/// image: raw channels, window mean and std at radius 1 and 3, then the
/// normalized (row, col) position, giving 17 values per pixel.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int num_features = 0;
  std::vector<double> values;

  const double* pixel(std::size_t p) const { return values.data() + p * num_features; }
};

inline constexpr int kWindowRadii[] = {1, 3};

constexpr int feature_count(int channels) { return channels * 5 + 2; }
inline constexpr int kNumFeatures = feature_count(3);

FeatureMap compute_features(const Image& img);

/// H x W x C per-pixel class scores (logits or probabilities).
struct PixelScores {
  int height = 0;
  int width = 0;
  int classes = 0;
  std::vector<double> values;

  PixelScores() = default;
  PixelScores(int h, int w, int c) : height(h), width(w), classes(c), values(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double* pixel(std::size_t p) { return values.data() + p * classes; }
  const double* pixel(std::size_t p) const { return values.data() + p * classes; }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

struct ModelParams {
  int num_classes = 0;
  int num_features = 0;
  std::vector<double> weights;  // row-major num_classes x num_features
  std::vector<double> bias;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;

  /// Small Gaussian weights and zero bias drawn from `seed`.
  static ModelParams init(int num_classes, std::uint64_t seed, int num_features = kNumFeatures);
  static ModelParams zeros(int num_classes, int num_features = kNumFeatures);

  double& w(int cls, int feat) { return weights[static_cast<std::size_t>(cls) * num_features + feat]; }
  double w(int cls, int feat) const { return weights[static_cast<std::size_t>(cls) * num_features + feat]; }

  void check_finite() const;
  bool operator==(const ModelParams&) const = default;
};

struct TrainConfig {
  double base_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 8;
  int epochs = 30;
  double poly_power = 0.9;
  double unlabeled_loss_weight = 1.0;
  double head_lr_multiplier = 10.0;  // applied to the bias
  int grad_threads = 1;

  void validate() const;
};

PixelScores forward(const ModelParams& params, const FeatureMap& features);
PixelScores forward(const ModelParams& params, const Image& img);
PixelScores softmax(const PixelScores& logits);
SegMask argmax(const PixelScores& scores);

struct LossResult {
  double loss = 0.0;
  PixelScores grad;  // d loss / d logits
  std::size_t valid_pixels = 0;
};

/// Mean cross-entropy over non-ignored pixels.
LossResult cross_entropy_ignore(const PixelScores& logits, const SegMask& target);

double poly_lr(double base_lr, std::uint64_t iter, std::uint64_t total_iter, double power);

struct BatchItem {
  const Image* image = nullptr;
  const SegMask* target = nullptr;
  double weight = 1.0;
};

struct ParamGrad {
  double loss = 0.0;  // includes the weight-decay term
  std::vector<double> weights;
  std::vector<double> bias;
  std::size_t valid_pixels = 0;
};

/// Objective over a batch:
///   sum_i weight_i * sum_valid CE_i / (total valid pixels) + wd/2 * |theta|^2
ParamGrad loss_and_grad(const ModelParams& params, std::span<const BatchItem> batch, double weight_decay,
                        int threads = 1);

struct TrainState {
  ModelParams params;
  std::vector<double> velocity_w;
  std::vector<double> velocity_b;

  explicit TrainState(ModelParams p);
};

struct StepResult {
  double loss = 0.0;  // before the update
  double lr = 0.0;
};

StepResult train_step(TrainState& state, std::span<const BatchItem> batch, const TrainConfig& cfg,
                      std::uint64_t iter, std::uint64_t total_iter);

// ---------------------------------------------------------------------------
// Checkpoints (layout in docs/formats.md)

struct CheckpointTag {
  std::uint32_t numerator = 1;
  std::uint32_t denominator = 1;
  bool operator==(const CheckpointTag&) const = default;
};

struct Checkpoint {
  ModelParams params;
  CheckpointTag tag;
  std::uint64_t config_hash = 0;
};

std::vector<std::uint8_t> save_checkpoint(const ModelParams& params, CheckpointTag tag = {},
                                          std::uint64_t config_hash = 0);
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace stpp::model
