#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "stpp/segcore.hpp"

namespace stpp::aug {

/// Deterministic random stream derived from (seed, sample id, epoch, salt).
/// Two streams built from the same key produce identical draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t sample_id = 0, std::uint64_t epoch = 0, std::uint64_t salt = 0);

  double uniform(double lo, double hi);
  bool bernoulli(double p);
  int uniform_int(int lo, int hi);  // inclusive
  double normal(double mean, double stddev);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to mix derivation keys.
std::uint64_t mix64(std::uint64_t x);

struct WeakAugConfig {
  double flip_prob = 0.5;
  double scale_low = 0.5;
  double scale_high = 2.0;
  int crop_size = 64;

  void validate() const;
};

struct ColorJitterConfig {
  double brightness = 0.5;
  double contrast = 0.5;
  double saturation = 0.5;
  double hue = 0.25;
  double apply_prob = 0.8;
};

struct BlurConfig {
  double apply_prob = 0.5;
  double sigma_low = 0.1;
  double sigma_high = 2.0;
};

struct CutoutConfig {
  double apply_prob = 1.0;
  double area_low = 0.02;
  double area_high = 0.2;
  double aspect_low = 0.3;
  double aspect_high = 3.3;
};

struct StrongAugConfig {
  ColorJitterConfig colorjitter;
  double grayscale_prob = 0.2;
  BlurConfig blur;
  CutoutConfig cutout;

  void validate() const;
  /// Every photometric and Cutout probability set to zero.
  static StrongAugConfig disabled();
  /// Only the named augmentation (colorjitter | grayscale | blur | cutout) stays enabled.
  StrongAugConfig only(const std::string& name) const;
};

/// Geometry drawn by weak_augment; replaying it on the raw inputs reproduces the output.
struct WeakTransform {
  bool flip = false;
  double scale = 1.0;
  int scaled_height = 0;
  int scaled_width = 0;
  int crop_row = 0;
  int crop_col = 0;
  int crop_size = 0;
};

WeakTransform draw_weak_transform(int height, int width, const WeakAugConfig& cfg, RngStream& rng);
Image apply_weak_transform(const Image& img, const WeakTransform& t);
SegMask apply_weak_transform(const SegMask& mask, const WeakTransform& t);

std::pair<Image, SegMask> weak_augment(const Image& img, const SegMask& mask, const WeakAugConfig& cfg,
                                       RngStream& rng, WeakTransform* record = nullptr);

struct JitterDraws {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;                    // fraction of the hue circle
  std::array<int, 4> order{0, 1, 2, 3};  // 0 brightness, 1 contrast, 2 saturation, 3 hue
};

struct CutoutRect {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

/// What strong_augment actually applied; absent members were skipped.
struct StrongTrace {
  std::optional<JitterDraws> jitter;
  bool grayscale = false;
  std::optional<double> blur_sigma;
  std::optional<CutoutRect> cutout;
};

std::pair<Image, SegMask> strong_augment(const Image& img, const SegMask& mask, const StrongAugConfig& cfg,
                                         RngStream& rng, StrongTrace* trace = nullptr);

// Primitive transforms -------------------------------------------------------

Image horizontal_flip(const Image& img);
SegMask horizontal_flip(const SegMask& mask);
Image resize_bilinear(const Image& img, int out_h, int out_w);
SegMask resize_nearest(const SegMask& mask, int out_h, int out_w);

Image grayscale(const Image& img);
Image gaussian_blur(const Image& img, double sigma);
Image colorjitter(const Image& img, const JitterDraws& draws);
void cutout(Image& img, SegMask& mask, const CutoutRect& rect, RngStream& rng);

}  // namespace stpp::aug
