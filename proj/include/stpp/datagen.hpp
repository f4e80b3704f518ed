#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stpp/segcore.hpp"

namespace stpp::datagen {

struct GenConfig {
  int image_size = 64;
  int num_classes = 4;  // background + shape classes
  int pool_size = 256;
  int validation_size = 64;
  double labeled_fraction = 1.0 / 16.0;
  double noise_sigma = 0.08;
  double color_margin = 1.0;  // class colour separation from the background, in [0,1]
  int max_shapes = 3;
  int min_shape_size = 12;  // px, bounding box side
  int max_shape_size = 30;
  double texture_amplitude = 0.12;
  double difficulty_spread = 0.8;  // how far hard images pull object colours toward the background
  double difficulty_power = 2.5;   // difficulty = u^power, u uniform; > 1 skews toward easy images
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t labeled_count() const;
};

struct GeneratedData {
  Dataset train;  // unlabeled samples carry their ground truth in `reference`
  std::vector<LabeledSample> validation;
  std::vector<double> difficulty;  // per pool image, indexed by id
  double level = 0.0;
};

GeneratedData generate(const GenConfig& cfg);

/// One dataset per noise level; everything else (shapes, splits, ids) is shared.
std::vector<GeneratedData> difficulty_sweep(const GenConfig& cfg, std::span<const double> levels);

/// images/<id>.img, masks/<id>.mask (ground truth for every split) and manifest.csv.
void write_dataset(const std::filesystem::path& dir, const GeneratedData& data);
GeneratedData read_dataset(const std::filesystem::path& dir);

}  // namespace stpp::datagen
