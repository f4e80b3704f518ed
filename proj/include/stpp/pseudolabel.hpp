#pragma once

#include <span>
#include <vector>

#include "stpp/model.hpp"
#include "stpp/segcore.hpp"

namespace stpp::pl {

struct TtaConfig {
  std::vector<double> scales{0.5, 0.75, 1.0, 1.5, 2.0};
  bool use_flip = true;

  void validate() const;
  static TtaConfig single_scale() { return {{1.0}, false}; }
};

/// Averages softmax maps over every (scale, flip) view, resampled back to H x W.
model::PixelScores predict_proba_tta(const model::ModelParams& params, const Image& img, const TtaConfig& tta);

/// Argmax of predict_proba_tta; ties go to the smaller class id.
SegMask pseudo_label(const model::ModelParams& params, const Image& img, const TtaConfig& tta);

/// Copy of `dataset` with fresh pseudo masks attached to exactly the listed unlabeled ids.
Dataset label_dataset(const model::ModelParams& params, const Dataset& dataset, const TtaConfig& tta,
                      std::span<const SampleId> subset);

}  // namespace stpp::pl
