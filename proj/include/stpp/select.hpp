#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stpp/model.hpp"
#include "stpp/pseudolabel.hpp"
#include "stpp/segcore.hpp"

namespace stpp::select {

struct StabilityRecord {
  SampleId id = 0;
  double score = 0.0;  // in [0, K-1]
  bool operator==(const StabilityRecord&) const = default;
};

struct SplitPlan {
  std::vector<SampleId> reliable;    // descending score
  std::vector<SampleId> unreliable;  // descending score
  double proportion = 0.5;
};

/// Sum over the first K-1 masks of their mean IoU against the last mask.
double stability_score(std::span<const SegMask> masks, int num_classes);

/// One record per unlabeled image, in dataset order. Checkpoint masks use
/// `tta` (single-scale by default).
std::vector<StabilityRecord> score_unlabeled(std::span<const model::ModelParams> checkpoints,
                                             const Dataset& dataset,
                                             const pl::TtaConfig& tta = pl::TtaConfig::single_scale());

/// Number of reliable images for N records: round-half-up of R * N.
std::size_t reliable_count(double proportion, std::size_t n);

/// Descending score, ties by ascending id; the first reliable_count() are reliable.
/// Accepts proportion in (0, 1]; 1.0 marks every image reliable.
SplitPlan rank_and_split(std::span<const StabilityRecord> records, double proportion);

/// Uniformly random split of the same sizes as rank_and_split, seeded.
SplitPlan random_split(std::span<const SampleId> ids, double proportion, std::uint64_t seed);

/// Argmax label where the top probability reaches `threshold`, kIgnore elsewhere.
SegMask pixel_confidence_filter(const model::PixelScores& probs, double threshold);

/// CSV with header "id,score,bucket", rows in plan order (reliable first).
void write_score_table(std::ostream& out, std::span<const StabilityRecord> records, const SplitPlan& plan);

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace stpp::select
