#include "stpp/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "stpp/augment.hpp"
#include "stpp/error.hpp"
#include "stpp/report_format.hpp"

namespace stpp::select {

double stability_score(std::span<const SegMask> masks, int num_classes) {
  require(masks.size() >= 2, ErrorKind::kConfig, "stability_score needs K >= 2 masks");
  const SegMask& last = masks.back();
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < masks.size(); ++j) s += mean_iou(masks[j], last, num_classes);
  return s;
}

std::vector<StabilityRecord> score_unlabeled(std::span<const model::ModelParams> checkpoints,
                                             const Dataset& dataset, const pl::TtaConfig& tta) {
  require(checkpoints.size() >= 2, ErrorKind::kConfig, "score_unlabeled needs >= 2 checkpoints");
  std::vector<StabilityRecord> records;
  records.reserve(dataset.unlabeled.size());
  std::vector<SegMask> masks(checkpoints.size());
  for (const auto& s : dataset.unlabeled) {
    for (std::size_t j = 0; j < checkpoints.size(); ++j) masks[j] = pl::pseudo_label(checkpoints[j], s.image, tta);
    records.push_back({s.id, stability_score(masks, dataset.num_classes)});
  }
  return records;
}

std::size_t reliable_count(double proportion, std::size_t n) {
  return static_cast<std::size_t>(std::floor(proportion * static_cast<double>(n) + 0.5));
}

namespace {
void check_proportion(double proportion) {
  require(proportion > 0.0 && proportion <= 1.0, ErrorKind::kConfig, "reliable proportion must be in (0,1]");
}
}  // namespace

SplitPlan rank_and_split(std::span<const StabilityRecord> records, double proportion) {
  require(!records.empty(), ErrorKind::kConfig, "rank_and_split: no records");
  check_proportion(proportion);
  std::vector<StabilityRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  SplitPlan plan;
  plan.proportion = proportion;
  const auto k = reliable_count(proportion, sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) (i < k ? plan.reliable : plan.unreliable).push_back(sorted[i].id);
  return plan;
}

SplitPlan random_split(std::span<const SampleId> ids, double proportion, std::uint64_t seed) {
  require(!ids.empty(), ErrorKind::kConfig, "random_split: no ids");
  check_proportion(proportion);
  std::vector<SampleId> order(ids.begin(), ids.end());
  std::sort(order.begin(), order.end());
  aug::RngStream rng(seed, 0, 0, 0x5e1ec7);
  std::shuffle(order.begin(), order.end(), rng.engine());
  SplitPlan plan;
  plan.proportion = proportion;
  const auto k = reliable_count(proportion, order.size());
  plan.reliable.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  plan.unreliable.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  return plan;
}

SegMask pixel_confidence_filter(const model::PixelScores& probs, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::kConfig, "confidence threshold must be in [0,1]");
  SegMask out(probs.height, probs.width);
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    const double* s = probs.pixel(p);
    int best = 0;
    for (int c = 1; c < probs.classes; ++c)
      if (s[c] > s[best]) best = c;
    out.labels[p] = s[best] >= threshold ? static_cast<ClassId>(best) : kIgnore;
  }
  return out;
}

void write_score_table(std::ostream& out, std::span<const StabilityRecord> records, const SplitPlan& plan) {
  std::unordered_map<SampleId, double> score;
  for (const auto& r : records) score[r.id] = r.score;
  auto lookup = [&](SampleId id) {
    auto it = score.find(id);
    if (it == score.end()) fail(ErrorKind::kLookup, "score table: id " + std::to_string(id) + " has no score");
    return it->second;
  };
  out << "id,score,bucket\n";
  for (SampleId id : plan.reliable) out << id << ',' << format_real(lookup(id)) << ",reliable\n";
  for (SampleId id : plan.unreliable) out << id << ',' << format_real(lookup(id)) << ",unreliable\n";
}

namespace {
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}
}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::kDimension, "spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace stpp::select
