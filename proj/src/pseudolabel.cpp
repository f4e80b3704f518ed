#include "stpp/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "stpp/augment.hpp"
#include "stpp/error.hpp"

namespace stpp::pl {

void TtaConfig::validate() const {
  require(!scales.empty(), ErrorKind::kConfig, "tta.scales must not be empty");
  for (double s : scales) require(s > 0 && std::isfinite(s), ErrorKind::kConfig, "tta.scales must be positive");
}

namespace {

// Bilinear resample of a probability map, same sampling grid as aug::resize_bilinear.
model::PixelScores resize_scores(const model::PixelScores& in, int out_h, int out_w) {
  if (in.height == out_h && in.width == out_w) return in;
  auto taps = [](int n_in, int n_out) {
    std::vector<std::pair<std::pair<int, int>, double>> t(static_cast<std::size_t>(n_out));
    const double ratio = static_cast<double>(n_in) / n_out;
    for (int i = 0; i < n_out; ++i) {
      const double src = std::clamp((i + 0.5) * ratio - 0.5, 0.0, static_cast<double>(n_in - 1));
      const int lo = static_cast<int>(std::floor(src));
      t[static_cast<std::size_t>(i)] = {{lo, std::min(lo + 1, n_in - 1)}, src - lo};
    }
    return t;
  };
  const auto ty = taps(in.height, out_h);
  const auto tx = taps(in.width, out_w);
  const int nc = in.classes;
  model::PixelScores out(out_h, out_w, nc);
  auto at = [&](int r, int c) { return in.pixel(static_cast<std::size_t>(r) * in.width + c); };
  for (int r = 0; r < out_h; ++r) {
    const auto& [ry, fy] = ty[static_cast<std::size_t>(r)];
    for (int c = 0; c < out_w; ++c) {
      const auto& [rx, fx] = tx[static_cast<std::size_t>(c)];
      const double* a = at(ry.first, rx.first);
      const double* b = at(ry.first, rx.second);
      const double* d = at(ry.second, rx.first);
      const double* e = at(ry.second, rx.second);
      double* o = out.pixel(static_cast<std::size_t>(r) * out_w + c);
      for (int k = 0; k < nc; ++k)
        o[k] = (a[k] * (1 - fx) + b[k] * fx) * (1 - fy) + (d[k] * (1 - fx) + e[k] * fx) * fy;
    }
  }
  return out;
}

void unflip(model::PixelScores& s) {
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width / 2; ++c) {
      double* a = s.pixel(static_cast<std::size_t>(r) * s.width + c);
      double* b = s.pixel(static_cast<std::size_t>(r) * s.width + (s.width - 1 - c));
      std::swap_ranges(a, a + s.classes, b);
    }
}

}  // namespace

model::PixelScores predict_proba_tta(const model::ModelParams& params, const Image& img, const TtaConfig& tta) {
  tta.validate();
  params.check_finite();
  model::PixelScores acc(img.height, img.width, params.num_classes);
  int views = 0;
  for (double s : tta.scales) {
    const int h = std::max(1, static_cast<int>(std::lround(img.height * s)));
    const int w = std::max(1, static_cast<int>(std::lround(img.width * s)));
    const Image scaled = aug::resize_bilinear(img, h, w);
    for (int flip = 0; flip < (tta.use_flip ? 2 : 1); ++flip) {
      auto probs = model::softmax(model::forward(params, flip ? aug::horizontal_flip(scaled) : scaled));
      if (flip) unflip(probs);
      const auto back = resize_scores(probs, img.height, img.width);
      for (std::size_t k = 0; k < acc.values.size(); ++k) acc.values[k] += back.values[k];
      ++views;
    }
  }
  for (auto& v : acc.values) v /= views;
  return acc;
}

SegMask pseudo_label(const model::ModelParams& params, const Image& img, const TtaConfig& tta) {
  return model::argmax(predict_proba_tta(params, img, tta));
}

Dataset label_dataset(const model::ModelParams& params, const Dataset& dataset, const TtaConfig& tta,
                      std::span<const SampleId> subset) {
  Dataset out = dataset;
  std::unordered_set<SampleId> wanted(subset.begin(), subset.end());
  for (SampleId id : subset) (void)dataset.find_unlabeled(id);
  for (auto& s : out.unlabeled)
    if (wanted.count(s.id)) s.pseudo = pseudo_label(params, s.image, tta);
  return out;
}

}  // namespace stpp::pl
