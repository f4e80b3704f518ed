#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stpp/model.hpp"
#include "stpp/segcore.hpp"

namespace testing {

inline stpp::SegMask mask_from(std::initializer_list<std::initializer_list<int>> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.begin()->size());
  stpp::SegMask m(h, w);
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (int v : row) m.at(r, c++) = static_cast<stpp::ClassId>(v);
    ++r;
  }
  return m;
}

// Labels drawn from {0..classes-1} plus kIgnore with probability ignore_prob.
inline stpp::SegMask random_mask(std::mt19937_64& rng, int h, int w, int classes, double ignore_prob) {
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::bernoulli_distribution ignore(ignore_prob);
  stpp::SegMask m(h, w);
  for (auto& v : m.labels) v = ignore(rng) ? stpp::kIgnore : static_cast<stpp::ClassId>(cls(rng));
  return m;
}

inline stpp::Image random_image(std::mt19937_64& rng, int h, int w, int channels = 3) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  stpp::Image img(h, w, channels);
  for (auto& v : img.data) v = u(rng);
  return img;
}

// Per-class IoU by set counting over pixels whose reference is valid. A class
// absent from both masks yields nullopt.
inline std::vector<std::optional<double>> oracle_class_iou(const stpp::SegMask& pred, const stpp::SegMask& ref,
                                                           int classes) {
  std::vector<std::optional<double>> out;
  for (int c = 0; c < classes; ++c) {
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < ref.labels.size(); ++i) {
      if (ref.labels[i] == stpp::kIgnore) continue;
      const bool in_ref = ref.labels[i] == c;
      const bool in_pred = pred.labels[i] == c;
      inter += in_ref && in_pred;
      uni += in_ref || in_pred;
    }
    if (uni == 0)
      out.push_back(std::nullopt);
    else
      out.push_back(static_cast<double>(inter) / static_cast<double>(uni));
  }
  return out;
}

inline double oracle_mean_iou(const stpp::SegMask& pred, const stpp::SegMask& ref, int classes) {
  double sum = 0;
  int n = 0;
  for (const auto& v : oracle_class_iou(pred, ref, classes))
    if (v) {
      sum += *v;
      ++n;
    }
  return n == 0 ? 1.0 : sum / n;
}

// Scalar recomputation of the batch objective, independent of loss_and_grad.
inline double objective(const stpp::model::ModelParams& p, const std::vector<stpp::Image>& imgs,
                        const std::vector<stpp::SegMask>& masks, const std::vector<double>& weights, double wd) {
  double ce = 0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const auto fm = stpp::model::compute_features(imgs[i]);
    for (std::size_t px = 0; px < masks[i].labels.size(); ++px) {
      const stpp::ClassId t = masks[i].labels[px];
      if (t == stpp::kIgnore) continue;
      std::vector<double> z(p.num_classes);
      for (int k = 0; k < p.num_classes; ++k) {
        z[k] = p.bias[k];
        for (int f = 0; f < p.num_features; ++f) z[k] += p.w(k, f) * fm.pixel(px)[f];
      }
      const double mx = *std::max_element(z.begin(), z.end());
      double lse = 0;
      for (double v : z) lse += std::exp(v - mx);
      ce += weights[i] * (mx + std::log(lse) - z[t]);
      ++valid;
    }
  }
  double norm = 0;
  for (double v : p.weights) norm += v * v;
  for (double v : p.bias) norm += v * v;
  return (valid ? ce / static_cast<double>(valid) : 0.0) + 0.5 * wd * norm;
}

// Euclidean relative error between two gradient vectors.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  return denom == 0 ? std::sqrt(diff) : std::sqrt(diff) / denom;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("stpp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
