#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stpp {

using SampleId = std::uint32_t;
using ClassId = std::uint8_t;

/// Label excluded from loss and metrics.
inline constexpr ClassId kIgnore = 255;

/// Row-major H x W x C raster of values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f);

  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  float& at(int row, int col, int ch) { return data[index(row, col, ch)]; }
  float at(int row, int col, int ch) const { return data[index(row, col, ch)]; }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }

  bool operator==(const Image&) const = default;
};

/// Row-major H x W grid of class ids; kIgnore marks excluded pixels.
struct SegMask {
  int height = 0;
  int width = 0;
  std::vector<ClassId> labels;

  SegMask() = default;
  SegMask(int h, int w, ClassId fill = 0);

  ClassId& at(int row, int col) { return labels[static_cast<std::size_t>(row) * width + col]; }
  ClassId at(int row, int col) const { return labels[static_cast<std::size_t>(row) * width + col]; }
  std::size_t pixels() const { return labels.size(); }

  bool operator==(const SegMask&) const = default;
};

struct LabeledSample {
  SampleId id = 0;
  Image image;
  SegMask mask;
};

struct UnlabeledSample {
  SampleId id = 0;
  Image image;
  std::optional<SegMask> pseudo;
  // Ground truth kept only for pseudo-mask quality reports; never used for training.
  std::optional<SegMask> reference;
};

struct Dataset {
  std::vector<LabeledSample> labeled;
  std::vector<UnlabeledSample> unlabeled;
  int num_classes = 0;

  const UnlabeledSample& find_unlabeled(SampleId id) const;
  UnlabeledSample& find_unlabeled(SampleId id);
  std::vector<SampleId> unlabeled_ids() const;
};

/// Throws ErrorKind::kConfig / kLabel when uniqueness or class-range invariants fail.
void validate(const Dataset& dataset);
void validate(const Image& image);
void validate(const SegMask& mask, int num_classes);

// ---------------------------------------------------------------------------
// Metrics

/// C x C counts, rows = reference class, columns = predicted class. Predicted
/// kIgnore pixels are kept in a per-row miss counter so they hurt every class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void accumulate(const SegMask& pred, const SegMask& ref);

  int num_classes() const { return num_classes_; }
  std::int64_t at(int ref_class, int pred_class) const {
    return counts_[static_cast<std::size_t>(ref_class) * num_classes_ + pred_class];
  }
  std::int64_t pred_ignored(int ref_class) const { return pred_ignored_[ref_class]; }
  std::int64_t total() const;

  /// Absent when the class has zero union.
  std::optional<double> iou(int cls) const;
  double mean_iou() const;

  std::vector<std::int64_t> matrix() const { return counts_; }

 private:
  int num_classes_;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> pred_ignored_;
};

ConfusionMatrix confusion_matrix(const SegMask& pred, const SegMask& ref, int num_classes);
double mean_iou(const SegMask& pred, const SegMask& ref, int num_classes);
std::vector<std::pair<int, std::optional<double>>> per_class_iou(const SegMask& pred, const SegMask& ref,
                                                                 int num_classes);

// ---------------------------------------------------------------------------
// Raster files (layout in docs/formats.md)

std::vector<std::uint8_t> encode_mask(const SegMask& mask, int num_classes);
SegMask decode_mask(std::span<const std::uint8_t> bytes, int* num_classes = nullptr);
std::vector<std::uint8_t> encode_image(const Image& image);
Image decode_image(std::span<const std::uint8_t> bytes);

void write_mask(const std::filesystem::path& path, const SegMask& mask, int num_classes);
SegMask read_mask(const std::filesystem::path& path, int* num_classes = nullptr);
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace stpp
