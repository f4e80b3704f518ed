#include "stpp/segcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "byte_io.hpp"
#include "stpp/error.hpp"

namespace stpp {

Image::Image(int h, int w, int c, float fill)
    : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
  require(h >= 1 && w >= 1 && c >= 1, ErrorKind::kDimension, "image extents must be positive");
}

SegMask::SegMask(int h, int w, ClassId fill)
    : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {
  require(h >= 1 && w >= 1, ErrorKind::kDimension, "mask extents must be positive");
}

const UnlabeledSample& Dataset::find_unlabeled(SampleId id) const {
  auto it = std::find_if(unlabeled.begin(), unlabeled.end(), [id](const auto& s) { return s.id == id; });
  if (it == unlabeled.end()) fail(ErrorKind::kLookup, "unknown unlabeled id " + std::to_string(id));
  return *it;
}

UnlabeledSample& Dataset::find_unlabeled(SampleId id) {
  return const_cast<UnlabeledSample&>(std::as_const(*this).find_unlabeled(id));
}

std::vector<SampleId> Dataset::unlabeled_ids() const {
  std::vector<SampleId> ids;
  ids.reserve(unlabeled.size());
  for (const auto& s : unlabeled) ids.push_back(s.id);
  return ids;
}

void validate(const Image& image) {
  require(image.height >= 1 && image.width >= 1 && image.channels >= 1, ErrorKind::kDimension,
          "image extents must be positive");
  require(image.data.size() == image.pixels() * image.channels, ErrorKind::kDimension, "image buffer size");
  for (float v : image.data)
    require(std::isfinite(v) && v >= 0.0f && v <= 1.0f, ErrorKind::kRange, "image value outside [0,1]");
}

void validate(const SegMask& mask, int num_classes) {
  require(mask.labels.size() == mask.pixels() && mask.pixels() == static_cast<std::size_t>(mask.height) * mask.width,
          ErrorKind::kDimension, "mask buffer size");
  for (ClassId v : mask.labels)
    if (v >= num_classes && v != kIgnore) fail(ErrorKind::kLabel, "mask label " + std::to_string(v) + " >= C");
}

void validate(const Dataset& dataset) {
  require(dataset.num_classes >= 1 && dataset.num_classes < kIgnore, ErrorKind::kConfig, "num_classes");
  std::unordered_set<SampleId> seen;
  auto unique = [&](SampleId id) {
    if (!seen.insert(id).second) fail(ErrorKind::kConfig, "duplicate sample id " + std::to_string(id));
  };
  for (const auto& s : dataset.labeled) {
    unique(s.id);
    validate(s.image);
    validate(s.mask, dataset.num_classes);
    require(s.mask.height == s.image.height && s.mask.width == s.image.width, ErrorKind::kDimension,
            "labeled mask shape mismatch");
  }
  for (const auto& s : dataset.unlabeled) {
    unique(s.id);
    validate(s.image);
    if (s.pseudo) validate(*s.pseudo, dataset.num_classes);
  }
}

// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes),
      counts_(static_cast<std::size_t>(std::max(num_classes, 0)) * std::max(num_classes, 0), 0),
      pred_ignored_(static_cast<std::size_t>(std::max(num_classes, 0)), 0) {
  require(num_classes >= 1, ErrorKind::kConfig, "num_classes must be >= 1");
}

void ConfusionMatrix::accumulate(const SegMask& pred, const SegMask& ref) {
  require(pred.height == ref.height && pred.width == ref.width, ErrorKind::kDimension,
          "confusion matrix: mask shapes differ");
  const auto n = ref.labels.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ClassId r = ref.labels[i];
    if (r == kIgnore) continue;
    const ClassId p = pred.labels[i];
    require(r < num_classes_, ErrorKind::kLabel, "reference label out of range");
    if (p == kIgnore) {
      ++pred_ignored_[r];
      continue;
    }
    require(p < num_classes_, ErrorKind::kLabel, "predicted label out of range");
    ++counts_[static_cast<std::size_t>(r) * num_classes_ + p];
  }
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  for (auto c : pred_ignored_) t += c;
  return t;
}

std::optional<double> ConfusionMatrix::iou(int cls) const {
  std::int64_t row = pred_ignored_[cls];
  std::int64_t col = 0;
  for (int k = 0; k < num_classes_; ++k) {
    row += at(cls, k);
    col += at(k, cls);
  }
  const std::int64_t inter = at(cls, cls);
  const std::int64_t uni = row + col - inter;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double ConfusionMatrix::mean_iou() const {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes_; ++c) {
    if (auto v = iou(c)) {
      sum += *v;
      ++present;
    }
  }
  return present == 0 ? 1.0 : sum / present;
}

ConfusionMatrix confusion_matrix(const SegMask& pred, const SegMask& ref, int num_classes) {
  ConfusionMatrix cm(num_classes);
  cm.accumulate(pred, ref);
  return cm;
}

double mean_iou(const SegMask& pred, const SegMask& ref, int num_classes) {
  return confusion_matrix(pred, ref, num_classes).mean_iou();
}

std::vector<std::pair<int, std::optional<double>>> per_class_iou(const SegMask& pred, const SegMask& ref,
                                                                 int num_classes) {
  const auto cm = confusion_matrix(pred, ref, num_classes);
  std::vector<std::pair<int, std::optional<double>>> out;
  out.reserve(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) out.emplace_back(c, cm.iou(c));
  return out;
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kMaskMagic[5] = "SGMK";
constexpr char kImageMagic[5] = "SGIM";
constexpr std::uint32_t kRasterVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_mask(const SegMask& mask, int num_classes) {
  validate(mask, num_classes);
  detail::ByteWriter w;
  w.bytes(kMaskMagic, 4);
  w.u32(kRasterVersion);
  w.u32(static_cast<std::uint32_t>(mask.height));
  w.u32(static_cast<std::uint32_t>(mask.width));
  w.u32(static_cast<std::uint32_t>(num_classes));
  w.bytes(mask.labels.data(), mask.labels.size());
  return w.take();
}

SegMask decode_mask(std::span<const std::uint8_t> bytes, int* num_classes) {
  detail::ByteReader r(bytes, "mask");
  r.expect_magic(kMaskMagic);
  require(r.u32() == kRasterVersion, ErrorKind::kFormat, "mask: unsupported version");
  const auto h = r.u32();
  const auto w = r.u32();
  const auto c = r.u32();
  require(h >= 1 && w >= 1 && h <= (1u << 16) && w <= (1u << 16), ErrorKind::kFormat, "mask: bad extents");
  SegMask mask(static_cast<int>(h), static_cast<int>(w));
  auto payload = r.raw(mask.labels.size());
  std::copy(payload.begin(), payload.end(), mask.labels.begin());
  r.expect_end();
  validate(mask, static_cast<int>(c));
  if (num_classes) *num_classes = static_cast<int>(c);
  return mask;
}

std::vector<std::uint8_t> encode_image(const Image& image) {
  detail::ByteWriter w;
  w.bytes(kImageMagic, 4);
  w.u32(kRasterVersion);
  w.u32(static_cast<std::uint32_t>(image.height));
  w.u32(static_cast<std::uint32_t>(image.width));
  w.u32(static_cast<std::uint32_t>(image.channels));
  for (float v : image.data) w.f32(v);
  return w.take();
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "image");
  r.expect_magic(kImageMagic);
  require(r.u32() == kRasterVersion, ErrorKind::kFormat, "image: unsupported version");
  const auto h = r.u32();
  const auto w = r.u32();
  const auto c = r.u32();
  require(h >= 1 && w >= 1 && c >= 1 && h <= (1u << 16) && w <= (1u << 16) && c <= 64, ErrorKind::kFormat,
          "image: bad extents");
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (auto& v : img.data) v = r.f32();
  r.expect_end();
  return img;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write " + path.string());
}

void write_mask(const std::filesystem::path& path, const SegMask& mask, int num_classes) {
  write_file(path, encode_mask(mask, num_classes));
}

SegMask read_mask(const std::filesystem::path& path, int* num_classes) {
  return decode_mask(read_file(path), num_classes);
}

void write_image(const std::filesystem::path& path, const Image& image) { write_file(path, encode_image(image)); }

Image read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

}  // namespace stpp
