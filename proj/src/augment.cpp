#include "stpp/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "stpp/error.hpp"

namespace stpp::aug {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t sample_id, std::uint64_t epoch, std::uint64_t salt) {
  std::uint64_t key = mix64(seed);
  key = mix64(key ^ sample_id);
  key = mix64(key ^ (epoch * 0xD6E8FEB86659FD93ull));
  key = mix64(key ^ (salt * 0xCA5A826395121157ull));
  engine_.seed(key);
}

double RngStream::uniform(double lo, double hi) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

bool RngStream::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_) < p;
}

int RngStream::uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

double RngStream::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

// ---------------------------------------------------------------------------

void WeakAugConfig::validate() const {
  require(flip_prob >= 0.0 && flip_prob <= 1.0, ErrorKind::kConfig, "weak.flip_prob must be in [0,1]");
  require(scale_low > 0.0 && scale_low <= scale_high, ErrorKind::kConfig, "weak.scale_range needs 0 < low <= high");
  require(crop_size >= 1, ErrorKind::kConfig, "weak.crop_size must be >= 1");
}

namespace {
void check_prob(double p, const char* name) {
  require(p >= 0.0 && p <= 1.0, ErrorKind::kConfig, std::string(name) + " must be in [0,1]");
}
}  // namespace

void StrongAugConfig::validate() const {
  check_prob(colorjitter.apply_prob, "strong.colorjitter.apply_prob");
  check_prob(grayscale_prob, "strong.grayscale_prob");
  check_prob(blur.apply_prob, "strong.blur.apply_prob");
  check_prob(cutout.apply_prob, "strong.cutout.apply_prob");
  require(colorjitter.brightness >= 0 && colorjitter.contrast >= 0 && colorjitter.saturation >= 0,
          ErrorKind::kConfig, "strong.colorjitter factors must be non-negative");
  require(colorjitter.hue >= 0 && colorjitter.hue <= 0.5, ErrorKind::kConfig, "strong.colorjitter.hue in [0,0.5]");
  require(blur.sigma_low > 0 && blur.sigma_low <= blur.sigma_high, ErrorKind::kConfig,
          "strong.blur sigma range must be positive");
  require(cutout.area_low > 0 && cutout.area_low <= cutout.area_high && cutout.area_high <= 1, ErrorKind::kConfig,
          "strong.cutout area range must lie in (0,1]");
  require(cutout.aspect_low > 0 && cutout.aspect_low <= cutout.aspect_high, ErrorKind::kConfig,
          "strong.cutout aspect range must be positive");
}

StrongAugConfig StrongAugConfig::disabled() {
  StrongAugConfig c;
  c.colorjitter.apply_prob = 0;
  c.grayscale_prob = 0;
  c.blur.apply_prob = 0;
  c.cutout.apply_prob = 0;
  return c;
}

StrongAugConfig StrongAugConfig::only(const std::string& name) const {
  StrongAugConfig c = *this;
  const auto off = disabled();
  if (name != "colorjitter") c.colorjitter.apply_prob = off.colorjitter.apply_prob;
  if (name != "grayscale") c.grayscale_prob = off.grayscale_prob;
  if (name != "blur") c.blur.apply_prob = off.blur.apply_prob;
  if (name != "cutout") c.cutout.apply_prob = off.cutout.apply_prob;
  require(name == "colorjitter" || name == "grayscale" || name == "blur" || name == "cutout", ErrorKind::kConfig,
          "unknown strong augmentation '" + name + "'");
  return c;
}

// ---------------------------------------------------------------------------
// Geometry

Image horizontal_flip(const Image& img) {
  Image out = img;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < img.channels; ++ch) out.at(r, c, ch) = img.at(r, img.width - 1 - c, ch);
  return out;
}

SegMask horizontal_flip(const SegMask& mask) {
  SegMask out = mask;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) out.at(r, c) = mask.at(r, mask.width - 1 - c);
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Half-pixel-centred sampling positions.
std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
  }
  return taps;
}

int nearest_source(int dst, int in, int out) {
  const int src = static_cast<int>(std::floor((dst + 0.5) * static_cast<double>(in) / out));
  return std::min(src, in - 1);
}

}  // namespace

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  require(out_h >= 1 && out_w >= 1, ErrorKind::kDimension, "resize target must be positive");
  if (out_h == img.height && out_w == img.width) return img;
  const auto ty = bilinear_taps(img.height, out_h);
  const auto tx = bilinear_taps(img.width, out_w);
  Image out(out_h, out_w, img.channels);
  for (int r = 0; r < out_h; ++r) {
    const auto& y = ty[static_cast<std::size_t>(r)];
    for (int c = 0; c < out_w; ++c) {
      const auto& x = tx[static_cast<std::size_t>(c)];
      for (int ch = 0; ch < img.channels; ++ch) {
        const double top = img.at(y.lo, x.lo, ch) * (1 - x.frac) + img.at(y.lo, x.hi, ch) * x.frac;
        const double bot = img.at(y.hi, x.lo, ch) * (1 - x.frac) + img.at(y.hi, x.hi, ch) * x.frac;
        out.at(r, c, ch) = static_cast<float>(top * (1 - y.frac) + bot * y.frac);
      }
    }
  }
  return out;
}

SegMask resize_nearest(const SegMask& mask, int out_h, int out_w) {
  require(out_h >= 1 && out_w >= 1, ErrorKind::kDimension, "resize target must be positive");
  SegMask out(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    const int sr = nearest_source(r, mask.height, out_h);
    for (int c = 0; c < out_w; ++c) out.at(r, c) = mask.at(sr, nearest_source(c, mask.width, out_w));
  }
  return out;
}

WeakTransform draw_weak_transform(int height, int width, const WeakAugConfig& cfg, RngStream& rng) {
  cfg.validate();
  WeakTransform t;
  t.flip = rng.bernoulli(cfg.flip_prob);
  t.scale = rng.uniform(cfg.scale_low, cfg.scale_high);
  t.scaled_height = std::max(1, static_cast<int>(std::lround(height * t.scale)));
  t.scaled_width = std::max(1, static_cast<int>(std::lround(width * t.scale)));
  t.crop_size = cfg.crop_size;
  t.crop_row = rng.uniform_int(0, std::max(t.scaled_height, cfg.crop_size) - cfg.crop_size);
  t.crop_col = rng.uniform_int(0, std::max(t.scaled_width, cfg.crop_size) - cfg.crop_size);
  return t;
}

Image apply_weak_transform(const Image& img, const WeakTransform& t) {
  Image scaled = resize_bilinear(t.flip ? horizontal_flip(img) : img, t.scaled_height, t.scaled_width);
  std::vector<double> mean(static_cast<std::size_t>(scaled.channels), 0.0);
  if (scaled.height < t.crop_size || scaled.width < t.crop_size) {
    for (std::size_t i = 0; i < scaled.data.size(); ++i) mean[i % scaled.channels] += scaled.data[i];
    for (auto& m : mean) m /= static_cast<double>(scaled.pixels());
  }
  Image out(t.crop_size, t.crop_size, img.channels);
  for (int r = 0; r < t.crop_size; ++r) {
    const int sr = r + t.crop_row;
    for (int c = 0; c < t.crop_size; ++c) {
      const int sc = c + t.crop_col;
      const bool inside = sr < scaled.height && sc < scaled.width;
      for (int ch = 0; ch < img.channels; ++ch)
        out.at(r, c, ch) = inside ? scaled.at(sr, sc, ch) : static_cast<float>(mean[static_cast<std::size_t>(ch)]);
    }
  }
  return out;
}

SegMask apply_weak_transform(const SegMask& mask, const WeakTransform& t) {
  SegMask scaled = resize_nearest(t.flip ? horizontal_flip(mask) : mask, t.scaled_height, t.scaled_width);
  SegMask out(t.crop_size, t.crop_size, kIgnore);
  for (int r = 0; r < t.crop_size; ++r) {
    const int sr = r + t.crop_row;
    if (sr >= scaled.height) break;
    for (int c = 0; c < t.crop_size; ++c) {
      const int sc = c + t.crop_col;
      if (sc < scaled.width) out.at(r, c) = scaled.at(sr, sc);
    }
  }
  return out;
}

std::pair<Image, SegMask> weak_augment(const Image& img, const SegMask& mask, const WeakAugConfig& cfg,
                                       RngStream& rng, WeakTransform* record) {
  require(img.height == mask.height && img.width == mask.width, ErrorKind::kDimension,
          "weak_augment: image and mask shapes differ");
  const auto t = draw_weak_transform(img.height, img.width, cfg, rng);
  if (record) *record = t;
  return {apply_weak_transform(img, t), apply_weak_transform(mask, t)};
}

// ---------------------------------------------------------------------------
// Photometric

namespace {

void require_rgb(const Image& img, const char* op) {
  require(img.channels == 3, ErrorKind::kDimension, std::string(op) + " needs a 3-channel image");
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void blend(Image& img, const Image& other, double factor) {
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = clamp01(factor * img.data[i] + (1.0 - factor) * other.data[i]);
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    h = 0;
    return;
  }
  if (mx == r)
    h = (g - b) / d;
  else if (mx == g)
    h = 2.0 + (b - r) / d;
  else
    h = 4.0 + (r - g) / d;
  h /= 6.0;
  h -= std::floor(h);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = (h - std::floor(h)) * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

}  // namespace

Image grayscale(const Image& img) {
  require_rgb(img, "grayscale");
  Image out = img;
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const float* px = &img.data[p * 3];
    const float y = clamp01(luma(px[0], px[1], px[2]));
    out.data[p * 3] = out.data[p * 3 + 1] = out.data[p * 3 + 2] = y;
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0)) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) kernel[static_cast<std::size_t>(k + radius)] = std::exp(-(k * k) / (2 * sigma * sigma));
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& w : kernel) w /= norm;

  std::vector<double> tmp(img.data.size());
  const int h = img.height, w = img.width, nc = img.channels;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] * img.at(r, std::clamp(c + k, 0, w - 1), ch);
        tmp[img.index(r, c, ch)] = acc;
      }
  Image out(h, w, nc);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < nc; ++ch) {
        double acc = 0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[img.index(std::clamp(r + k, 0, h - 1), c, ch)];
        out.at(r, c, ch) = clamp01(acc);
      }
  return out;
}

Image colorjitter(const Image& img, const JitterDraws& draws) {
  require_rgb(img, "colorjitter");
  Image out = img;
  for (int op : draws.order) {
    switch (op) {
      case 0:
        for (auto& v : out.data) v = clamp01(v * draws.brightness);
        break;
      case 1: {
        double mean = 0;
        for (std::size_t p = 0; p < out.pixels(); ++p)
          mean += luma(out.data[p * 3], out.data[p * 3 + 1], out.data[p * 3 + 2]);
        mean /= static_cast<double>(out.pixels());
        for (auto& v : out.data) v = clamp01(draws.contrast * v + (1.0 - draws.contrast) * mean);
        break;
      }
      case 2:
        blend(out, grayscale(out), draws.saturation);
        break;
      case 3:
        if (draws.hue == 0.0) break;
        for (std::size_t p = 0; p < out.pixels(); ++p) {
          float* px = &out.data[p * 3];
          double h, s, v, r, g, b;
          rgb_to_hsv(px[0], px[1], px[2], h, s, v);
          hsv_to_rgb(h + draws.hue, s, v, r, g, b);
          px[0] = clamp01(r);
          px[1] = clamp01(g);
          px[2] = clamp01(b);
        }
        break;
      default:
        fail(ErrorKind::kConfig, "colorjitter: bad op index");
    }
  }
  return out;
}

void cutout(Image& img, SegMask& mask, const CutoutRect& rect, RngStream& rng) {
  require(img.height == mask.height && img.width == mask.width, ErrorKind::kDimension, "cutout: shapes differ");
  const int r1 = std::min(img.height, rect.row + rect.height);
  const int c1 = std::min(img.width, rect.col + rect.width);
  for (int r = std::max(0, rect.row); r < r1; ++r)
    for (int c = std::max(0, rect.col); c < c1; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) img.at(r, c, ch) = static_cast<float>(rng.uniform(0.0, 1.0));
      mask.at(r, c) = kIgnore;
    }
}

std::pair<Image, SegMask> strong_augment(const Image& img, const SegMask& mask, const StrongAugConfig& cfg,
                                         RngStream& rng, StrongTrace* trace) {
  require(img.height == mask.height && img.width == mask.width, ErrorKind::kDimension,
          "strong_augment: image and mask shapes differ");
  StrongTrace local;
  Image out = img;
  SegMask out_mask = mask;

  if (rng.bernoulli(cfg.colorjitter.apply_prob)) {
    const auto& cj = cfg.colorjitter;
    JitterDraws d;
    d.brightness = rng.uniform(std::max(0.0, 1 - cj.brightness), 1 + cj.brightness);
    d.contrast = rng.uniform(std::max(0.0, 1 - cj.contrast), 1 + cj.contrast);
    d.saturation = rng.uniform(std::max(0.0, 1 - cj.saturation), 1 + cj.saturation);
    d.hue = rng.uniform(-cj.hue, cj.hue);
    std::shuffle(d.order.begin(), d.order.end(), rng.engine());
    out = colorjitter(out, d);
    local.jitter = d;
  }
  if (rng.bernoulli(cfg.grayscale_prob)) {
    out = grayscale(out);
    local.grayscale = true;
  }
  if (rng.bernoulli(cfg.blur.apply_prob)) {
    const double sigma = rng.uniform(cfg.blur.sigma_low, cfg.blur.sigma_high);
    out = gaussian_blur(out, sigma);
    local.blur_sigma = sigma;
  }
  if (rng.bernoulli(cfg.cutout.apply_prob)) {
    const auto& co = cfg.cutout;
    const double area = rng.uniform(co.area_low, co.area_high) * static_cast<double>(img.pixels());
    const double aspect = rng.uniform(co.aspect_low, co.aspect_high);
    CutoutRect rect;
    rect.height = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, img.height);
    rect.width = std::clamp(static_cast<int>(std::lround(std::sqrt(area / aspect))), 1, img.width);
    rect.row = rng.uniform_int(0, img.height - rect.height);
    rect.col = rng.uniform_int(0, img.width - rect.width);
    cutout(out, out_mask, rect, rng);
    local.cutout = rect;
  }
  for (auto& v : out.data) v = clamp01(v);
  if (trace) *trace = local;
  return {std::move(out), std::move(out_mask)};
}

}  // namespace stpp::aug
