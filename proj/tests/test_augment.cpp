#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "stpp/augment.hpp"
#include "stpp/error.hpp"

using namespace stpp;
using namespace stpp::aug;

namespace {

Image constant_image(int h, int w, float v) { return Image(h, w, 3, v); }

}  // namespace

TEST_CASE("rng streams are keyed by seed, id, epoch and salt") {
  RngStream a(9, 4, 2, 1), b(9, 4, 2, 1), c(9, 4, 3, 1), d(9, 5, 2, 1);
  const double x = a.uniform(0, 1);
  CHECK(x == b.uniform(0, 1));
  CHECK(x != c.uniform(0, 1));
  CHECK(x != d.uniform(0, 1));
  RngStream e(9, 4, 2, 1);
  for (int i = 0; i < 100; ++i) {
    const int k = e.uniform_int(2, 5);
    CHECK(k >= 2);
    CHECK(k <= 5);
  }
}

TEST_CASE("weak augment is the identity with no flip, unit scale and full crop") {
  std::mt19937_64 gen(1);
  const auto img = testing::random_image(gen, 6, 6);
  const auto mask = testing::random_mask(gen, 6, 6, 3, 0.0);
  WeakAugConfig cfg{0.0, 1.0, 1.0, 6};
  RngStream rng(1);
  const auto [wi, wm] = weak_augment(img, mask, cfg, rng);
  CHECK(wi == img);
  CHECK(wm == mask);
}

TEST_CASE("flip reverses columns of image and mask") {
  const auto m = testing::mask_from({{1, 2}});
  CHECK(horizontal_flip(m) == testing::mask_from({{2, 1}}));
  Image img(1, 2, 3);
  for (int ch = 0; ch < 3; ++ch) {
    img.at(0, 0, ch) = 0.1f * ch;
    img.at(0, 1, ch) = 0.5f + 0.1f * ch;
  }
  const auto f = horizontal_flip(img);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(f.at(0, 0, ch) == img.at(0, 1, ch));
    CHECK(f.at(0, 1, ch) == img.at(0, 0, ch));
  }
}

TEST_CASE("nearest-neighbour doubling replicates labels in 2x2 blocks") {
  const auto m = testing::mask_from({{0, 1}, {2, 3}});
  const auto up = resize_nearest(m, 4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(up.at(r, c) == m.at(r / 2, c / 2));
}

TEST_CASE("bilinear resize keeps constant images constant and same size is identity") {
  const auto img = constant_image(5, 7, 0.3f);
  const auto big = resize_bilinear(img, 11, 3);
  for (float v : big.data) CHECK(v == doctest::Approx(0.3f));
  std::mt19937_64 gen(2);
  const auto rnd = testing::random_image(gen, 4, 4);
  CHECK(resize_bilinear(rnd, 4, 4) == rnd);
}

TEST_CASE("weak augment output shape and padding") {
  std::mt19937_64 gen(4);
  const auto img = testing::random_image(gen, 16, 16);
  const SegMask mask(16, 16, 1);
  WeakAugConfig cfg{0.5, 0.5, 0.5, 16};  // always shrinks to 8x8, so most of the crop is padding
  RngStream rng(3);
  WeakTransform t;
  const auto [wi, wm] = weak_augment(img, mask, cfg, rng, &t);
  CHECK(wi.height == 16);
  CHECK(wi.width == 16);
  CHECK(wm.height == 16);
  const auto ignored = std::count(wm.labels.begin(), wm.labels.end(), kIgnore);
  CHECK(ignored == 16 * 16 - 8 * 8);
  CHECK(std::count(wm.labels.begin(), wm.labels.end(), 1) == 64);
}

TEST_CASE("recorded weak transform replays exactly") {
  std::mt19937_64 gen(8);
  WeakAugConfig cfg;
  cfg.crop_size = 20;
  for (int trial = 0; trial < 50; ++trial) {
    const auto img = testing::random_image(gen, 24, 24);
    const auto mask = testing::random_mask(gen, 24, 24, 4, 0.05);
    RngStream rng(77, static_cast<std::uint64_t>(trial));
    WeakTransform t;
    const auto [wi, wm] = weak_augment(img, mask, cfg, rng, &t);
    CHECK(apply_weak_transform(mask, t) == wm);
    CHECK(apply_weak_transform(img, t) == wi);
  }
}

TEST_CASE("strong augment with every probability zero is the identity") {
  std::mt19937_64 gen(5);
  const auto img = testing::random_image(gen, 8, 8);
  const auto mask = testing::random_mask(gen, 8, 8, 3, 0.0);
  RngStream rng(1);
  const auto [si, sm] = strong_augment(img, mask, StrongAugConfig::disabled(), rng);
  CHECK(si == img);
  CHECK(sm == mask);
}

TEST_CASE("photometric augmentations never touch the mask") {
  std::mt19937_64 gen(6);
  auto cfg = StrongAugConfig{};
  cfg.cutout.apply_prob = 0.0;
  cfg.colorjitter.apply_prob = 1.0;
  cfg.grayscale_prob = 0.5;
  cfg.blur.apply_prob = 1.0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto img = testing::random_image(gen, 10, 12);
    const auto mask = testing::random_mask(gen, 10, 12, 4, 0.1);
    RngStream rng(3, static_cast<std::uint64_t>(trial));
    const auto [si, sm] = strong_augment(img, mask, cfg, rng);
    CHECK(sm == mask);
    for (float v : si.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("cutout of rows 0-1, cols 0-1 on a 4x4 mask") {
  Image img = constant_image(4, 4, 0.5f);
  SegMask mask(4, 4, 0);
  RngStream rng(2);
  cutout(img, mask, {0, 0, 2, 2}, rng);
  int ignored = 0, zeros = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      const bool inside = r < 2 && c < 2;
      if (inside) CHECK(mask.at(r, c) == kIgnore);
      ignored += mask.at(r, c) == kIgnore;
      zeros += mask.at(r, c) == 0;
      if (!inside)
        for (int ch = 0; ch < 3; ++ch) CHECK(img.at(r, c, ch) == 0.5f);
    }
  CHECK(ignored == 4);
  CHECK(zeros == 12);
}

TEST_CASE("strong cutout trace matches the IGNORE region") {
  std::mt19937_64 gen(12);
  const auto cfg = StrongAugConfig{}.only("cutout");
  for (int trial = 0; trial < 30; ++trial) {
    const auto img = testing::random_image(gen, 20, 20);
    const SegMask mask(20, 20, 1);
    RngStream rng(5, static_cast<std::uint64_t>(trial));
    StrongTrace trace;
    const auto [si, sm] = strong_augment(img, mask, cfg, rng, &trace);
    REQUIRE(trace.cutout.has_value());
    const auto& rect = *trace.cutout;
    CHECK(rect.row >= 0);
    CHECK(rect.col >= 0);
    CHECK(rect.row + rect.height <= 20);
    CHECK(rect.col + rect.width <= 20);
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 20; ++c) {
        const bool inside = r >= rect.row && r < rect.row + rect.height && c >= rect.col && c < rect.col + rect.width;
        CHECK(sm.at(r, c) == (inside ? kIgnore : 1));
      }
  }
}

TEST_CASE("grayscale is luma and fixes gray images") {
  Image img(1, 1, 3);
  img.at(0, 0, 0) = 0.2f;
  img.at(0, 0, 1) = 0.4f;
  img.at(0, 0, 2) = 0.9f;
  const auto g = grayscale(img);
  const double luma = 0.299 * 0.2f + 0.587 * 0.4f + 0.114 * 0.9f;
  for (int ch = 0; ch < 3; ++ch) CHECK(g.at(0, 0, ch) == doctest::Approx(luma).epsilon(1e-6));
  const auto flat = constant_image(3, 3, 0.35f);
  const auto gf = grayscale(flat);
  for (std::size_t i = 0; i < flat.data.size(); ++i) CHECK(gf.data[i] == doctest::Approx(flat.data[i]).epsilon(1e-6));
}

TEST_CASE("blur with vanishing sigma is the identity") {
  std::mt19937_64 gen(13);
  const auto img = testing::random_image(gen, 6, 9);
  for (double sigma : {0.0, 1e-4}) {
    const auto b = gaussian_blur(img, sigma);
    for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(b.data[i] - img.data[i]) < 1e-6);
  }
}

TEST_CASE("blur against a direct separable convolution") {
  std::mt19937_64 gen(21);
  const auto img = testing::random_image(gen, 7, 8);
  const double sigma = 0.8;
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double s = 0;
  for (int i = -radius; i <= radius; ++i) s += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= s;
  const auto b = gaussian_blur(img, sigma);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 8; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx)
            acc += k[dy + radius] * k[dx + radius] *
                   img.at(std::clamp(r + dy, 0, 6), std::clamp(c + dx, 0, 7), ch);
        CHECK(b.at(r, c, ch) == doctest::Approx(acc).epsilon(1e-5));
      }
}

TEST_CASE("brightness factor 2 on a constant 0.4 image gives 0.8") {
  JitterDraws d;
  d.brightness = 2.0;
  const auto out = colorjitter(constant_image(3, 3, 0.4f), d);
  for (float v : out.data) CHECK(v == doctest::Approx(0.8f).epsilon(1e-6));
  // Neutral draws leave the image alone.
  std::mt19937_64 gen(14);
  const auto img = testing::random_image(gen, 4, 4);
  const auto same = colorjitter(img, JitterDraws{});
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(same.data[i] == doctest::Approx(img.data[i]).epsilon(1e-5));
}

TEST_CASE("augmentation determinism") {
  std::mt19937_64 gen(15);
  const auto img = testing::random_image(gen, 16, 16);
  const auto mask = testing::random_mask(gen, 16, 16, 4, 0.0);
  WeakAugConfig wcfg;
  wcfg.crop_size = 12;
  auto run = [&] {
    RngStream rng(42, 3, 7, 1);
    auto [wi, wm] = weak_augment(img, mask, wcfg, rng);
    return strong_augment(wi, wm, StrongAugConfig{}, rng);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("augmentation config validation") {
  WeakAugConfig w;
  w.scale_low = 0.0;
  CHECK_THROWS_AS(w.validate(), Error);
  StrongAugConfig s;
  s.blur.sigma_low = -1;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK_THROWS_AS((void)StrongAugConfig{}.only("mixup"), Error);
  const auto g = StrongAugConfig{}.only("grayscale");
  CHECK(g.grayscale_prob == 0.2);
  CHECK(g.colorjitter.apply_prob == 0.0);
  CHECK(g.blur.apply_prob == 0.0);
  CHECK(g.cutout.apply_prob == 0.0);
}
