#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "stpp/error.hpp"
#include "stpp/segcore.hpp"

using namespace stpp;
using testing::mask_from;

TEST_CASE("confusion matrix of the 2x2 example") {
  const auto pred = mask_from({{0, 0}, {1, 1}});
  const auto ref = mask_from({{0, 1}, {1, 1}});
  const auto cm = confusion_matrix(pred, ref, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 0);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(1, 1) == 2);
  CHECK(cm.total() == 4);
}

TEST_CASE("identity and all-ignore confusion matrices") {
  std::mt19937_64 rng(3);
  const auto m = testing::random_mask(rng, 6, 5, 4, 0.0);
  const auto cm = confusion_matrix(m, m, 4);
  std::int64_t trace = 0;
  for (int c = 0; c < 4; ++c) trace += cm.at(c, c);
  CHECK(trace == 30);

  const SegMask ignored(3, 3, kIgnore);
  const auto empty = confusion_matrix(SegMask(3, 3, 1), ignored, 4);
  for (auto v : empty.matrix()) CHECK(v == 0);
  CHECK(empty.total() == 0);
}

TEST_CASE("mean IoU examples") {
  CHECK(mean_iou(mask_from({{0, 0}, {1, 1}}), mask_from({{0, 1}, {1, 1}}), 2) ==
        doctest::Approx((0.5 + 2.0 / 3.0) / 2).epsilon(1e-15));
  CHECK(mean_iou(SegMask(2, 2, 0), SegMask(2, 2, 1), 2) == 0.0);
  const auto m = mask_from({{2, 0}, {1, 3}});
  CHECK(mean_iou(m, m, 4) == 1.0);
  // Every class skipped.
  CHECK(mean_iou(SegMask(2, 2, kIgnore), SegMask(2, 2, kIgnore), 3) == 1.0);
}

TEST_CASE("per-class IoU reports absent classes") {
  const auto iou = per_class_iou(mask_from({{0, 0}, {1, 1}}), mask_from({{0, 1}, {1, 1}}), 2);
  REQUIRE(iou.size() == 2);
  CHECK(iou[0].second.value() == 0.5);
  CHECK(iou[1].second.value() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const auto single = per_class_iou(SegMask(2, 2, 1), SegMask(2, 2, 1), 3);
  CHECK_FALSE(single[0].second.has_value());
  CHECK(single[1].second.value() == 1.0);
  CHECK_FALSE(single[2].second.has_value());

  for (const auto& [cls, v] : per_class_iou(SegMask(2, 2, 0), SegMask(2, 2, kIgnore), 3)) CHECK_FALSE(v);
}

TEST_CASE("predicted IGNORE counts as a miss") {
  // ref all class 0; one predicted pixel is IGNORE.
  const auto pred = mask_from({{0, 255}, {0, 0}});
  const SegMask ref(2, 2, 0);
  const auto cm = confusion_matrix(pred, ref, 2);
  CHECK(cm.pred_ignored(0) == 1);
  CHECK(cm.total() == 4);
  CHECK(cm.iou(0).value() == 0.75);
  CHECK_FALSE(cm.iou(1).has_value());
}

TEST_CASE("metrics agree with the set-counting oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto pred = testing::random_mask(rng, 5, 7, 3, 0.1);
    const auto ref = testing::random_mask(rng, 5, 7, 3, 0.2);
    const auto iou = per_class_iou(pred, ref, 3);
    const auto expected = testing::oracle_class_iou(pred, ref, 3);
    for (int c = 0; c < 3; ++c) CHECK(iou[c].second == expected[c]);
    const double m = mean_iou(pred, ref, 3);
    CHECK(m == testing::oracle_mean_iou(pred, ref, 3));
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("metric shape mismatch is a dimension error") {
  try {
    (void)mean_iou(SegMask(2, 2), SegMask(2, 3), 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimension);
  }
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.num_classes = 2;
  d.labeled.push_back({0, Image(2, 2, 3, 0.5f), SegMask(2, 2, 1)});
  d.unlabeled.push_back({1, Image(2, 2, 3, 0.5f), std::nullopt, std::nullopt});
  CHECK_NOTHROW(validate(d));
  CHECK(d.unlabeled_ids() == std::vector<SampleId>{1});

  auto dup = d;
  dup.unlabeled[0].id = 0;
  CHECK_THROWS_AS(validate(dup), Error);

  auto bad_label = d;
  bad_label.labeled[0].mask.at(0, 0) = 2;
  try {
    validate(bad_label);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kLabel);
  }

  auto bad_value = d;
  bad_value.labeled[0].image.data[0] = 1.5f;
  CHECK_THROWS_AS(validate(bad_value), Error);

  try {
    (void)d.find_unlabeled(7);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kLookup);
  }
}

TEST_CASE("mask and image encodings round-trip") {
  std::mt19937_64 rng(5);
  const auto mask = testing::random_mask(rng, 9, 4, 4, 0.1);
  int classes = 0;
  CHECK(decode_mask(encode_mask(mask, 4), &classes) == mask);
  CHECK(classes == 4);

  const auto img = testing::random_image(rng, 3, 5, 3);
  CHECK(decode_image(encode_image(img)) == img);

  // Header: magic, version, H, W, C, then one byte per pixel.
  const auto bytes = encode_mask(mask, 4);
  CHECK(bytes.size() == 4 + 4 * 4 + mask.pixels());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SGMK");
}

TEST_CASE("corrupt rasters are rejected") {
  auto bytes = encode_mask(SegMask(2, 2, 1), 2);
  auto check_format = [](auto&& fn) {
    try {
      fn();
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFormat);
    }
  };
  auto truncated = bytes;
  truncated.pop_back();
  check_format([&] { (void)decode_mask(truncated); });
  auto magic = bytes;
  magic[0] = 'X';
  check_format([&] { (void)decode_mask(magic); });
  auto trailing = bytes;
  trailing.push_back(0);
  check_format([&] { (void)decode_mask(trailing); });
  auto label = bytes;
  label.back() = 9;  // >= C and not IGNORE
  CHECK_THROWS_AS((void)decode_mask(label), Error);
}

TEST_CASE("raster files round-trip and missing files are io errors") {
  const auto dir = testing::scratch_dir("segcore");
  const auto mask = mask_from({{0, 1, 255}});
  write_mask(dir / "a.mask", mask, 2);
  CHECK(read_mask(dir / "a.mask") == mask);
  try {
    (void)read_image(dir / "missing.img");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}
