#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "stpp/augment.hpp"
#include "stpp/error.hpp"
#include "stpp/pseudolabel.hpp"

using namespace stpp;

namespace {

model::ModelParams random_model(std::uint64_t seed, int classes) {
  auto p = model::ModelParams::init(classes, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  for (auto& v : p.weights) v = n(rng);
  return p;
}

Dataset small_dataset(std::mt19937_64& rng, int n) {
  Dataset d;
  d.num_classes = 3;
  d.labeled.push_back({100, testing::random_image(rng, 6, 6), testing::random_mask(rng, 6, 6, 3, 0)});
  for (int i = 0; i < n; ++i)
    d.unlabeled.push_back({static_cast<SampleId>(i), testing::random_image(rng, 6, 6), std::nullopt, std::nullopt});
  return d;
}

}  // namespace

TEST_CASE("identity TTA equals a single softmax pass") {
  std::mt19937_64 rng(1);
  const auto img = testing::random_image(rng, 7, 9);
  const auto p = random_model(2, 4);
  const auto tta = pl::predict_proba_tta(p, img, pl::TtaConfig::single_scale());
  const auto direct = model::softmax(model::forward(p, img));
  REQUIRE(tta.values.size() == direct.values.size());
  for (std::size_t i = 0; i < tta.values.size(); ++i) CHECK(tta.values[i] == doctest::Approx(direct.values[i]).epsilon(1e-15));
  CHECK(pl::pseudo_label(p, img, pl::TtaConfig::single_scale()) == model::argmax(direct));
}

TEST_CASE("TTA output is a distribution at every pixel") {
  std::mt19937_64 rng(2);
  const auto img = testing::random_image(rng, 10, 8);
  const auto probs = pl::predict_proba_tta(random_model(3, 4), img, pl::TtaConfig{});
  for (std::size_t px = 0; px < probs.pixels(); ++px) {
    double s = 0;
    for (int c = 0; c < 4; ++c) {
      CHECK(probs.pixel(px)[c] >= 0.0);
      s += probs.pixel(px)[c];
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("a constant-prediction model gives the constant distribution at every scale") {
  std::mt19937_64 rng(3);
  const auto img = testing::random_image(rng, 9, 9);
  auto p = model::ModelParams::zeros(3);
  p.bias = {0.1, 1.3, -0.4};
  const auto expected = model::softmax(model::forward(p, Image(1, 1, 3)));
  const auto probs = pl::predict_proba_tta(p, img, pl::TtaConfig{});
  for (std::size_t px = 0; px < probs.pixels(); ++px)
    for (int c = 0; c < 3; ++c) CHECK(probs.pixel(px)[c] == doctest::Approx(expected.values[c]).epsilon(1e-12));
  const auto mask = pl::pseudo_label(p, img, pl::TtaConfig{});
  for (auto v : mask.labels) CHECK(v == 1);
}

TEST_CASE("flip TTA on a mirror-symmetric image is mirror-symmetric") {
  std::mt19937_64 rng(4);
  auto img = testing::random_image(rng, 6, 8);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 4; ++c)
      for (int ch = 0; ch < 3; ++ch) img.at(r, 7 - c, ch) = img.at(r, c, ch);
  auto p = random_model(5, 3);
  for (int k = 0; k < 3; ++k) p.w(k, 16) = 0.0;  // drop the column coordinate
  const auto probs = pl::predict_proba_tta(p, img, {{1.0}, true});
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 8; ++c)
      for (int k = 0; k < 3; ++k)
        CHECK(probs.pixel(static_cast<std::size_t>(r) * 8 + c)[k] ==
              doctest::Approx(probs.pixel(static_cast<std::size_t>(r) * 8 + (7 - c))[k]).epsilon(1e-12));
}

TEST_CASE("argmax ties go to the smaller class and hand-set maps decode as expected") {
  model::PixelScores s(2, 2, 3);
  s.values = {0.2, 0.5, 0.3,  // 1
              0.4, 0.4, 0.2,  // tie -> 0
              0.1, 0.45, 0.45,  // tie -> 1
              0.1, 0.2, 0.7};  // 2
  CHECK(model::argmax(s) == testing::mask_from({{1, 0}, {1, 2}}));
  Image img(3, 3, 3, 0.5f);
  for (auto v : pl::pseudo_label(model::ModelParams::zeros(4), img, pl::TtaConfig{}).labels) CHECK(v == 0);
}

TEST_CASE("empty TTA scales are a config error") {
  try {
    (void)pl::predict_proba_tta(model::ModelParams::zeros(2), Image(2, 2, 3), {{}, false});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
}

TEST_CASE("label_dataset attaches masks to exactly the listed ids") {
  std::mt19937_64 rng(6);
  const auto d = small_dataset(rng, 5);
  const auto a = random_model(7, 3);
  const auto b = random_model(8, 3);
  const pl::TtaConfig tta{{0.75, 1.0}, true};

  const auto none = pl::label_dataset(a, d, tta, {});
  for (const auto& s : none.unlabeled) CHECK_FALSE(s.pseudo.has_value());

  const auto ids = d.unlabeled_ids();
  const auto full = pl::label_dataset(a, d, tta, ids);
  for (const auto& s : full.unlabeled) {
    REQUIRE(s.pseudo.has_value());
    for (auto v : s.pseudo->labels) CHECK(v != kIgnore);
  }

  const std::vector<SampleId> subset{1, 3};
  const auto relabeled = pl::label_dataset(b, full, tta, subset);
  for (std::size_t i = 0; i < relabeled.unlabeled.size(); ++i) {
    const auto& s = relabeled.unlabeled[i];
    if (s.id == 1 || s.id == 3)
      CHECK(*s.pseudo == pl::pseudo_label(b, s.image, tta));
    else
      CHECK(*s.pseudo == *full.unlabeled[i].pseudo);
  }
  CHECK(relabeled.labeled[0].mask == d.labeled[0].mask);

  const std::vector<SampleId> unknown{42};
  try {
    (void)pl::label_dataset(a, d, tta, unknown);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kLookup);
  }
}

TEST_CASE("pseudo labeling is deterministic") {
  std::mt19937_64 rng(9);
  const auto img = testing::random_image(rng, 12, 12);
  const auto p = random_model(10, 4);
  CHECK(pl::pseudo_label(p, img, pl::TtaConfig{}) == pl::pseudo_label(p, img, pl::TtaConfig{}));
}
