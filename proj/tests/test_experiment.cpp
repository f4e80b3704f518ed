#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "stpp/error.hpp"
#include "stpp/experiment.hpp"

using namespace stpp;
using namespace stpp::exp;

namespace {

const char* kTiny = R"({
  "data": {"image_size": 16, "pool_size": 10, "validation_size": 3, "labeled_fraction": 0.3,
           "min_shape_size": 4, "max_shape_size": 8},
  "train": {"base_lr": 0.5, "batch_size": 4, "epochs": 2},
  "weak": {"crop_size": 12},
  "tta": {"scales": [1.0], "use_flip": false},
  "seeds": [1, 2]
})";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::string& json) {
  try {
    validate_experiment(parse_config(json));
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kStage;
}

}  // namespace

TEST_CASE("absent keys keep defaults and present keys override") {
  const auto c = parse_config("{}");
  CHECK(c.data.image_size == 64);
  CHECK(c.pipeline.train.base_lr == 0.05);
  CHECK(c.pipeline.tta.scales.size() == 5);
  CHECK(c.pipeline_name == "stpp");
  const auto t = parse_config(kTiny);
  CHECK(t.data.pool_size == 10);
  CHECK(t.pipeline.train.epochs == 2);
  CHECK(t.pipeline.tta.scales == std::vector<double>{1.0});
  CHECK_FALSE(t.pipeline.tta.use_flip);
  CHECK(t.seeds == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("dump and parse are inverse") {
  const auto t = parse_config(kTiny);
  const auto again = parse_config(dump_config(t));
  CHECK(dump_config(again) == dump_config(t));
  CHECK(config_hash(again) == config_hash(t));
}

TEST_CASE("config errors") {
  CHECK(kind_of(R"({"data": {"imagesize": 3}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"train": {"epochs": "many"}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"weak": {"crop_size": 128}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"selection": {"reliable_fraction": 1.0}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"selection": {"reliable_fraction": 0.0}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"tta": {"scales": []}})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"seeds": []})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"pipeline": "fixmatch"})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"ablation": "mixup"})") == ErrorKind::kConfig);
  CHECK(kind_of("{not json") == ErrorKind::kConfig);
  try {
    (void)load_config("/nonexistent/config.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

TEST_CASE("config hash ignores the output directory only") {
  auto a = parse_config(kTiny);
  auto b = a;
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.pipeline.train.epochs = 3;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(hash_hex(0xab) == "00000000000000ab");
}

TEST_CASE("run names") {
  CHECK(run_name("stpp", "", 3) == "stpp-seed3");
  CHECK(run_name("stpp", "iterative:+1", 3) == "stpp-iterative__1-seed3");
  CHECK(run_name("st", "single-aug:blur", 1) == "st-single-aug_blur-seed1");
}

TEST_CASE("run directory contents are reproducible") {
  const auto cfg = parse_config(kTiny);
  const auto root = testing::scratch_dir("experiment_run");
  const auto a = run_experiment(cfg, 1, "stpp", "", root / "a");
  const auto b = run_experiment(cfg, 1, "stpp", "", root / "b");
  CHECK(a.dir.filename() == "stpp-seed1");
  for (const char* f : {"report.csv", "timing.csv", "manifest.csv", "config.json", "select/scores.csv",
                        "supervised/ckpt_1of3.ckpt", "retrain-full/final.ckpt", "retrain-full/report_fragment.csv"})
    CHECK_MESSAGE(std::filesystem::exists(a.dir / f), f);
  for (const char* f : {"report.csv", "manifest.csv", "config.json", "select/scores.csv", "supervised/ckpt_2of3.ckpt",
                        "retrain-partial/final.ckpt", "retrain-full/final.ckpt"})
    CHECK_MESSAGE(slurp(a.dir / f) == slurp(b.dir / f), f);
  CHECK(slurp(a.dir / "report.csv") == a.result.report.body());

  const auto ck = model::load_checkpoint(read_file(a.dir / "retrain-full/final.ckpt"));
  CHECK(ck.params == a.result.params);
  CHECK(ck.config_hash == config_hash(cfg));

  std::ostringstream out;
  inspect_scores(a.dir, out);
  CHECK(out.str().rfind("id,score,bucket\n", 0) == 0);
  CHECK(out.str().find("bucket,count,mean_score") != std::string::npos);
  std::ostringstream none;
  try {
    inspect_scores(root / "missing", none);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

TEST_CASE("benchmark results do not depend on the job count") {
  const auto cfg = parse_config(kTiny);
  const auto root = testing::scratch_dir("experiment_bench");
  const std::vector<BenchmarkEntry> entries{{"suponly", ""}, {"st", ""}};
  const auto serial = run_benchmark(cfg, {1, 2}, entries, root / "serial", 1);
  const auto parallel = run_benchmark(cfg, {1, 2}, entries, root / "parallel", 2);
  for (std::uint64_t s : {1, 2})
    for (const char* label : {"suponly", "st"}) CHECK(serial.final_miou(s, label) == parallel.final_miou(s, label));
  CHECK(slurp(root / "serial/aggregate.csv") == slurp(root / "parallel/aggregate.csv"));
  CHECK(slurp(root / "serial/stage_curves.csv") == slurp(root / "parallel/stage_curves.csv"));
  CHECK(std::filesystem::exists(root / "serial/seed_2.csv"));
}
